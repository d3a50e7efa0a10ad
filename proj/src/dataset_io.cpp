#include "gazeattn/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "gazeattn/config.hpp"
#include "gazeattn/errors.hpp"

namespace gazeattn {

void append_f64_le(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>(bits & 0xffU);
    bits >>= 8;
  }
  out.append(bytes, 8);
}

double read_f64_le(const char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(bytes[i]);
  return std::bit_cast<double>(bits);
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class ManifestReader {
 public:
  ManifestReader(const std::string& text, std::string path) : in_(text), path_(std::move(path)) {}

  std::istringstream next_line() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      return std::istringstream(line);
    }
    fail("unexpected end of file");
  }

  void expect(std::istringstream& line, const std::string& word) {
    std::string got;
    if (!(line >> got) || got != word) fail("expected '" + word + "'");
  }

  template <typename T>
  T number(std::istringstream& line) {
    std::string tok;
    if (!(line >> tok)) fail("missing number");
    T v{};
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail("bad number '" + tok + "'");
    return v;
  }

  std::string word(std::istringstream& line) {
    std::string tok;
    if (!(line >> tok)) fail("missing field");
    return tok;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istringstream in_;
  std::string path_;
  std::size_t line_no_ = 0;
};

}  // namespace

void write_dataset(const Dataset& ds, const std::string& manifest_path) {
  const std::filesystem::path manifest(manifest_path);
  const std::string blob_name = manifest.filename().string() + ".bin";
  const std::size_t per_sample = ds.shape.cells() * ds.channels;

  std::string manifest_text;
  manifest_text += "gazeattn-dataset " + std::to_string(kDatasetVersion) + "\n";
  manifest_text += "blob " + blob_name + "\n";
  manifest_text += "shape " + std::to_string(ds.shape.t) + " " + std::to_string(ds.shape.m) + " " +
                   std::to_string(ds.shape.n) + "\n";
  manifest_text += "channels " + std::to_string(ds.channels) + "\n";
  manifest_text += "classes " + std::to_string(ds.classes) + "\n";
  manifest_text += "samples " + std::to_string(ds.samples.size()) + "\n";

  std::string blob;
  blob.reserve(ds.samples.size() * per_sample * 8);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const ClipSample& s = ds.samples[i];
    if (s.shape != ds.shape || s.channels != ds.channels || s.features.size() != per_sample) {
      throw ValidationError("write_dataset: sample " + std::to_string(i) + " does not match the dataset shape");
    }
    manifest_text += "sample " + std::to_string(i) + " label " + std::to_string(s.label) + " offset " +
                     std::to_string(blob.size()) + " gaze " + std::to_string(s.gaze.size()) + "\n";
    for (const GazeRecord& r : s.gaze) {
      manifest_text += "g " + std::to_string(r.frame_index) + " " + std::string(to_string(r.kind)) + " ";
      manifest_text += r.kind == GazeKind::Untracked ? std::string("- -") : fmt(r.u) + " " + fmt(r.v);
      manifest_text += "\n";
    }
    for (double v : s.features) append_f64_le(blob, v);
  }
  manifest_text += "end\n";

  write_file(manifest_path, manifest_text);
  write_file((manifest.parent_path() / blob_name).string(), blob);
}

Dataset read_dataset(const std::string& manifest_path) {
  ManifestReader r(read_file(manifest_path), manifest_path);
  Dataset ds;

  auto header = r.next_line();
  if (r.word(header) != "gazeattn-dataset") r.fail("not a gazeattn dataset manifest");
  const int version = r.number<int>(header);
  if (version != kDatasetVersion) {
    throw VersionError(manifest_path + ": dataset version " + std::to_string(version) + ", expected " +
                       std::to_string(kDatasetVersion));
  }
  auto line = r.next_line();
  r.expect(line, "blob");
  const std::string blob_name = r.word(line);
  line = r.next_line();
  r.expect(line, "shape");
  ds.shape.t = r.number<std::size_t>(line);
  ds.shape.m = r.number<std::size_t>(line);
  ds.shape.n = r.number<std::size_t>(line);
  if (!ds.shape.valid()) r.fail("grid dimensions must be >= 1");
  line = r.next_line();
  r.expect(line, "channels");
  ds.channels = r.number<std::size_t>(line);
  line = r.next_line();
  r.expect(line, "classes");
  ds.classes = r.number<std::size_t>(line);
  if (ds.channels < 1 || ds.classes < 2) r.fail("need channels >= 1 and classes >= 2");
  line = r.next_line();
  r.expect(line, "samples");
  const auto count = r.number<std::size_t>(line);

  const std::string blob =
      read_file((std::filesystem::path(manifest_path).parent_path() / blob_name).string());
  const std::size_t per_sample = ds.shape.cells() * ds.channels;

  ds.samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    line = r.next_line();
    r.expect(line, "sample");
    if (r.number<std::size_t>(line) != i) r.fail("samples out of order");
    ClipSample s;
    s.shape = ds.shape;
    s.channels = ds.channels;
    r.expect(line, "label");
    s.label = r.number<std::size_t>(line);
    if (s.label >= ds.classes) r.fail("label out of range");
    r.expect(line, "offset");
    const auto offset = r.number<std::size_t>(line);
    r.expect(line, "gaze");
    const auto records = r.number<std::size_t>(line);
    if (offset % 8 != 0 || offset > blob.size() || blob.size() - offset < per_sample * 8) {
      r.fail("descriptor offset outside the blob");
    }
    s.features.resize(per_sample);
    for (std::size_t j = 0; j < per_sample; ++j) s.features[j] = read_f64_le(blob.data() + offset + 8 * j);

    for (std::size_t k = 0; k < records; ++k) {
      auto g = r.next_line();
      r.expect(g, "g");
      GazeRecord rec;
      rec.frame_index = r.number<std::size_t>(g);
      const auto kind = parse_gaze_kind(r.word(g));
      if (!kind) r.fail("unknown gaze kind");
      rec.kind = *kind;
      if (rec.kind == GazeKind::Untracked) {
        r.expect(g, "-");
        r.expect(g, "-");
      } else {
        rec.u = r.number<double>(g);
        rec.v = r.number<double>(g);
        if (!(rec.u >= 0.0 && rec.u <= 1.0 && rec.v >= 0.0 && rec.v <= 1.0)) r.fail("gaze outside [0,1]");
      }
      s.gaze.push_back(rec);
    }
    ds.samples.push_back(std::move(s));
  }
  line = r.next_line();
  r.expect(line, "end");
  return ds;
}

}  // namespace gazeattn
