#include "gazeattn/checkpoint.hpp"

#include <charconv>
#include <json.hpp>

#include "gazeattn/dataset_io.hpp"

namespace gazeattn {

namespace {

class Cursor {
 public:
  Cursor(const std::string& bytes, std::string origin) : bytes_(bytes), origin_(std::move(origin)) {}

  std::string line() {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) fail("truncated header");
    std::string out = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }

  std::string take(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail("truncated section");
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  const char* raw(std::size_t n) {
    if (bytes_.size() - pos_ < n) fail("truncated tensor data");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(origin_ + ": checkpoint " + what);
  }

 private:
  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

// Splits "key a b c" and checks the key.
std::vector<std::string> fields(const std::string& line, const std::string& key, std::size_t count,
                                const Cursor& cur) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto sp = line.find(' ', pos);
    out.push_back(line.substr(pos, sp == std::string::npos ? std::string::npos : sp - pos));
    if (sp == std::string::npos) break;
    pos = sp + 1;
  }
  if (out.empty() || out[0] != key || out.size() != count + 1) cur.fail("malformed '" + key + "' line");
  out.erase(out.begin());
  return out;
}

std::size_t to_size(const std::string& s, const Cursor& cur) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) cur.fail("bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const ModelDims& d = ckpt.params.dims;
  const std::string config = format_config(ckpt.config);
  const std::string metrics = nlohmann::json(ckpt.metrics).dump();

  std::string out = "gazeattn-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  out += "epoch " + std::to_string(ckpt.epoch) + "\n";
  out += "dims " + std::to_string(d.input) + " " + std::to_string(d.hidden) + " " + std::to_string(d.channels) +
         " " + std::to_string(d.classes) + "\n";
  out += "config " + std::to_string(config.size()) + "\n" + config;
  out += "metrics " + std::to_string(metrics.size()) + "\n" + metrics;
  const auto groups = ckpt.params.groups();
  for (std::size_t g = 0; g < kParamGroups; ++g) {
    out += "tensor " + std::string(ModelParams::group_names()[g]) + " " + std::to_string(groups[g]->rows) + " " +
           std::to_string(groups[g]->cols) + "\n";
  }
  out += "data\n";
  for (const Tensor* t : groups) {
    for (double v : t->data) append_f64_le(out, v);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin) {
  Cursor cur(bytes, origin);
  const std::string magic = "gazeattn-checkpoint ";
  const std::string head = cur.line();
  if (head.rfind(magic, 0) != 0) cur.fail("header missing");
  const std::size_t version = to_size(head.substr(magic.size()), cur);
  if (version != static_cast<std::size_t>(kCheckpointVersion)) {
    throw VersionError(origin + ": checkpoint version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }

  Checkpoint ckpt;
  ckpt.epoch = to_size(fields(cur.line(), "epoch", 1, cur)[0], cur);
  const auto dims = fields(cur.line(), "dims", 4, cur);
  const ModelDims d{to_size(dims[0], cur), to_size(dims[1], cur), to_size(dims[2], cur), to_size(dims[3], cur)};
  try {
    validate(d);
  } catch (const InvalidInput& e) {
    cur.fail(e.what());
  }
  const std::size_t config_len = to_size(fields(cur.line(), "config", 1, cur)[0], cur);
  ckpt.config = parse_config(cur.take(config_len));
  const std::size_t metrics_len = to_size(fields(cur.line(), "metrics", 1, cur)[0], cur);
  try {
    ckpt.metrics = nlohmann::json::parse(cur.take(metrics_len)).get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    cur.fail(std::string("metrics: ") + e.what());
  }

  ckpt.params = ModelParams(d);
  auto groups = ckpt.params.groups();
  for (std::size_t g = 0; g < kParamGroups; ++g) {
    const auto f = fields(cur.line(), "tensor", 3, cur);
    if (f[0] != ModelParams::group_names()[g]) cur.fail("unexpected tensor '" + f[0] + "'");
    if (to_size(f[1], cur) != groups[g]->rows || to_size(f[2], cur) != groups[g]->cols) {
      cur.fail("tensor '" + f[0] + "' has inconsistent dimensions");
    }
  }
  if (cur.line() != "data") cur.fail("missing data marker");
  for (Tensor* t : groups) {
    const char* p = cur.raw(t->size() * 8);
    for (std::size_t j = 0; j < t->size(); ++j) t->data[j] = read_f64_le(p + 8 * j);
  }
  if (!cur.at_end()) cur.fail("trailing bytes after tensor data");
  if (ckpt.config.synth.input_dim != d.input || ckpt.config.synth.classes != d.classes ||
      ckpt.config.hidden != d.hidden || ckpt.config.channels != d.channels) {
    cur.fail("dims disagree with the config snapshot");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { write_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path), path); }

}  // namespace gazeattn
