#include "gazeattn/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace gazeattn {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_uint(std::uint64_t v) { return std::to_string(v); }

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError("config: " + key + " expects a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ValidationError("config: " + key + " expects a nonnegative integer, got '" + text + "'");
  }
  return v;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Member>
Field real(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); },
          [member](const ExperimentConfig& c) { return fmt_double(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Member>
Field integer(std::string section, std::string key, Member member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(parse_uint(k, v));
          },
          [member](const ExperimentConfig& c) {
            return fmt_uint(static_cast<std::uint64_t>(member(const_cast<ExperimentConfig&>(c))));
          }};
}

Field text(std::string section, std::string key, std::string ExperimentConfig::*member) {
  return {std::move(section), std::move(key),
          [member](ExperimentConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const ExperimentConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(integer("experiment", "seed", [](C& c) -> std::uint64_t& { return c.seed; }));

    f.push_back(integer("model", "hidden", [](C& c) -> std::size_t& { return c.hidden; }));
    f.push_back(integer("model", "channels", [](C& c) -> std::size_t& { return c.channels; }));

    f.push_back(real("train", "lr0", [](C& c) -> double& { return c.train.lr0; }));
    f.push_back(real("train", "momentum", [](C& c) -> double& { return c.train.momentum; }));
    f.push_back(real("train", "weight_decay", [](C& c) -> double& { return c.train.weight_decay; }));
    f.push_back(integer("train", "decay_epoch", [](C& c) -> std::size_t& { return c.train.decay_epoch; }));
    f.push_back(real("train", "decay_factor", [](C& c) -> double& { return c.train.decay_factor; }));
    f.push_back(integer("train", "total_epochs", [](C& c) -> std::size_t& { return c.train.total_epochs; }));
    f.push_back(real("train", "tau", [](C& c) -> double& { return c.train.tau; }));
    f.push_back(real("train", "kl_weight", [](C& c) -> double& { return c.train.kl_weight; }));
    f.push_back(real("train", "mle_weight", [](C& c) -> double& { return c.train.mle_weight; }));
    f.push_back(real("train", "dropout", [](C& c) -> double& { return c.train.dropout; }));
    f.push_back(integer("train", "batch_size", [](C& c) -> std::size_t& { return c.train.batch_size; }));
    f.push_back(integer("train", "threads", [](C& c) -> int& { return c.train.threads; }));

    f.push_back({"prior", "mode",
                 [](C& c, const std::string& k, const std::string& v) {
                   const auto mode = parse_prior_mode(v);
                   if (!mode) throw ValidationError("config: " + k + " must be gaze, uniform, mle or none");
                   c.prior_mode = *mode;
                 },
                 [](const C& c) { return std::string(to_string(c.prior_mode)); }});
    f.push_back(real("prior", "sigma_cells", [](C& c) -> double& { return c.prior.sigma_cells; }));
    f.push_back(real("prior", "eps_floor", [](C& c) -> double& { return c.prior.eps_floor; }));
    f.push_back(integer("prior", "window_frames", [](C& c) -> std::size_t& { return c.prior.window_frames; }));

    f.push_back(integer("synth", "t", [](C& c) -> std::size_t& { return c.synth.shape.t; }));
    f.push_back(integer("synth", "m", [](C& c) -> std::size_t& { return c.synth.shape.m; }));
    f.push_back(integer("synth", "n", [](C& c) -> std::size_t& { return c.synth.shape.n; }));
    f.push_back(integer("synth", "input_dim", [](C& c) -> std::size_t& { return c.synth.input_dim; }));
    f.push_back(integer("synth", "classes", [](C& c) -> std::size_t& { return c.synth.classes; }));
    f.push_back(real("synth", "signal_strength", [](C& c) -> double& { return c.synth.signal_strength; }));
    f.push_back(real("synth", "noise_std", [](C& c) -> double& { return c.synth.noise_std; }));
    f.push_back(real("synth", "gaze_jitter_std", [](C& c) -> double& { return c.synth.gaze_jitter_std; }));
    f.push_back(real("synth", "kind_fixation", [](C& c) -> double& { return c.synth.kind_mix[0]; }));
    f.push_back(real("synth", "kind_saccade", [](C& c) -> double& { return c.synth.kind_mix[1]; }));
    f.push_back(real("synth", "kind_unknown", [](C& c) -> double& { return c.synth.kind_mix[2]; }));
    f.push_back(real("synth", "kind_untracked", [](C& c) -> double& { return c.synth.kind_mix[3]; }));
    f.push_back(integer("synth", "frames_per_slice", [](C& c) -> std::size_t& { return c.synth.frames_per_slice; }));
    f.push_back(integer("synth", "n_train", [](C& c) -> std::size_t& { return c.synth.n_train; }));
    f.push_back(integer("synth", "n_test", [](C& c) -> std::size_t& { return c.synth.n_test; }));

    f.push_back(text("data", "train", &C::train_path));
    f.push_back(text("data", "test", &C::test_path));

    f.push_back({"eval", "averaging",
                 [](C& c, const std::string& k, const std::string& v) {
                   if (v == "micro") {
                     c.averaging = PrAveraging::Micro;
                   } else if (v == "macro") {
                     c.averaging = PrAveraging::Macro;
                   } else {
                     throw ValidationError("config: " + k + " must be micro or macro");
                   }
                 },
                 [](const C& c) { return std::string(c.averaging == PrAveraging::Micro ? "micro" : "macro"); }});

    f.push_back(integer("baselines", "seeds", [](C& c) -> std::size_t& { return c.baseline_seeds; }));

    f.push_back(integer("gradcheck", "configs", [](C& c) -> std::size_t& { return c.gradcheck.configs; }));
    f.push_back(real("gradcheck", "step", [](C& c) -> double& { return c.gradcheck.step; }));
    f.push_back(real("gradcheck", "tolerance", [](C& c) -> double& { return c.gradcheck.tolerance; }));

    f.push_back(integer("bench", "repeats", [](C& c) -> std::size_t& { return c.bench.repeats; }));
    return f;
  }();
  return table;
}

}  // namespace

void set_seed(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.train.seed = seed;
  cfg.synth.seed = seed;
}

void validate(const ExperimentConfig& cfg) {
  try {
    validate(model_dims(cfg));
    validate(cfg.train);
    validate(cfg.prior);
    validate(cfg.synth);
  } catch (const InvalidInput& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (cfg.train.seed != cfg.seed || cfg.synth.seed != cfg.seed) {
    throw ValidationError("config: seeds out of sync; use set_seed");
  }
  if (cfg.baseline_seeds < 1) throw ValidationError("config: baselines.seeds must be >= 1");
  if (cfg.gradcheck.configs < 1 || !(cfg.gradcheck.step > 0.0) || !(cfg.gradcheck.tolerance > 0.0)) {
    throw ValidationError("config: gradcheck settings must be positive");
  }
  if (cfg.bench.repeats < 1) throw ValidationError("config: bench.repeats must be >= 1");
}

ExperimentConfig parse_config(const std::string& contents) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(contents);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  ExperimentConfig cfg;
  const auto& table = fields();
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ValidationError("config: key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == table.end()) throw ValidationError("config: unknown key '" + full + "'");
      it->set(cfg, full, value.get_value<std::string>());
    }
  }
  set_seed(cfg, cfg.seed);
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string format_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string current;
  for (const Field& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

ModelDims model_dims(const ExperimentConfig& cfg) {
  return ModelDims{cfg.synth.input_dim, cfg.hidden, cfg.channels, cfg.synth.classes};
}

ExperimentSetup experiment_setup(const ExperimentConfig& cfg) {
  return ExperimentSetup{model_dims(cfg), cfg.train, cfg.prior, cfg.averaging};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return buf.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace gazeattn
