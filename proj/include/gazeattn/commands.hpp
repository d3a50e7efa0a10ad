#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "gazeattn/config.hpp"
#include "gazeattn/learning.hpp"

namespace gazeattn {

struct CommandOptions {
  std::string config;
  std::optional<std::uint64_t> seed;  // overrides [experiment] seed
  std::string out;
  std::string checkpoint;
  std::string data;
  bool quiet = false;
};

// Each command returns an ExitCode and never throws. Human-readable output
// goes to `out`, diagnostics to `err`.
int cmd_train(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_gradcheck(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_synth(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_baselines(const CommandOptions& opt, std::ostream& out, std::ostream& err);
int cmd_bench(const CommandOptions& opt, std::ostream& out, std::ostream& err);

struct GradCheckSummary {
  std::size_t configs = 0;
  GradCheckResult worst;  // element-wise max over configurations
  std::size_t configs_per_mode[4] = {0, 0, 0, 0};
};

// Randomized small problems (D=3, H=4, C=3, K=3 on 3x3 grids) cycling
// through the gaze, uniform and MLE objectives with sampled attention and
// dropout.
GradCheckSummary gradcheck_suite(const GradCheckConfig& cfg, std::uint64_t seed);

}  // namespace gazeattn
