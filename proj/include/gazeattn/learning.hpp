#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "gazeattn/gaze_prior.hpp"
#include "gazeattn/grid_dist.hpp"
#include "gazeattn/model.hpp"

namespace gazeattn {

// How the gaze head is supervised.
enum class PriorMode {
  Gaze,     // KL[q || p(g|x)] against the measured-gaze prior, sampled attention
  Uniform,  // KL[q || uniform], sampled attention
  Mle,      // per-cell sigmoid cross entropy on fixation cells, attention = q
  None,     // classification loss only
};

std::string_view to_string(PriorMode mode);
std::optional<PriorMode> parse_prior_mode(std::string_view text);

struct TrainConfig {
  double lr0 = 0.032;
  double momentum = 0.9;
  double weight_decay = 4e-5;
  std::size_t decay_epoch = 40;
  double decay_factor = 0.1;
  std::size_t total_epochs = 80;
  double tau = kDefaultTau;
  double kl_weight = 1.0;
  double mle_weight = 1.0;
  double dropout = 0.7;
  std::size_t batch_size = 40;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: OpenMP default; 1: serial reference path

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void validate(const TrainConfig& cfg);

// Gaze supervision for one sample.
struct GazeTarget {
  GridDist prior;                     // floored p(g|x)
  std::vector<double> fixation_mask;  // 1 on aggregated fixation cells
  bool has_fixation = false;
};

GazeTarget make_target(const ClipSample& sample, PriorMode mode, const PriorConfig& prior_cfg);

struct LossSpec {
  PriorMode mode = PriorMode::Gaze;
  double kl_weight = 1.0;
  double mle_weight = 1.0;
};

struct LossBreakdown {
  double nll = 0.0;
  double kl = 0.0;       // KL[q || p]; zero unless the mode is Gaze or Uniform
  double gaze_ce = 0.0;  // mean per-cell sigmoid cross entropy (Mle only)
  double total = 0.0;
};

// Two-term variational loss: -log p(y | attention, x) + kl_weight * KL[q || prior].
LossBreakdown loss(const ModelOutput& output, std::size_t label, const GridDist& prior, double kl_weight);

LossBreakdown loss(const ModelOutput& output, std::size_t label, const GazeTarget& target,
                   const LossSpec& spec);

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Grads = ModelParams;

// Exact gradient of loss(...).total with respect to every parameter tensor.
// The recorded Gumbel noise and dropout mask are treated as constants.
Grads backward(const ClipSample& sample, const ModelParams& params, const ModelOutput& output,
               std::size_t label, const GazeTarget& target, const LossSpec& spec);

struct OptimState {
  std::vector<Tensor> momentum;
  std::size_t epoch = 0;
  double lr = 0.0;
};

OptimState init_optim_state(const ModelParams& params, const TrainConfig& cfg);

// buf <- momentum * buf + (grad + wd * param); param <- param - lr * buf.
void sgd_step(ModelParams& params, const Grads& grads, OptimState& state, const TrainConfig& cfg);

double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double nll = 0.0;
  double kl = 0.0;
  double gaze_ce = 0.0;
  double total = 0.0;
  double accuracy = 0.0;
};

// What one training run optimizes. fixed_attention, when nonempty, holds one
// pooling map per sample and forces AttentionSource::Fixed.
struct Objective {
  PriorMode mode = PriorMode::Gaze;
  PriorConfig prior;
  std::vector<GridDist> fixed_attention;
};

AttentionSource training_attention(const Objective& objective);

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

TrainResult train(const std::vector<ClipSample>& dataset, const ModelParams& initial, const TrainConfig& cfg,
                  const Objective& objective);

// Worst relative error |a - n| / max(|a|, |n|, 1e-8) per parameter group.
struct GradCheckResult {
  std::array<double, kParamGroups> max_rel_error{};
  double worst() const;
};

GradCheckResult finite_diff_check(const ClipSample& sample, const ModelParams& params, const GazeTarget& target,
                                  const LossSpec& spec, AttentionSource source, double tau,
                                  const ForwardNoise& noise, double step = 1e-5);

}  // namespace gazeattn
