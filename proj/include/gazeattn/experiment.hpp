#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "gazeattn/learning.hpp"
#include "gazeattn/metrics.hpp"
#include "gazeattn/synthetic.hpp"

namespace gazeattn {

enum class Variant {
  UniformPool,         // fixed uniform pooling, no gaze
  CenterPrior,         // fixed Gaussian map fit to training fixations
  GtGazePool,          // pools with the measured-gaze map at train and test time
  GazeMle,             // deterministic gaze map trained with per-cell sigmoid CE
  StochasticWithGaze,  // sampled attention, KL against the gaze prior
  StochasticNoGaze,    // sampled attention, KL against the uniform prior
};

inline constexpr std::array<Variant, 6> kAllVariants = {
    Variant::UniformPool, Variant::CenterPrior,        Variant::GtGazePool,
    Variant::GazeMle,     Variant::StochasticWithGaze, Variant::StochasticNoGaze};

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view text);

struct ExperimentSetup {
  ModelDims dims;
  TrainConfig train;
  PriorConfig prior;
  PrAveraging averaging = PrAveraging::Micro;
};

// Evaluates forward_infer outputs (or fixed-map outputs) against labels and
// aggregated fixation cells.
MetricsReport evaluate(const std::vector<ClipSample>& samples, const std::vector<ModelOutput>& outputs,
                       const PriorConfig& prior, PrAveraging averaging = PrAveraging::Micro);

// Fixed 2D Gaussian (per-axis mean and variance) fit to fixation positions.
GridDist fit_center_prior(const std::vector<ClipSample>& samples, const GridShape& shape);

struct BaselineResult {
  Variant variant = Variant::UniformPool;
  MetricsReport report;
  TrainResult training;
};

// Every variant starts from the same initial parameters (seeded by
// setup.train.seed) and trains with the same budget.
BaselineResult run_baseline(Variant variant, const SynthDataset& ds, const ExperimentSetup& setup);

}  // namespace gazeattn
