#pragma once

// Data-parallel kernels over the samples of a batch or dataset. Each kernel
// has a serial reference and an OpenMP version; both derive per-sample
// random streams from (seed, epoch, sample index) and reduce in sample order,
// so their results are bit-identical for any thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "gazeattn/learning.hpp"
#include "gazeattn/model.hpp"

namespace gazeattn {

struct BatchContext {
  const std::vector<ClipSample>& samples;
  const std::vector<GazeTarget>& targets;
  const Objective& objective;
  const TrainConfig& cfg;
};

struct BatchResult {
  Grads grad_sum;
  LossBreakdown loss_sum;
  std::size_t correct = 0;
};

struct SampleResult {
  Grads grads;
  LossBreakdown loss;
  bool correct = false;
};

// Forward (with fresh noise for this epoch) and backward for one sample.
SampleResult sample_gradient(const BatchContext& ctx, const ModelParams& params, std::size_t index,
                             std::size_t epoch);

BatchResult batch_gradient_serial(const BatchContext& ctx, const ModelParams& params,
                                  std::span<const std::size_t> batch, std::size_t epoch);
BatchResult batch_gradient_parallel(const BatchContext& ctx, const ModelParams& params,
                                    std::span<const std::size_t> batch, std::size_t epoch);

// Deterministic inference over a dataset. fixed, when nonempty, supplies
// one pooling map per sample.
std::vector<ModelOutput> infer_serial(const std::vector<ClipSample>& samples, const ModelParams& params,
                                      const std::vector<GridDist>& fixed = {});
std::vector<ModelOutput> infer_parallel(const std::vector<ClipSample>& samples, const ModelParams& params,
                                        const std::vector<GridDist>& fixed = {});

int max_threads();

}  // namespace gazeattn
