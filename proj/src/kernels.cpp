#include "gazeattn/kernels.hpp"

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gazeattn {

namespace {

constexpr std::uint64_t kSampleStream = 0x53414d50ULL;

void accumulate(BatchResult& into, const SampleResult& r) {
  auto dst = into.grad_sum.groups();
  const auto src = r.grads.groups();
  for (std::size_t g = 0; g < kParamGroups; ++g) {
    for (std::size_t j = 0; j < dst[g]->size(); ++j) dst[g]->data[j] += src[g]->data[j];
  }
  into.loss_sum.nll += r.loss.nll;
  into.loss_sum.kl += r.loss.kl;
  into.loss_sum.gaze_ce += r.loss.gaze_ce;
  into.loss_sum.total += r.loss.total;
  into.correct += r.correct ? 1 : 0;
}

ModelOutput infer_one(const ClipSample& sample, const ModelParams& params, const std::vector<GridDist>& fixed,
                      std::size_t i) {
  if (fixed.empty()) return forward_infer(sample, params);
  return forward(sample, params, AttentionSource::Fixed, kDefaultTau, ForwardNoise{}, &fixed[i]);
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

SampleResult sample_gradient(const BatchContext& ctx, const ModelParams& params, std::size_t index,
                             std::size_t epoch) {
  const ClipSample& sample = ctx.samples[index];
  const AttentionSource source = training_attention(ctx.objective);
  Rng rng(derive_seed(ctx.cfg.seed, kSampleStream ^ epoch, index));
  ForwardNoise noise = draw_noise(sample.shape, params.dims.channels, source == AttentionSource::Sampled,
                                  ctx.cfg.dropout, true, rng);
  const GridDist* fixed = source == AttentionSource::Fixed ? &ctx.objective.fixed_attention[index] : nullptr;
  const ModelOutput out = forward(sample, params, source, ctx.cfg.tau, std::move(noise), fixed);
  const LossSpec spec{ctx.objective.mode, ctx.cfg.kl_weight, ctx.cfg.mle_weight};
  const GazeTarget& target = ctx.targets[index];
  return SampleResult{backward(sample, params, out, sample.label, target, spec),
                      loss(out, sample.label, target, spec), out.predicted_class() == sample.label};
}

BatchResult batch_gradient_serial(const BatchContext& ctx, const ModelParams& params,
                                  std::span<const std::size_t> batch, std::size_t epoch) {
  BatchResult result{Grads(params.dims), {}, 0};
  for (std::size_t idx : batch) accumulate(result, sample_gradient(ctx, params, idx, epoch));
  return result;
}

BatchResult batch_gradient_parallel(const BatchContext& ctx, const ModelParams& params,
                                    std::span<const std::size_t> batch, std::size_t epoch) {
  std::vector<SampleResult> per_sample(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
  // Exceptions must not escape the parallel region.
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      per_sample[static_cast<std::size_t>(i)] =
          sample_gradient(ctx, params, batch[static_cast<std::size_t>(i)], epoch);
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  BatchResult result{Grads(params.dims), {}, 0};
  for (const SampleResult& r : per_sample) accumulate(result, r);
  return result;
}

std::vector<ModelOutput> infer_serial(const std::vector<ClipSample>& samples, const ModelParams& params,
                                      const std::vector<GridDist>& fixed) {
  if (!fixed.empty() && fixed.size() != samples.size()) throw InvalidInput("infer: fixed map count mismatch");
  std::vector<ModelOutput> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.push_back(infer_one(samples[i], params, fixed, i));
  return out;
}

std::vector<ModelOutput> infer_parallel(const std::vector<ClipSample>& samples, const ModelParams& params,
                                        const std::vector<GridDist>& fixed) {
  if (!fixed.empty() && fixed.size() != samples.size()) throw InvalidInput("infer: fixed map count mismatch");
  std::vector<ModelOutput> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto k = static_cast<std::size_t>(i);
      out[k] = infer_one(samples[k], params, fixed, k);
    } catch (...) {
#pragma omp critical
      error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace gazeattn
