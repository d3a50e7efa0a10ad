#include "gazeattn/experiment.hpp"

#include <cmath>

#include "gazeattn/kernels.hpp"

namespace gazeattn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::UniformPool: return "uniform_pool";
    case Variant::CenterPrior: return "center_prior";
    case Variant::GtGazePool: return "gt_gaze_pool";
    case Variant::GazeMle: return "gaze_mle";
    case Variant::StochasticWithGaze: return "stochastic_with_gaze";
    case Variant::StochasticNoGaze: return "stochastic_no_gaze";
  }
  return "uniform_pool";
}

std::optional<Variant> parse_variant(std::string_view text) {
  for (Variant v : kAllVariants) {
    if (to_string(v) == text) return v;
  }
  return std::nullopt;
}

MetricsReport evaluate(const std::vector<ClipSample>& samples, const std::vector<ModelOutput>& outputs,
                       const PriorConfig& prior, PrAveraging averaging) {
  if (samples.size() != outputs.size()) throw InvalidInput("evaluate: sample/output count mismatch");
  MetricsReport report;
  std::vector<GazeEvalItem> items;
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> scores;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ClipSample& s = samples[i];
    const FrameWindow window{0, s.shape.t * prior.window_frames};
    GazeEvalItem item{outputs[i].attention, aggregate_fixations(s.gaze, window, s.shape), false};
    item.valid = !item.positives.empty();
    items.push_back(std::move(item));
    predictions.push_back(outputs[i].predicted_class());
    labels.push_back(s.label);
    scores.push_back(outputs[i].class_probs);
  }
  std::size_t valid = 0;
  for (const auto& item : items) valid += item.valid ? 1 : 0;
  report.gaze_items = valid;
  if (valid > 0) report.gaze_best = best_f1(gaze_pr_sweep(items, averaging));

  if (!samples.empty()) {
    const std::size_t classes = outputs.front().class_probs.size();
    const ClassAccuracy mca = mean_class_accuracy(predictions, labels, classes);
    report.mean_class_accuracy = mca.mean;
    report.per_class = mca.per_class;
    report.accuracy = topk_accuracy(scores, labels, 1);
    report.topk[1] = report.accuracy;
    if (classes >= 5) report.topk[5] = topk_accuracy(scores, labels, 5);
  }
  return report;
}

GridDist fit_center_prior(const std::vector<ClipSample>& samples, const GridShape& shape) {
  double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (const ClipSample& s : samples) {
    for (const GazeRecord& r : s.gaze) {
      if (r.kind != GazeKind::Fixation) continue;
      const double x = r.u * static_cast<double>(shape.n);
      const double y = r.v * static_cast<double>(shape.m);
      n += 1.0;
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
    }
  }
  if (n < 2.0) return uniform_dist(shape);
  const double mx = sx / n, my = sy / n;
  // Floor the variance at a quarter cell so a degenerate fit stays a proper map.
  const double vx = std::max(sxx / n - mx * mx, 0.25);
  const double vy = std::max(syy / n - my * my, 0.25);
  std::vector<double> probs(shape.cells());
  double total = 0.0;
  for (std::size_t t = 0; t < shape.t; ++t) {
    for (std::size_t r = 0; r < shape.m; ++r) {
      for (std::size_t c = 0; c < shape.n; ++c) {
        const double dx = static_cast<double>(c) + 0.5 - mx;
        const double dy = static_cast<double>(r) + 0.5 - my;
        const double v = std::exp(-0.5 * (dx * dx / vx + dy * dy / vy));
        probs[shape.index(t, r, c)] = v;
        total += v;
      }
    }
  }
  for (double& v : probs) v /= total;
  return floor_dist(GridDist(shape, std::move(probs)));
}

namespace {

constexpr std::uint64_t kInitStream = 0x494e4954ULL;

std::vector<GridDist> gaze_maps(const std::vector<ClipSample>& samples, const PriorConfig& prior) {
  std::vector<GridDist> maps;
  maps.reserve(samples.size());
  for (const ClipSample& s : samples) maps.push_back(build_prior(s.gaze, prior, s.shape));
  return maps;
}

}  // namespace

BaselineResult run_baseline(Variant variant, const SynthDataset& ds, const ExperimentSetup& setup) {
  ModelDims dims = setup.dims;
  if (dims.input != ds.config.input_dim || dims.classes != ds.config.classes) {
    throw InvalidInput("run_baseline: model dims do not match the dataset");
  }
  Rng init_rng(derive_seed(setup.train.seed, kInitStream));
  const ModelParams initial = init_params(dims, init_rng);

  Objective objective;
  objective.prior = setup.prior;
  std::vector<GridDist> test_fixed;
  switch (variant) {
    case Variant::UniformPool:
      objective.mode = PriorMode::None;
      objective.fixed_attention.assign(ds.train.size(), uniform_dist(ds.config.shape));
      test_fixed.assign(ds.test.size(), uniform_dist(ds.config.shape));
      break;
    case Variant::CenterPrior: {
      const GridDist center = fit_center_prior(ds.train, ds.config.shape);
      objective.mode = PriorMode::None;
      objective.fixed_attention.assign(ds.train.size(), center);
      test_fixed.assign(ds.test.size(), center);
      break;
    }
    case Variant::GtGazePool:
      objective.mode = PriorMode::None;
      objective.fixed_attention = gaze_maps(ds.train, setup.prior);
      test_fixed = gaze_maps(ds.test, setup.prior);
      break;
    case Variant::GazeMle:
      objective.mode = PriorMode::Mle;
      break;
    case Variant::StochasticWithGaze:
      objective.mode = PriorMode::Gaze;
      break;
    case Variant::StochasticNoGaze:
      objective.mode = PriorMode::Uniform;
      break;
  }

  BaselineResult result;
  result.variant = variant;
  result.training = train(ds.train, initial, setup.train, objective);
  const auto outputs = setup.train.threads == 1 ? infer_serial(ds.test, result.training.params, test_fixed)
                                                : infer_parallel(ds.test, result.training.params, test_fixed);
  result.report = evaluate(ds.test, outputs, setup.prior, setup.averaging);
  return result;
}

}  // namespace gazeattn
