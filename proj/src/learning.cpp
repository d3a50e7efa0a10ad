#include "gazeattn/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gazeattn/kernels.hpp"

namespace gazeattn {

std::string_view to_string(PriorMode mode) {
  switch (mode) {
    case PriorMode::Gaze: return "gaze";
    case PriorMode::Uniform: return "uniform";
    case PriorMode::Mle: return "mle";
    case PriorMode::None: return "none";
  }
  return "none";
}

std::optional<PriorMode> parse_prior_mode(std::string_view text) {
  if (text == "gaze") return PriorMode::Gaze;
  if (text == "uniform") return PriorMode::Uniform;
  if (text == "mle") return PriorMode::Mle;
  if (text == "none") return PriorMode::None;
  return std::nullopt;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr0 > 0.0)) throw InvalidInput("train: lr0 must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw InvalidInput("train: momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw InvalidInput("train: weight_decay must be nonnegative");
  if (!(cfg.decay_factor > 0.0)) throw InvalidInput("train: decay_factor must be positive");
  if (cfg.decay_epoch > cfg.total_epochs) throw InvalidInput("train: decay_epoch exceeds total_epochs");
  if (!(cfg.tau > 0.0)) throw InvalidInput("train: tau must be positive");
  if (!(cfg.kl_weight >= 0.0) || !(cfg.mle_weight >= 0.0)) throw InvalidInput("train: loss weights must be nonnegative");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw InvalidInput("train: dropout must lie in [0, 1)");
  if (cfg.batch_size < 1) throw InvalidInput("train: batch_size must be >= 1");
  if (cfg.threads < 0) throw InvalidInput("train: threads must be >= 0");
}

GazeTarget make_target(const ClipSample& sample, PriorMode mode, const PriorConfig& prior_cfg) {
  GazeTarget target;
  target.prior = mode == PriorMode::Gaze ? build_prior(sample.gaze, prior_cfg, sample.shape)
                                         : uniform_prior(sample.shape);
  if (mode == PriorMode::Mle) {
    const FrameWindow window{0, sample.shape.t * prior_cfg.window_frames};
    target.fixation_mask.assign(sample.shape.cells(), 0.0);
    for (const GridCell& c : aggregate_fixations(sample.gaze, window, sample.shape)) {
      target.fixation_mask[sample.shape.index(c.slice, c.row, c.col)] = 1.0;
      target.has_fixation = true;
    }
  }
  return target;
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double nll_of(const ModelOutput& output, std::size_t label) {
  if (label >= output.class_probs.size()) {
    throw InvalidInput("loss: label " + std::to_string(label) + " out of range");
  }
  return -std::log(std::max(output.class_probs[label], 1e-300));
}

}  // namespace

LossBreakdown loss(const ModelOutput& output, std::size_t label, const GridDist& prior, double kl_weight) {
  LossBreakdown out;
  out.nll = nll_of(output, label);
  out.kl = kl_divergence(output.gaze_dist, prior);
  out.total = out.nll + kl_weight * out.kl;
  return out;
}

LossBreakdown loss(const ModelOutput& output, std::size_t label, const GazeTarget& target,
                   const LossSpec& spec) {
  LossBreakdown out;
  out.nll = nll_of(output, label);
  switch (spec.mode) {
    case PriorMode::Gaze:
    case PriorMode::Uniform:
      out.kl = kl_divergence(output.gaze_dist, target.prior);
      break;
    case PriorMode::Mle:
      if (target.has_fixation) {
        const auto& s = output.gaze_logits.values;
        double ce = 0.0;
        for (std::size_t p = 0; p < s.size(); ++p) ce += softplus(s[p]) - target.fixation_mask[p] * s[p];
        out.gaze_ce = ce / static_cast<double>(s.size());
      }
      break;
    case PriorMode::None:
      break;
  }
  out.total = out.nll + spec.kl_weight * out.kl + spec.mle_weight * out.gaze_ce;
  return out;
}

Grads backward(const ClipSample& sample, const ModelParams& params, const ModelOutput& output,
               std::size_t label, const GazeTarget& target, const LossSpec& spec) {
  if (!output.trace) throw ContractViolation("backward: forward output carries no trace");
  const ForwardTrace& tr = *output.trace;
  const std::size_t cells = sample.shape.cells();
  const std::size_t d_in = params.dims.input;
  const std::size_t h_dim = params.dims.hidden;
  const std::size_t c_dim = params.dims.channels;
  const std::size_t k_dim = params.dims.classes;
  if (tr.hidden.values.size() != cells * h_dim || tr.features.values.size() != cells * c_dim) {
    throw ContractViolation("backward: trace does not match sample/params");
  }
  if (label >= k_dim) throw InvalidInput("backward: label out of range");

  Grads g(params.dims);

  // Softmax-linear classifier.
  std::vector<double> d_logits = output.class_probs;
  d_logits[label] -= 1.0;
  std::vector<double> d_pooled(c_dim, 0.0);
  for (std::size_t k = 0; k < k_dim; ++k) {
    g.classifier_b.data[k] = d_logits[k];
    for (std::size_t c = 0; c < c_dim; ++c) {
      g.classifier_w(k, c) = d_logits[k] * tr.pooled_dropped[c];
      d_pooled[c] += params.classifier_w(k, c) * d_logits[k];
    }
  }
  if (!tr.noise.dropout_scale.empty()) {
    for (std::size_t c = 0; c < c_dim; ++c) d_pooled[c] *= tr.noise.dropout_scale[c];
  }

  // Attention pooling.
  const std::vector<double>& attn = output.attention.probs;
  std::vector<double> d_attn(cells, 0.0);
  std::vector<double> d_feat(cells * c_dim);
  for (std::size_t p = 0; p < cells; ++p) {
    const auto f = tr.features.cell(p);
    double acc = 0.0;
    for (std::size_t c = 0; c < c_dim; ++c) {
      d_feat[p * c_dim + c] = attn[p] * d_pooled[c];
      acc += f[c] * d_pooled[c];
    }
    d_attn[p] = acc;
  }

  // Gaze scores: through the attention softmax, the KL term and the MLE term.
  std::vector<double> d_score(cells, 0.0);
  if (tr.source != AttentionSource::Fixed) {
    double mean = 0.0;
    for (std::size_t p = 0; p < cells; ++p) mean += attn[p] * d_attn[p];
    const double scale = tr.source == AttentionSource::Sampled ? 1.0 / tr.tau : 1.0;
    for (std::size_t p = 0; p < cells; ++p) d_score[p] = attn[p] * (d_attn[p] - mean) * scale;
  }
  const std::vector<double>& q = output.gaze_dist.probs;
  if ((spec.mode == PriorMode::Gaze || spec.mode == PriorMode::Uniform) && spec.kl_weight != 0.0) {
    if (target.prior.shape != sample.shape) throw InvalidInput("backward: prior shape mismatch");
    const double kl = kl_divergence(output.gaze_dist, target.prior);
    for (std::size_t p = 0; p < cells; ++p) {
      if (q[p] <= 0.0) continue;
      const double log_ratio = std::log(q[p]) - std::log(std::max(target.prior.probs[p], kEpsFloor));
      d_score[p] += spec.kl_weight * q[p] * (log_ratio - kl);
    }
  }
  if (spec.mode == PriorMode::Mle && target.has_fixation && spec.mle_weight != 0.0) {
    const auto& s = output.gaze_logits.values;
    const double w = spec.mle_weight / static_cast<double>(cells);
    double bias = 0.0;
    for (std::size_t p = 0; p < cells; ++p) {
      const double d = w * (sigmoid(s[p]) - target.fixation_mask[p]);
      d_score[p] += d;
      bias += d;
    }
    g.gaze_b.data[0] = bias;
  }

  // Heads into the shared hidden layer.
  std::vector<double> d_hidden(h_dim);
  for (std::size_t p = 0; p < cells; ++p) {
    const auto h = tr.hidden.cell(p);
    const double ds = d_score[p];
    const double* df = d_feat.data() + p * c_dim;
    for (std::size_t j = 0; j < h_dim; ++j) {
      g.gaze_w.data[j] += ds * h[j];
      d_hidden[j] = ds * params.gaze_w.data[j];
    }
    for (std::size_t c = 0; c < c_dim; ++c) {
      g.feature_b.data[c] += df[c];
      const double* wrow = params.feature_w.data.data() + c * h_dim;
      double* grow = g.feature_w.data.data() + c * h_dim;
      for (std::size_t j = 0; j < h_dim; ++j) {
        grow[j] += df[c] * h[j];
        d_hidden[j] += df[c] * wrow[j];
      }
    }
    // Rectifier and encoder.
    const double* z = tr.pre_activation.data() + p * h_dim;
    const double* x = sample.features.data() + p * d_in;
    for (std::size_t j = 0; j < h_dim; ++j) {
      if (z[j] <= 0.0) continue;
      const double du = d_hidden[j];
      g.encoder_b.data[j] += du;
      double* grow = g.encoder_w.data.data() + j * d_in;
      for (std::size_t i = 0; i < d_in; ++i) grow[i] += du * x[i];
    }
  }
  return g;
}

OptimState init_optim_state(const ModelParams& params, const TrainConfig& cfg) {
  OptimState state;
  for (const Tensor* t : params.groups()) state.momentum.emplace_back(t->rows, t->cols);
  state.epoch = 0;
  state.lr = cfg.lr0;
  return state;
}

void sgd_step(ModelParams& params, const Grads& grads, OptimState& state, const TrainConfig& cfg) {
  auto p_groups = params.groups();
  const auto g_groups = grads.groups();
  if (state.momentum.size() != kParamGroups) throw InvalidInput("sgd_step: optimizer state not initialized");
  for (std::size_t i = 0; i < kParamGroups; ++i) {
    Tensor& p = *p_groups[i];
    const Tensor& g = *g_groups[i];
    Tensor& buf = state.momentum[i];
    if (g.size() != p.size() || buf.size() != p.size()) throw InvalidInput("sgd_step: shape mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) {
      buf.data[j] = cfg.momentum * buf.data[j] + (g.data[j] + cfg.weight_decay * p.data[j]);
      p.data[j] -= state.lr * buf.data[j];
    }
  }
}

double lr_at_epoch(std::size_t epoch, const TrainConfig& cfg) {
  return epoch < cfg.decay_epoch ? cfg.lr0 : cfg.lr0 * cfg.decay_factor;
}

AttentionSource training_attention(const Objective& objective) {
  if (!objective.fixed_attention.empty()) return AttentionSource::Fixed;
  switch (objective.mode) {
    case PriorMode::Gaze:
    case PriorMode::Uniform: return AttentionSource::Sampled;
    case PriorMode::Mle:
    case PriorMode::None: return AttentionSource::Expected;
  }
  return AttentionSource::Expected;
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
}

}  // namespace

TrainResult train(const std::vector<ClipSample>& dataset, const ModelParams& initial, const TrainConfig& cfg,
                  const Objective& objective) {
  validate(cfg);
  validate(objective.prior);
  if (dataset.empty()) throw InvalidInput("train: empty dataset");
  if (!objective.fixed_attention.empty() && objective.fixed_attention.size() != dataset.size()) {
    throw InvalidInput("train: need one fixed attention map per sample");
  }
  for (const ClipSample& s : dataset) validate(s, initial.dims);

  std::vector<GazeTarget> targets;
  targets.reserve(dataset.size());
  for (const ClipSample& s : dataset) targets.push_back(make_target(s, objective.mode, objective.prior));

  const BatchContext ctx{dataset, targets, objective, cfg};
  TrainResult result{initial, {}};
  OptimState state = init_optim_state(initial, cfg);
  std::vector<std::size_t> order(dataset.size());

  for (std::size_t epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    state.epoch = epoch;
    state.lr = lr_at_epoch(epoch, cfg);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream, epoch));
    shuffle(order, shuffle_rng);

    EpochLog log{epoch, state.lr, 0.0, 0.0, 0.0, 0.0, 0.0};
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, stop - start);
      BatchResult br;
      try {
        br = cfg.threads == 1 ? batch_gradient_serial(ctx, result.params, batch, epoch)
                              : batch_gradient_parallel(ctx, result.params, batch, epoch);
      } catch (const InvalidInput& e) {
        throw std::runtime_error("train: non-finite values at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (Tensor* t : br.grad_sum.groups()) {
        for (double& v : t->data) v *= inv;
      }
      sgd_step(result.params, br.grad_sum, state, cfg);
      if (!result.params.all_finite()) {
        throw std::runtime_error("train: parameters diverged at epoch " + std::to_string(epoch));
      }
      log.nll += br.loss_sum.nll;
      log.kl += br.loss_sum.kl;
      log.gaze_ce += br.loss_sum.gaze_ce;
      log.total += br.loss_sum.total;
      correct += br.correct;
    }
    const double n = static_cast<double>(dataset.size());
    log.nll /= n;
    log.kl /= n;
    log.gaze_ce /= n;
    log.total /= n;
    log.accuracy = static_cast<double>(correct) / n;
    if (!std::isfinite(log.total) || !result.params.all_finite()) {
      throw std::runtime_error("train: non-finite loss or parameters at epoch " + std::to_string(epoch));
    }
    result.log.push_back(log);
  }
  return result;
}

double GradCheckResult::worst() const {
  return *std::max_element(max_rel_error.begin(), max_rel_error.end());
}

GradCheckResult finite_diff_check(const ClipSample& sample, const ModelParams& params, const GazeTarget& target,
                                  const LossSpec& spec, AttentionSource source, double tau,
                                  const ForwardNoise& noise, double step) {
  const GridDist* fixed = source == AttentionSource::Fixed ? &target.prior : nullptr;
  const ModelOutput out = forward(sample, params, source, tau, noise, fixed);
  const Grads analytic = backward(sample, params, out, sample.label, target, spec);

  ModelParams probe = params;
  auto probe_groups = probe.groups();
  const auto grad_groups = analytic.groups();
  auto total_at = [&]() {
    return loss(forward(sample, probe, source, tau, noise, fixed), sample.label, target, spec).total;
  };

  GradCheckResult result;
  for (std::size_t gi = 0; gi < kParamGroups; ++gi) {
    Tensor& t = *probe_groups[gi];
    double worst = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double saved = t.data[j];
      t.data[j] = saved + step;
      const double up = total_at();
      t.data[j] = saved - step;
      const double down = total_at();
      t.data[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grad_groups[gi]->data[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    result.max_rel_error[gi] = worst;
  }
  return result;
}

}  // namespace gazeattn
