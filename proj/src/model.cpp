#include "gazeattn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gazeattn {

void validate(const ModelDims& dims) {
  if (dims.input < 1 || dims.hidden < 1 || dims.channels < 1 || dims.classes < 2) {
    throw InvalidInput("model dims: D, H, C must be >= 1 and K >= 2");
  }
}

ModelParams::ModelParams(const ModelDims& d)
    : dims(d),
      encoder_w(d.hidden, d.input),
      encoder_b(d.hidden, 1),
      gaze_w(1, d.hidden),
      gaze_b(1, 1),
      feature_w(d.channels, d.hidden),
      feature_b(d.channels, 1),
      classifier_w(d.classes, d.channels),
      classifier_b(d.classes, 1) {}

std::array<Tensor*, kParamGroups> ModelParams::groups() {
  return {&encoder_w, &encoder_b, &gaze_w, &gaze_b, &feature_w, &feature_b, &classifier_w, &classifier_b};
}

std::array<const Tensor*, kParamGroups> ModelParams::groups() const {
  return {&encoder_w, &encoder_b, &gaze_w, &gaze_b, &feature_w, &feature_b, &classifier_w, &classifier_b};
}

const std::array<std::string_view, kParamGroups>& ModelParams::group_names() {
  static const std::array<std::string_view, kParamGroups> names = {
      "encoder.weight", "encoder.bias", "gaze_head.weight",  "gaze_head.bias",
      "feature_head.weight", "feature_head.bias", "classifier.weight", "classifier.bias"};
  return names;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor* t : groups()) total += t->size();
  return total;
}

bool ModelParams::all_finite() const {
  for (const Tensor* t : groups()) {
    for (double v : t->data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

namespace {

void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace

ModelParams init_params(const ModelDims& dims, Rng& rng) {
  validate(dims);
  ModelParams p(dims);
  fill_uniform(p.encoder_w, 1.0 / std::sqrt(static_cast<double>(dims.input)), rng);
  fill_uniform(p.feature_w, 1.0 / std::sqrt(static_cast<double>(dims.hidden)), rng);
  fill_uniform(p.classifier_w, 1.0 / std::sqrt(static_cast<double>(dims.channels)), rng);
  return p;
}

ModelParams random_params(const ModelDims& dims, Rng& rng, double scale) {
  validate(dims);
  ModelParams p(dims);
  for (Tensor* t : p.groups()) fill_uniform(*t, scale, rng);
  return p;
}

void validate(const ClipSample& sample, const ModelDims& dims) {
  if (!sample.shape.valid()) throw InvalidInput("sample: invalid grid shape");
  if (sample.channels != dims.input) {
    throw InvalidInput("sample: descriptor width " + std::to_string(sample.channels) +
                       " does not match model input " + std::to_string(dims.input));
  }
  if (sample.features.size() != sample.shape.cells() * sample.channels) {
    throw InvalidInput("sample: feature buffer size does not match shape");
  }
  if (sample.label >= dims.classes) throw InvalidInput("sample: label out of range");
  for (double v : sample.features) {
    if (!std::isfinite(v)) throw InvalidInput("sample: non-finite feature value");
  }
}

std::size_t ModelOutput::predicted_class() const {
  return static_cast<std::size_t>(std::max_element(class_probs.begin(), class_probs.end()) -
                                  class_probs.begin());
}

namespace {

void encode_into(const ClipSample& sample, const ModelParams& params, std::vector<double>& pre,
                 HiddenGrid& hidden) {
  const std::size_t cells = sample.shape.cells();
  const std::size_t d_in = params.dims.input;
  const std::size_t h_dim = params.dims.hidden;
  if (sample.channels != d_in || sample.features.size() != cells * d_in) {
    throw InvalidInput("encode: descriptor width does not match encoder input");
  }
  pre.assign(cells * h_dim, 0.0);
  hidden.shape = sample.shape;
  hidden.width = h_dim;
  hidden.values.assign(cells * h_dim, 0.0);
  const double* w = params.encoder_w.data.data();
  const double* b = params.encoder_b.data.data();
  for (std::size_t p = 0; p < cells; ++p) {
    const double* x = sample.features.data() + p * d_in;
    double* z = pre.data() + p * h_dim;
    double* h = hidden.values.data() + p * h_dim;
    for (std::size_t j = 0; j < h_dim; ++j) {
      const double* row = w + j * d_in;
      double acc = b[j];
      for (std::size_t i = 0; i < d_in; ++i) acc += row[i] * x[i];
      z[j] = acc;
      h[j] = acc > 0.0 ? acc : 0.0;
    }
  }
}

// Gaze scores without the head bias. The bias shifts every cell equally, so
// it cancels in the softmax; dropping it there keeps q exactly independent
// of it.
std::vector<double> centered_scores(const HiddenGrid& hidden, const ModelParams& params) {
  const std::size_t cells = hidden.shape.cells();
  std::vector<double> scores(cells);
  const double* w = params.gaze_w.data.data();
  for (std::size_t p = 0; p < cells; ++p) {
    const auto h = hidden.cell(p);
    double acc = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j) acc += w[j] * h[j];
    scores[p] = acc;
  }
  return scores;
}

}  // namespace

HiddenGrid encode(const ClipSample& sample, const ModelParams& params) {
  std::vector<double> pre;
  HiddenGrid hidden;
  encode_into(sample, params, pre, hidden);
  return hidden;
}

std::pair<LogitGrid, GridDist> gaze_forward(const HiddenGrid& hidden, const ModelParams& params) {
  if (hidden.width != params.dims.hidden) throw InvalidInput("gaze_forward: hidden width mismatch");
  std::vector<double> scores = centered_scores(hidden, params);
  std::vector<double> logits = scores;
  for (double& v : logits) v += params.gaze_b.data[0];
  softmax_inplace(scores);
  return {LogitGrid(hidden.shape, std::move(logits)), GridDist(hidden.shape, std::move(scores))};
}

FeatureGrid feature_forward(const HiddenGrid& hidden, const ModelParams& params) {
  if (hidden.width != params.dims.hidden) throw InvalidInput("feature_forward: hidden width mismatch");
  const std::size_t cells = hidden.shape.cells();
  const std::size_t h_dim = params.dims.hidden;
  const std::size_t c_dim = params.dims.channels;
  FeatureGrid out{hidden.shape, c_dim, std::vector<double>(cells * c_dim)};
  const double* w = params.feature_w.data.data();
  const double* b = params.feature_b.data.data();
  for (std::size_t p = 0; p < cells; ++p) {
    const double* h = hidden.values.data() + p * h_dim;
    double* f = out.values.data() + p * c_dim;
    for (std::size_t c = 0; c < c_dim; ++c) {
      const double* row = w + c * h_dim;
      double acc = b[c];
      for (std::size_t j = 0; j < h_dim; ++j) acc += row[j] * h[j];
      f[c] = acc;
    }
  }
  return out;
}

std::vector<double> attention_pool(const FeatureGrid& features, const GridDist& attention) {
  if (features.shape != attention.shape) {
    throw InvalidInput("attention_pool: shape mismatch " + to_string(features.shape) + " vs " +
                       to_string(attention.shape));
  }
  std::vector<double> pooled(features.width, 0.0);
  for (std::size_t p = 0; p < attention.probs.size(); ++p) {
    const double a = attention.probs[p];
    const auto f = features.cell(p);
    for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += a * f[c];
  }
  return pooled;
}

std::vector<double> classify(std::span<const double> pooled, const ModelParams& params) {
  const std::size_t c_dim = params.dims.channels;
  if (pooled.size() != c_dim) throw InvalidInput("classify: pooled width mismatch");
  std::vector<double> logits(params.dims.classes);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    double acc = params.classifier_b.data[k];
    for (std::size_t c = 0; c < c_dim; ++c) acc += params.classifier_w(k, c) * pooled[c];
    logits[k] = acc;
  }
  softmax_inplace(logits);
  return logits;
}

ForwardNoise draw_noise(const GridShape& shape, std::size_t channels, bool sample_gumbel,
                        double dropout_rate, bool dropout_on, Rng& rng) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidInput("dropout rate must lie in [0, 1)");
  ForwardNoise noise;
  if (sample_gumbel) noise.gumbel = draw_gumbel(shape.cells(), rng);
  if (dropout_on && dropout_rate > 0.0) {
    const double keep_scale = 1.0 / (1.0 - dropout_rate);
    noise.dropout_scale.resize(channels);
    for (double& s : noise.dropout_scale) s = rng.uniform() < dropout_rate ? 0.0 : keep_scale;
  }
  return noise;
}

ModelOutput forward(const ClipSample& sample, const ModelParams& params, AttentionSource source,
                    double tau, ForwardNoise noise, const GridDist* fixed) {
  ForwardTrace trace;
  trace.source = source;
  trace.tau = tau;
  encode_into(sample, params, trace.pre_activation, trace.hidden);
  const LogitGrid centered(sample.shape, centered_scores(trace.hidden, params));
  LogitGrid logits = centered;
  for (double& v : logits.values) v += params.gaze_b.data[0];
  GridDist q = normalize(centered);
  trace.features = feature_forward(trace.hidden, params);

  GridDist attention;
  switch (source) {
    case AttentionSource::Sampled: {
      if (noise.gumbel.size() != sample.shape.cells()) {
        throw InvalidInput("forward: sampled attention requires one Gumbel value per cell");
      }
      attention = gumbel_softmax(centered, noise.gumbel, tau);
      break;
    }
    case AttentionSource::Expected:
      attention = q;
      break;
    case AttentionSource::Fixed:
      if (fixed == nullptr) throw InvalidInput("forward: fixed attention map missing");
      if (fixed->shape != sample.shape) throw InvalidInput("forward: fixed attention shape mismatch");
      attention = *fixed;
      break;
  }

  std::vector<double> pooled = attention_pool(trace.features, attention);
  trace.pooled_dropped = pooled;
  if (!noise.dropout_scale.empty()) {
    if (noise.dropout_scale.size() != pooled.size()) throw InvalidInput("forward: dropout mask size mismatch");
    for (std::size_t c = 0; c < pooled.size(); ++c) trace.pooled_dropped[c] *= noise.dropout_scale[c];
  }
  std::vector<double> probs = classify(trace.pooled_dropped, params);
  trace.noise = std::move(noise);

  return ModelOutput{std::move(logits), std::move(q),     std::move(attention),
                     std::move(pooled), std::move(probs), std::move(trace)};
}

ModelOutput forward_train(const ClipSample& sample, const ModelParams& params, double tau, Rng& rng,
                          double dropout_rate, bool dropout_on) {
  if (!(tau > 0.0)) throw InvalidInput("forward_train: tau must be positive");
  ForwardNoise noise = draw_noise(sample.shape, params.dims.channels, true, dropout_rate, dropout_on, rng);
  return forward(sample, params, AttentionSource::Sampled, tau, std::move(noise));
}

ModelOutput forward_infer(const ClipSample& sample, const ModelParams& params) {
  return forward(sample, params, AttentionSource::Expected, kDefaultTau, ForwardNoise{});
}

}  // namespace gazeattn
