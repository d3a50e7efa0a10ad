#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gazeattn/gaze_prior.hpp"
#include "gazeattn/grid_dist.hpp"
#include "gazeattn/rng.hpp"

namespace gazeattn {

// Dense row-major matrix; vectors are rows x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::size_t size() const { return data.size(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct ModelDims {
  std::size_t input = 8;      // D, raw descriptor channels
  std::size_t hidden = 32;    // H
  std::size_t channels = 16;  // C, pooled feature channels
  std::size_t classes = 10;   // K

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

void validate(const ModelDims& dims);

inline constexpr std::size_t kParamGroups = 8;

// Shared encoder, gaze head, feature head and softmax-linear classifier.
struct ModelParams {
  ModelDims dims;
  Tensor encoder_w;     // H x D
  Tensor encoder_b;     // H x 1
  Tensor gaze_w;        // 1 x H
  Tensor gaze_b;        // 1 x 1
  Tensor feature_w;     // C x H
  Tensor feature_b;     // C x 1
  Tensor classifier_w;  // K x C
  Tensor classifier_b;  // K x 1

  ModelParams() = default;
  explicit ModelParams(const ModelDims& d);  // all zeros

  std::array<Tensor*, kParamGroups> groups();
  std::array<const Tensor*, kParamGroups> groups() const;
  static const std::array<std::string_view, kParamGroups>& group_names();

  std::size_t parameter_count() const;
  bool all_finite() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Symmetric-uniform fan-in init for affine layers, zero biases, zero gaze head.
ModelParams init_params(const ModelDims& dims, Rng& rng);

// Every tensor (gaze head included) drawn uniformly from [-scale, scale].
ModelParams random_params(const ModelDims& dims, Rng& rng, double scale = 0.5);

// One clip window: per-cell descriptors, gaze measurements and action label.
struct ClipSample {
  GridShape shape;
  std::size_t channels = 0;       // D
  std::vector<double> features;   // cells x D, row-major
  std::vector<GazeRecord> gaze;
  std::size_t label = 0;

  std::span<const double> cell(std::size_t i) const {
    return {features.data() + i * channels, channels};
  }

  friend bool operator==(const ClipSample&, const ClipSample&) = default;
};

void validate(const ClipSample& sample, const ModelDims& dims);

// Per-cell vectors over a grid (hidden activations or pooled features).
struct CellGrid {
  GridShape shape;
  std::size_t width = 0;
  std::vector<double> values;  // cells x width

  std::span<const double> cell(std::size_t i) const { return {values.data() + i * width, width}; }
  std::span<double> cell(std::size_t i) { return {values.data() + i * width, width}; }
};

using HiddenGrid = CellGrid;
using FeatureGrid = CellGrid;

enum class AttentionSource {
  Sampled,   // Gumbel-Softmax sample from the gaze logits
  Expected,  // the predicted distribution q itself
  Fixed,     // an externally supplied map (baselines)
};

// Random draws consumed by one training forward pass. An empty vector means
// the corresponding perturbation is off.
struct ForwardNoise {
  std::vector<double> gumbel;         // one value per cell
  std::vector<double> dropout_scale;  // one value per channel: 0 or 1/(1-rate)
};

ForwardNoise draw_noise(const GridShape& shape, std::size_t channels, bool sample_gumbel,
                        double dropout_rate, bool dropout_on, Rng& rng);

// Activations retained for the backward pass.
struct ForwardTrace {
  AttentionSource source = AttentionSource::Expected;
  double tau = kDefaultTau;
  ForwardNoise noise;
  std::vector<double> pre_activation;  // cells x H
  HiddenGrid hidden;
  FeatureGrid features;
  std::vector<double> pooled_dropped;  // classifier input
};

struct ModelOutput {
  LogitGrid gaze_logits;
  GridDist gaze_dist;
  GridDist attention;
  std::vector<double> pooled;
  std::vector<double> class_probs;
  std::optional<ForwardTrace> trace;

  std::size_t predicted_class() const;
};

HiddenGrid encode(const ClipSample& sample, const ModelParams& params);
std::pair<LogitGrid, GridDist> gaze_forward(const HiddenGrid& hidden, const ModelParams& params);
FeatureGrid feature_forward(const HiddenGrid& hidden, const ModelParams& params);
std::vector<double> attention_pool(const FeatureGrid& features, const GridDist& attention);
std::vector<double> classify(std::span<const double> pooled, const ModelParams& params);

// General forward pass. `fixed` is required when source == Fixed. The
// returned output always carries a trace.
ModelOutput forward(const ClipSample& sample, const ModelParams& params, AttentionSource source,
                    double tau, ForwardNoise noise, const GridDist* fixed = nullptr);

ModelOutput forward_train(const ClipSample& sample, const ModelParams& params, double tau, Rng& rng,
                          double dropout_rate, bool dropout_on);

// Deterministic inference: pools with q itself, no dropout.
ModelOutput forward_infer(const ClipSample& sample, const ModelParams& params);

}  // namespace gazeattn
