#include "gazeattn/grid_dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gazeattn {

std::string to_string(const GridShape& shape) {
  return std::to_string(shape.t) + "x" + std::to_string(shape.m) + "x" + std::to_string(shape.n);
}

LogitGrid::LogitGrid(GridShape s, std::vector<double> v) : shape(s), values(std::move(v)) {
  if (!shape.valid()) throw InvalidInput("logit grid: every dimension must be >= 1");
  if (values.size() != shape.cells()) {
    throw InvalidInput("logit grid: expected " + std::to_string(shape.cells()) + " values, got " +
                       std::to_string(values.size()));
  }
}

GridDist::GridDist(GridShape s, std::vector<double> p) : shape(s), probs(std::move(p)) {
  if (!shape.valid()) throw InvalidInput("grid dist: every dimension must be >= 1");
  if (probs.size() != shape.cells()) throw InvalidInput("grid dist: size does not match shape");
  double total = 0.0;
  for (double v : probs) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("grid dist: negative or non-finite mass");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("grid dist: mass does not sum to 1");
}

std::size_t GridDist::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void softmax_inplace(std::span<double> values) {
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : values) v /= total;
}

GridDist normalize(const LogitGrid& logits) {
  for (double v : logits.values) {
    if (!std::isfinite(v)) throw InvalidInput("normalize: non-finite logit");
  }
  std::vector<double> probs = logits.values;
  softmax_inplace(probs);
  return GridDist(logits.shape, std::move(probs));
}

GridDist uniform_dist(GridShape shape) {
  if (!shape.valid()) throw InvalidInput("uniform: every dimension must be >= 1");
  return GridDist(shape, std::vector<double>(shape.cells(), 1.0 / static_cast<double>(shape.cells())));
}

GridDist floor_dist(const GridDist& d, double eps) {
  std::vector<double> probs = d.probs;
  double total = 0.0;
  for (double& v : probs) {
    v = std::max(v, eps);
    total += v;
  }
  for (double& v : probs) v /= total;
  return GridDist(d.shape, std::move(probs));
}

double entropy(const GridDist& d) {
  double h = 0.0;
  for (double p : d.probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double kl_divergence(const GridDist& q, const GridDist& p, double eps) {
  if (q.shape != p.shape) {
    throw InvalidInput("kl_divergence: shape mismatch " + to_string(q.shape) + " vs " + to_string(p.shape));
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < q.probs.size(); ++i) {
    const double qi = q.probs[i];
    if (qi > 0.0) kl += qi * (std::log(qi) - std::log(std::max(p.probs[i], eps)));
  }
  return kl;
}

std::vector<double> draw_gumbel(std::size_t count, Rng& rng) {
  std::vector<double> noise(count);
  for (double& g : noise) {
    const double u = std::clamp(rng.uniform(), kGumbelClamp, 1.0 - kGumbelClamp);
    g = -std::log(-std::log(u));
  }
  return noise;
}

GridDist gumbel_softmax(const LogitGrid& logits, std::span<const double> noise, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("gumbel_softmax: tau must be positive");
  if (noise.size() != logits.values.size()) throw InvalidInput("gumbel_softmax: noise size mismatch");
  std::vector<double> z(logits.values.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(logits.values[i])) throw InvalidInput("gumbel_softmax: non-finite logit");
    z[i] = (logits.values[i] + noise[i]) / tau;
  }
  softmax_inplace(z);
  return GridDist(logits.shape, std::move(z));
}

GridDist gumbel_softmax_sample(const LogitGrid& logits, double tau, Rng& rng) {
  if (!(tau > 0.0)) throw InvalidInput("gumbel_softmax_sample: tau must be positive");
  const std::vector<double> noise = draw_gumbel(logits.values.size(), rng);
  return gumbel_softmax(logits, noise, tau);
}

}  // namespace gazeattn
