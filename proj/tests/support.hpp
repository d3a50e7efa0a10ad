#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gazeattn/grid_dist.hpp"
#include "gazeattn/model.hpp"
#include "gazeattn/rng.hpp"

namespace testing {

using namespace gazeattn;

// Pearson statistic against expected probabilities; returns the upper-tail p-value.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& probs) {
  double n = 0.0;
  for (double o : observed) n += o;
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probs[i];
    stat += (observed[i] - e) * (observed[i] - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Two-sample homogeneity test on equal-length count vectors.
inline double chi_square_two_sample_p(const std::vector<double>& a, const std::vector<double>& b) {
  double na = 0.0, nb = 0.0;
  for (double v : a) na += v;
  for (double v : b) nb += v;
  double stat = 0.0;
  std::size_t dof = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double total = a[i] + b[i];
    if (total == 0.0) continue;
    const double ea = total * na / (na + nb);
    const double eb = total * nb / (na + nb);
    stat += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
    ++dof;
  }
  const boost::math::chi_squared dist(static_cast<double>(dof - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// A random strictly positive distribution, optionally with a few exact zeros.
inline GridDist random_dist(const GridShape& shape, Rng& rng, bool allow_zeros = false) {
  std::vector<double> w(shape.cells());
  double sum = 0.0;
  for (double& v : w) {
    v = rng.uniform() * std::exp(3.0 * rng.normal());
    if (allow_zeros && rng.uniform() < 0.2) v = 0.0;
    sum += v;
  }
  if (sum == 0.0) {
    w[0] = 1.0;
    sum = 1.0;
  }
  for (double& v : w) v /= sum;
  return GridDist(shape, std::move(w));
}

inline ClipSample random_sample(const GridShape& shape, std::size_t d, std::size_t classes, Rng& rng) {
  ClipSample s;
  s.shape = shape;
  s.channels = d;
  s.features.resize(shape.cells() * d);
  for (double& v : s.features) v = rng.normal();
  s.label = static_cast<std::size_t>(rng.index(classes));
  return s;
}

inline GridDist one_hot(const GridShape& shape, std::size_t cell) {
  std::vector<double> p(shape.cells(), 0.0);
  p[cell] = 1.0;
  return GridDist(shape, std::move(p));
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gazeattn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
