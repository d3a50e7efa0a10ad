#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gazeattn/rng.hpp"

namespace gazeattn {

inline constexpr double kDefaultTau = 2.0;
inline constexpr double kEpsFloor = 1e-8;
inline constexpr double kGumbelClamp = 1e-12;

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Temporal slices x rows x cols. Cells are stored row-major as
// ((slice * m) + row) * n + col.
struct GridShape {
  std::size_t t = 1;
  std::size_t m = 7;
  std::size_t n = 7;

  std::size_t cells() const { return t * m * n; }
  std::size_t slice_cells() const { return m * n; }
  std::size_t index(std::size_t slice, std::size_t row, std::size_t col) const {
    return (slice * m + row) * n + col;
  }
  bool valid() const { return t >= 1 && m >= 1 && n >= 1; }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

std::string to_string(const GridShape& shape);

// Unnormalized attention scores, one per cell.
struct LogitGrid {
  GridShape shape;
  std::vector<double> values;

  LogitGrid() = default;
  LogitGrid(GridShape s, std::vector<double> v);
  explicit LogitGrid(GridShape s) : shape(s), values(s.cells(), 0.0) {}
};

// Normalized probability mass over a grid.
struct GridDist {
  GridShape shape;
  std::vector<double> probs;

  GridDist() = default;
  // Validates nonnegativity and unit mass (tolerance 1e-9).
  GridDist(GridShape s, std::vector<double> p);

  std::size_t argmax() const;
};

// In-place max-subtracted softmax.
void softmax_inplace(std::span<double> values);

GridDist normalize(const LogitGrid& logits);
GridDist uniform_dist(GridShape shape);

// Clamp every cell to at least eps and renormalize.
GridDist floor_dist(const GridDist& d, double eps = kEpsFloor);

double entropy(const GridDist& d);

// KL[q || p] in nats; p is floored at eps inside the log.
double kl_divergence(const GridDist& q, const GridDist& p, double eps = kEpsFloor);

// Standard Gumbel noise G = -log(-log U), U clamped to [1e-12, 1 - 1e-12).
std::vector<double> draw_gumbel(std::size_t count, Rng& rng);

// softmax((logits + noise) / tau) for a fixed noise draw.
GridDist gumbel_softmax(const LogitGrid& logits, std::span<const double> noise, double tau);

GridDist gumbel_softmax_sample(const LogitGrid& logits, double tau, Rng& rng);

}  // namespace gazeattn
