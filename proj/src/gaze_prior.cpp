#include "gazeattn/gaze_prior.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gazeattn {

std::string_view to_string(GazeKind kind) {
  switch (kind) {
    case GazeKind::Fixation: return "fixation";
    case GazeKind::Saccade: return "saccade";
    case GazeKind::Unknown: return "unknown";
    case GazeKind::Untracked: return "untracked";
  }
  return "untracked";
}

std::optional<GazeKind> parse_gaze_kind(std::string_view text) {
  if (text == "fixation") return GazeKind::Fixation;
  if (text == "saccade") return GazeKind::Saccade;
  if (text == "unknown") return GazeKind::Unknown;
  if (text == "untracked") return GazeKind::Untracked;
  return std::nullopt;
}

void validate(const GazeRecord& record) {
  if (record.kind == GazeKind::Untracked) return;
  if (!(record.u >= 0.0 && record.u <= 1.0 && record.v >= 0.0 && record.v <= 1.0)) {
    throw InvalidInput("gaze record at frame " + std::to_string(record.frame_index) +
                       ": coordinates outside [0,1]");
  }
}

void validate(const PriorConfig& cfg) {
  if (!(cfg.sigma_cells > 0.0)) throw InvalidInput("prior: sigma_cells must be positive");
  if (!(cfg.eps_floor > 0.0)) throw InvalidInput("prior: eps_floor must be positive");
  if (cfg.window_frames < 1) throw InvalidInput("prior: window_frames must be >= 1");
}

std::pair<std::size_t, std::size_t> project_point_to_cell(double u, double v, const GridShape& shape) {
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
    throw InvalidInput("project_point_to_cell: coordinates outside [0,1]");
  }
  const auto row = std::min(static_cast<std::size_t>(std::floor(v * static_cast<double>(shape.m))), shape.m - 1);
  const auto col = std::min(static_cast<std::size_t>(std::floor(u * static_cast<double>(shape.n))), shape.n - 1);
  return {row, col};
}

FrameWindow slice_window(std::size_t slice, std::size_t window_frames, std::size_t first_frame) {
  const std::size_t begin = first_frame + slice * window_frames;
  return {begin, begin + window_frames};
}

std::set<GridCell> aggregate_fixations(const std::vector<GazeRecord>& records, FrameWindow window,
                                       const GridShape& shape) {
  const std::size_t length = window.end > window.begin ? window.end - window.begin : 0;
  if (length == 0 || length % shape.t != 0) {
    throw InvalidInput("aggregate_fixations: window length must be a positive multiple of t");
  }
  const std::size_t per_slice = length / shape.t;
  std::set<GridCell> cells;
  for (const GazeRecord& r : records) {
    if (r.kind != GazeKind::Fixation || !window.contains(r.frame_index)) continue;
    const auto [row, col] = project_point_to_cell(r.u, r.v, shape);
    cells.insert({(r.frame_index - window.begin) / per_slice, row, col});
  }
  return cells;
}

namespace {

// Isotropic Gaussian evaluated at cell centers, in cell units.
void add_gaussian(std::span<double> slice, const GridShape& shape, double u, double v, double sigma) {
  const double cy = v * static_cast<double>(shape.m);
  const double cx = u * static_cast<double>(shape.n);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> kernel(slice.size());
  double total = 0.0;
  for (std::size_t r = 0; r < shape.m; ++r) {
    for (std::size_t c = 0; c < shape.n; ++c) {
      const double dy = static_cast<double>(r) + 0.5 - cy;
      const double dx = static_cast<double>(c) + 0.5 - cx;
      const double k = std::exp(-(dx * dx + dy * dy) * inv);
      kernel[r * shape.n + c] = k;
      total += k;
    }
  }
  // A point far outside every cell center can underflow the whole kernel.
  if (!(total > 0.0)) {
    const auto [row, col] = project_point_to_cell(u, v, shape);
    slice[row * shape.n + col] += 1.0;
    return;
  }
  for (std::size_t i = 0; i < slice.size(); ++i) slice[i] += kernel[i] / total;
}

}  // namespace

GridDist build_prior(const std::vector<GazeRecord>& records, const PriorConfig& cfg,
                     const GridShape& shape, std::size_t first_frame) {
  validate(cfg);
  if (!shape.valid()) throw InvalidInput("build_prior: invalid grid shape");
  const std::size_t per_slice = shape.slice_cells();
  std::vector<double> probs(shape.cells(), 0.0);

  for (std::size_t s = 0; s < shape.t; ++s) {
    const FrameWindow window = slice_window(s, cfg.window_frames, first_frame);
    std::span<double> slice(probs.data() + s * per_slice, per_slice);
    std::size_t fixations = 0;
    for (const GazeRecord& r : records) {
      if (r.kind != GazeKind::Fixation || !window.contains(r.frame_index)) continue;
      validate(r);
      add_gaussian(slice, shape, r.u, r.v, cfg.sigma_cells);
      ++fixations;
    }
    if (fixations == 0) {
      std::fill(slice.begin(), slice.end(), 1.0 / static_cast<double>(per_slice));
    } else {
      double total = 0.0;
      for (double v : slice) total += v;
      for (double& v : slice) v /= total;
    }
  }

  double total = 0.0;
  for (double& v : probs) {
    v /= static_cast<double>(shape.t);
    total += v;
  }
  for (double& v : probs) v /= total;
  return floor_dist(GridDist(shape, std::move(probs)), cfg.eps_floor);
}

GridDist uniform_prior(const GridShape& shape) { return uniform_dist(shape); }

}  // namespace gazeattn
