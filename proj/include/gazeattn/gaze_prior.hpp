#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <tuple>
#include <vector>

#include "gazeattn/grid_dist.hpp"

namespace gazeattn {

enum class GazeKind : std::uint8_t { Fixation, Saccade, Unknown, Untracked };

std::string_view to_string(GazeKind kind);
std::optional<GazeKind> parse_gaze_kind(std::string_view text);

// One eye-tracker sample. u is the horizontal and v the vertical image
// coordinate, both normalized to [0, 1]; ignored for Untracked records.
struct GazeRecord {
  std::size_t frame_index = 0;
  double u = 0.0;
  double v = 0.0;
  GazeKind kind = GazeKind::Untracked;

  friend bool operator==(const GazeRecord&, const GazeRecord&) = default;
};

// Throws InvalidInput when a tracked record has coordinates outside [0,1].
void validate(const GazeRecord& record);

struct PriorConfig {
  double sigma_cells = 0.5;
  double eps_floor = kEpsFloor;
  std::size_t window_frames = 8;

  friend bool operator==(const PriorConfig&, const PriorConfig&) = default;
};

void validate(const PriorConfig& cfg);

struct GridCell {
  std::size_t slice = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  auto operator<=>(const GridCell&) const = default;
};

std::pair<std::size_t, std::size_t> project_point_to_cell(double u, double v, const GridShape& shape);

// Half-open frame range [begin, end).
struct FrameWindow {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool contains(std::size_t frame) const { return frame >= begin && frame < end; }
};

// Slice s covers frames [first_frame + s * window_frames, first_frame + (s + 1) * window_frames).
FrameWindow slice_window(std::size_t slice, std::size_t window_frames, std::size_t first_frame = 0);

// Cells hit by any fixation whose frame falls inside the slice's window.
// `window` spans all slices: its length must equal shape.t * window_frames.
std::set<GridCell> aggregate_fixations(const std::vector<GazeRecord>& records, FrameWindow window,
                                       const GridShape& shape);

// Gaussian-per-fixation prior, uniform for slices without fixations,
// floored at cfg.eps_floor. Frames are counted from `first_frame`.
GridDist build_prior(const std::vector<GazeRecord>& records, const PriorConfig& cfg,
                     const GridShape& shape, std::size_t first_frame = 0);

GridDist uniform_prior(const GridShape& shape);

}  // namespace gazeattn
