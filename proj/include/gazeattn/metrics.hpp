#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "gazeattn/gaze_prior.hpp"
#include "gazeattn/grid_dist.hpp"

namespace gazeattn {

// One evaluated window. Windows without fixations are marked invalid and
// skipped (saccade-only and untracked windows carry no ground truth).
struct GazeEvalItem {
  GridDist predicted;
  std::set<GridCell> positives;
  bool valid = false;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class PrAveraging { Micro, Macro };

double f1_score(double precision, double recall);

// One point per distinct predicted value across valid items, ascending by
// threshold. A cell is predicted positive iff its value >= threshold. Micro
// pools TP/FP/FN over items; Macro averages per-item precision and recall
// (precision of an item with no predicted cells counts as 1).
std::vector<PrPoint> gaze_pr_sweep(const std::vector<GazeEvalItem>& items,
                                   PrAveraging averaging = PrAveraging::Micro);

// Highest F1; ties go to the larger threshold.
PrPoint best_f1(const std::vector<PrPoint>& sweep);

struct ClassAccuracy {
  double mean = 0.0;                            // over classes with >= 1 instance
  std::vector<std::optional<double>> per_class;  // nullopt for absent classes
};

ClassAccuracy mean_class_accuracy(const std::vector<std::size_t>& predictions,
                                  const std::vector<std::size_t>& labels, std::size_t classes);

// Fraction of items whose label ranks within the top k scores. Equal scores
// rank the lower class index first.
double topk_accuracy(const std::vector<std::vector<double>>& scores, const std::vector<std::size_t>& labels,
                     std::size_t k);

struct MetricsReport {
  std::optional<PrPoint> gaze_best;  // absent when no window has fixations
  std::size_t gaze_items = 0;
  double mean_class_accuracy = 0.0;
  double accuracy = 0.0;  // instance-level top-1
  std::map<std::size_t, double> topk;
  std::vector<std::optional<double>> per_class;
};

}  // namespace gazeattn
