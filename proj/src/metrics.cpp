#include "gazeattn/metrics.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace gazeattn {

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

namespace {

std::vector<double> positive_mask(const GazeEvalItem& item) {
  const GridShape& shape = item.predicted.shape;
  std::vector<double> mask(shape.cells(), 0.0);
  for (const GridCell& c : item.positives) {
    if (c.slice >= shape.t || c.row >= shape.m || c.col >= shape.n) {
      throw InvalidInput("gaze eval: positive cell outside the grid");
    }
    mask[shape.index(c.slice, c.row, c.col)] = 1.0;
  }
  return mask;
}

std::vector<PrPoint> micro_sweep(const std::vector<const GazeEvalItem*>& valid) {
  // (value, is_positive), swept from the highest value down.
  std::vector<std::pair<double, bool>> cells;
  std::size_t total_pos = 0;
  for (const GazeEvalItem* item : valid) {
    const std::vector<double> mask = positive_mask(*item);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const bool pos = mask[i] > 0.0;
      cells.emplace_back(item->predicted.probs[i], pos);
      total_pos += pos ? 1 : 0;
    }
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<PrPoint> sweep;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < cells.size();) {
    const double threshold = cells[i].first;
    for (; i < cells.size() && cells[i].first == threshold; ++i) (cells[i].second ? tp : fp) += 1;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    sweep.push_back({threshold, precision, recall, f1_score(precision, recall)});
  }
  std::reverse(sweep.begin(), sweep.end());
  return sweep;
}

std::vector<PrPoint> macro_sweep(const std::vector<const GazeEvalItem*>& valid) {
  std::vector<double> thresholds;
  std::vector<std::vector<std::pair<double, bool>>> per_item;
  for (const GazeEvalItem* item : valid) {
    const std::vector<double> mask = positive_mask(*item);
    auto& cells = per_item.emplace_back();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      cells.emplace_back(item->predicted.probs[i], mask[i] > 0.0);
      thresholds.push_back(item->predicted.probs[i]);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  std::vector<PrPoint> sweep;
  sweep.reserve(thresholds.size());
  const double n = static_cast<double>(per_item.size());
  for (double threshold : thresholds) {
    double p_sum = 0.0;
    double r_sum = 0.0;
    for (const auto& cells : per_item) {
      std::size_t tp = 0, fp = 0, pos = 0;
      for (const auto& [value, is_pos] : cells) {
        pos += is_pos ? 1 : 0;
        if (value >= threshold) (is_pos ? tp : fp) += 1;
      }
      p_sum += tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
      r_sum += static_cast<double>(tp) / static_cast<double>(pos);
    }
    const double precision = p_sum / n;
    const double recall = r_sum / n;
    sweep.push_back({threshold, precision, recall, f1_score(precision, recall)});
  }
  return sweep;
}

}  // namespace

std::vector<PrPoint> gaze_pr_sweep(const std::vector<GazeEvalItem>& items, PrAveraging averaging) {
  std::vector<const GazeEvalItem*> valid;
  for (const GazeEvalItem& item : items) {
    if (!item.valid) continue;
    if (item.positives.empty()) throw InvalidInput("gaze eval: valid item without positive cells");
    valid.push_back(&item);
  }
  if (valid.empty()) throw InvalidInput("gaze_pr_sweep: no valid items");
  return averaging == PrAveraging::Micro ? micro_sweep(valid) : macro_sweep(valid);
}

PrPoint best_f1(const std::vector<PrPoint>& sweep) {
  if (sweep.empty()) throw InvalidInput("best_f1: empty sweep");
  PrPoint best = sweep.front();
  for (const PrPoint& p : sweep) {
    if (p.f1 > best.f1 || (p.f1 == best.f1 && p.threshold > best.threshold)) best = p;
  }
  return best;
}

ClassAccuracy mean_class_accuracy(const std::vector<std::size_t>& predictions,
                                  const std::vector<std::size_t>& labels, std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw InvalidInput("mean_class_accuracy: " + std::to_string(predictions.size()) + " predictions vs " +
                       std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> hits(classes, 0);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw InvalidInput("mean_class_accuracy: label out of range");
    ++counts[labels[i]];
    if (predictions[i] == labels[i]) ++hits[labels[i]];
  }
  ClassAccuracy out;
  out.per_class.resize(classes);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] == 0) continue;
    const double acc = static_cast<double>(hits[k]) / static_cast<double>(counts[k]);
    out.per_class[k] = acc;
    sum += acc;
    ++present;
  }
  out.mean = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return out;
}

double topk_accuracy(const std::vector<std::vector<double>>& scores, const std::vector<std::size_t>& labels,
                     std::size_t k) {
  if (scores.size() != labels.size()) throw InvalidInput("topk_accuracy: length mismatch");
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const std::size_t y = labels[i];
    if (k > s.size()) throw InvalidInput("topk_accuracy: k exceeds class count");
    if (y >= s.size()) throw InvalidInput("topk_accuracy: label out of range");
    std::size_t rank = 0;
    for (std::size_t c = 0; c < s.size(); ++c) {
      if (s[c] > s[y] || (s[c] == s[y] && c < y)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace gazeattn
