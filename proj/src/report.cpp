#include "gazeattn/report.hpp"

#include <cstdio>

#include "gazeattn/errors.hpp"

namespace gazeattn {

using nlohmann::json;

json to_json(const MetricsReport& report) {
  json j;
  j["schema"] = "gazeattn.metrics.v1";
  if (report.gaze_best) {
    j["gaze"] = {{"best_f1", report.gaze_best->f1},
                 {"precision", report.gaze_best->precision},
                 {"recall", report.gaze_best->recall},
                 {"threshold", report.gaze_best->threshold},
                 {"items", report.gaze_items}};
  } else {
    j["gaze"] = nullptr;
  }
  j["mean_class_accuracy"] = report.mean_class_accuracy;
  j["accuracy"] = report.accuracy;
  json topk = json::object();
  for (const auto& [k, v] : report.topk) topk["top" + std::to_string(k)] = v;
  j["topk"] = topk;
  json per_class = json::array();
  for (const auto& v : report.per_class) per_class.push_back(v ? json(*v) : json(nullptr));
  j["per_class_accuracy"] = per_class;
  return j;
}

json to_json(const EpochLog& log) {
  return {{"schema", "gazeattn.epoch.v1"}, {"epoch", log.epoch}, {"lr", log.lr},
          {"nll", log.nll},                {"kl", log.kl},       {"gaze_ce", log.gaze_ce},
          {"total", log.total},            {"accuracy", log.accuracy}};
}

json to_json(const GradCheckResult& result) {
  json groups = json::object();
  for (std::size_t g = 0; g < kParamGroups; ++g) {
    groups[std::string(ModelParams::group_names()[g])] = result.max_rel_error[g];
  }
  return {{"schema", "gazeattn.gradcheck.v1"}, {"max_rel_error", groups}, {"worst", result.worst()}};
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("report schema: " + what);
}

bool is_rate(const json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; }

}  // namespace

void validate_report(const json& r) {
  require(r.is_object() && r.contains("schema") && r["schema"].is_string(), "missing schema tag");
  const std::string schema = r["schema"];
  if (schema == "gazeattn.metrics.v1") {
    require(r.contains("gaze"), "metrics.gaze missing");
    if (!r["gaze"].is_null()) {
      const json& g = r["gaze"];
      for (const char* key : {"best_f1", "precision", "recall"}) require(g.contains(key) && is_rate(g[key]), key);
      require(g.contains("threshold") && g["threshold"].is_number(), "threshold");
      require(g.contains("items") && g["items"].is_number_unsigned(), "items");
      const double p = g["precision"], rc = g["recall"], f1 = g["best_f1"];
      require(std::abs(f1_score(p, rc) - f1) < 1e-12, "F1 inconsistent with precision and recall");
    }
    require(r.contains("mean_class_accuracy") && is_rate(r["mean_class_accuracy"]), "mean_class_accuracy");
    require(r.contains("accuracy") && is_rate(r["accuracy"]), "accuracy");
    require(r.contains("topk") && r["topk"].is_object(), "topk");
    for (const auto& [k, v] : r["topk"].items()) require(is_rate(v), "topk." + k);
    require(r.contains("per_class_accuracy") && r["per_class_accuracy"].is_array(), "per_class_accuracy");
    for (const auto& v : r["per_class_accuracy"]) require(v.is_null() || is_rate(v), "per_class_accuracy entry");
  } else if (schema == "gazeattn.epoch.v1") {
    for (const char* key : {"epoch", "lr", "nll", "kl", "gaze_ce", "total", "accuracy"}) {
      require(r.contains(key) && r[key].is_number(), key);
    }
    require(is_rate(r["accuracy"]), "accuracy");
    require(r["nll"].get<double>() >= 0.0 && r["kl"].get<double>() >= -1e-12, "loss terms");
  } else if (schema == "gazeattn.gradcheck.v1") {
    require(r.contains("max_rel_error") && r["max_rel_error"].is_object(), "max_rel_error");
    require(r["max_rel_error"].size() == kParamGroups, "max_rel_error groups");
    require(r.contains("worst") && r["worst"].is_number(), "worst");
  } else if (schema == "gazeattn.comparison.v1") {
    require(r.contains("rows") && r["rows"].is_array(), "rows");
    for (const auto& row : r["rows"]) {
      require(row.contains("variant") && row["variant"].is_string(), "row.variant");
      require(row.contains("seed") && row["seed"].is_number_unsigned(), "row.seed");
      require(row.contains("metrics"), "row.metrics");
      validate_report(row["metrics"]);
    }
  } else if (schema == "gazeattn.bench.v1") {
    require(r.contains("timings") && r["timings"].is_object(), "timings");
    for (const auto& [k, v] : r["timings"].items()) require(v.is_number() && v.get<double>() >= 0.0, k);
  } else {
    throw ValidationError("report schema: unknown schema '" + schema + "'");
  }
}

namespace {

std::string fixed(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string metrics_table(const MetricsReport& report) {
  std::string out;
  out += "metric                 value\n";
  out += "---------------------  ----------\n";
  auto row = [&](const std::string& name, const std::string& value) {
    out += name + std::string(23 - name.size(), ' ') + pad(value, 10) + "\n";
  };
  if (report.gaze_best) {
    row("gaze best F1", fixed(report.gaze_best->f1));
    row("gaze precision", fixed(report.gaze_best->precision));
    row("gaze recall", fixed(report.gaze_best->recall));
    row("gaze threshold", fixed(report.gaze_best->threshold, 6));
    row("gaze windows", std::to_string(report.gaze_items));
  } else {
    row("gaze best F1", "n/a");
  }
  row("mean class accuracy", fixed(report.mean_class_accuracy));
  for (const auto& [k, v] : report.topk) row("top-" + std::to_string(k) + " accuracy", fixed(v));
  return out;
}

std::string comparison_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out = "variant                  gaze F1   precision  recall   MCA      top-1    top-5\n";
  out += "-----------------------  --------  ---------  -------  -------  -------  -------\n";
  for (const auto& [name, r] : rows) {
    std::string line = name + std::string(name.size() < 25 ? 25 - name.size() : 1, ' ');
    if (r.gaze_best) {
      line += pad(fixed(r.gaze_best->f1), 8) + "  " + pad(fixed(r.gaze_best->precision), 9) + "  " +
              pad(fixed(r.gaze_best->recall), 7);
    } else {
      line += pad("n/a", 8) + "  " + pad("n/a", 9) + "  " + pad("n/a", 7);
    }
    line += "  " + pad(fixed(r.mean_class_accuracy), 7);
    const auto top1 = r.topk.find(1);
    const auto top5 = r.topk.find(5);
    line += "  " + pad(top1 != r.topk.end() ? fixed(top1->second) : "n/a", 7);
    line += "  " + pad(top5 != r.topk.end() ? fixed(top5->second) : "n/a", 7);
    out += line + "\n";
  }
  return out;
}

std::string training_log_jsonl(const std::vector<EpochLog>& log) {
  std::string out;
  for (const EpochLog& e : log) out += to_json(e).dump() + "\n";
  return out;
}

}  // namespace gazeattn
