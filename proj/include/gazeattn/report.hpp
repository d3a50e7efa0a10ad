#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "gazeattn/experiment.hpp"
#include "gazeattn/learning.hpp"
#include "gazeattn/metrics.hpp"

namespace gazeattn {

// Structured records. Every record carries a "schema" tag checked by
// validate_report().
nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const EpochLog& log);
nlohmann::json to_json(const GradCheckResult& result);

// Throws ValidationError when a record does not follow its documented schema.
void validate_report(const nlohmann::json& record);

// Aligned text renderings.
std::string metrics_table(const MetricsReport& report);
std::string comparison_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

// Line-delimited JSON, one record per epoch.
std::string training_log_jsonl(const std::vector<EpochLog>& log);

}  // namespace gazeattn
