#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "timecast/core_types.hpp"
#include "timecast/evaluation.hpp"
#include "timecast/ingestion.hpp"
#include "timecast/segmentation.hpp"
#include "timecast/streaming.hpp"

namespace timecast {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const ModelSet& models);
ModelSet model_set_from_json(const Json& j);

Json to_json(const FitReport& report);
Json to_json(const FitReport& report, const LabeledCollection& collection,
             const std::vector<StageAssignmentPath>& assignments);

Json to_json(const MetricReport& report);
Json to_json(const PredictionOutput& prediction);
PredictionOutput prediction_from_json(const Json& j);
Json to_json(const UpdateReport& report);

SyntheticSpec synthetic_spec_from_json(const Json& j);
Json truth_to_json(const LabeledCollection& collection, const std::vector<StageAssignmentPath>& truth);

// Aligned-column text table, one row per report.
std::string metric_table(const std::vector<MetricReport>& reports);

// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace timecast
