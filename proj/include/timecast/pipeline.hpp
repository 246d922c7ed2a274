#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "timecast/evaluation.hpp"
#include "timecast/ingestion.hpp"
#include "timecast/segmentation.hpp"
#include "timecast/streaming.hpp"

namespace timecast {

// Median sequence length; the default IBS horizon.
int median_length(const LabeledCollection& collection);

struct EvaluationRun {
    MetricReport report;
    std::vector<PredictionPair> pairs;
    std::vector<InstanceForecast> forecasts;
};

// Replays every (already windowed) sequence through the streaming predictor.
// MAPE/RMSPE use ticks with positive remaining time; IBS uses every tick.
EvaluationRun evaluate_model(const ModelSet& models, const LabeledCollection& features,
                             std::optional<int> ibs_horizon, int fold_id = -1);

struct CrossValidationOptions {
    int folds = 5;
    std::uint64_t seed = 0;
    bool znormalize = true;
    std::optional<int> ibs_horizon;  // default: median length of the data
    std::optional<ModelSet> fixed_model;  // evaluate instead of training per fold
    LearnOptions learn;
};

// One report per fold followed by a pooled report with fold_id -1.
std::vector<MetricReport> cross_validate(const LabeledCollection& raw, const HyperParams& hyper,
                                         const CrossValidationOptions& options);

}  // namespace timecast
