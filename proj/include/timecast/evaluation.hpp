#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "timecast/core_types.hpp"

namespace timecast {

// (predicted remaining time, true remaining time)
using PredictionPair = std::pair<double, double>;

double mape(std::span<const PredictionPair> pairs);
double rmspe(std::span<const PredictionPair> pairs);

using SurvivalFn = std::function<double(double)>;

// (1[T_event > t + horizon] - S(horizon))^2
double brier(const SurvivalFn& survival_fn, int event_time, int tick, double horizon);

struct TickForecast {
    int tick = 0;
    SurvivalFn survival;
};

struct InstanceForecast {
    int event_time = 0;
    std::vector<TickForecast> ticks;
};

// Brier score averaged over every instance, every forecast tick and
// horizons 1..horizon.
double ibs(std::span<const InstanceForecast> forecasts, int horizon);

struct MetricReport {
    double mape = 0.0;
    double rmspe = 0.0;
    std::optional<double> ibs;
    std::map<std::string, std::pair<double, double>> per_instance;  // id -> (mape, rmspe)
    int fold_id = -1;
    std::int64_t evaluated_ticks = 0;
    std::int64_t clamped_ticks = 0;
};

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

// Instance-level folds; 10% of each training part is held out for validation.
std::vector<FoldSplit> kfold_protocol(std::size_t instance_count, int folds, std::uint64_t seed);

LabeledCollection subset(const LabeledCollection& collection, std::span<const std::size_t> indices);

}  // namespace timecast
