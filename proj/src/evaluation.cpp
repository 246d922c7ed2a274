#include "timecast/evaluation.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace timecast {

namespace {

void check_pairs(std::span<const PredictionPair> pairs) {
    if (pairs.empty()) throw ArgumentError("metric needs at least one prediction");
    for (const auto& [pred, truth] : pairs) {
        if (!(truth > 0.0)) throw ArgumentError("true remaining time must be positive");
    }
}

}  // namespace

double mape(std::span<const PredictionPair> pairs) {
    check_pairs(pairs);
    double sum = 0.0;
    for (const auto& [pred, truth] : pairs) sum += std::abs(pred - truth) / truth;
    return sum / static_cast<double>(pairs.size());
}

double rmspe(std::span<const PredictionPair> pairs) {
    check_pairs(pairs);
    double sum = 0.0;
    for (const auto& [pred, truth] : pairs) {
        const double r = (pred - truth) / truth;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double brier(const SurvivalFn& survival_fn, int event_time, int tick, double horizon) {
    if (!(horizon > 0.0)) throw ArgumentError("brier: horizon must be positive");
    const double survived = static_cast<double>(event_time) > static_cast<double>(tick) + horizon ? 1.0 : 0.0;
    const double diff = survived - survival_fn(horizon);
    return diff * diff;
}

double ibs(std::span<const InstanceForecast> forecasts, int horizon) {
    if (horizon < 1) throw ArgumentError("ibs: horizon must be >= 1");
    double total = 0.0;
    std::int64_t ticks = 0;
    for (const auto& inst : forecasts) {
        for (const auto& f : inst.ticks) {
            double per_tick = 0.0;
            for (int h = 1; h <= horizon; ++h) {
                per_tick += brier(f.survival, inst.event_time, f.tick, static_cast<double>(h));
            }
            total += per_tick / static_cast<double>(horizon);
            ++ticks;
        }
    }
    if (ticks == 0) throw ArgumentError("ibs: no forecasts");
    return total / static_cast<double>(ticks);
}

std::vector<FoldSplit> kfold_protocol(std::size_t instance_count, int folds, std::uint64_t seed) {
    if (folds < 2) throw ArgumentError("kfold: need at least two folds");
    if (instance_count < static_cast<std::size_t>(folds)) {
        throw ArgumentError("kfold: fewer instances than folds");
    }
    std::vector<std::size_t> order(instance_count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Fisher-Yates driven by mt19937_64 directly, so splits do not depend on
    // the standard library's distribution implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = instance_count - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }

    std::vector<FoldSplit> splits(static_cast<std::size_t>(folds));
    const auto f = static_cast<std::size_t>(folds);
    for (std::size_t fold = 0; fold < f; ++fold) {
        const std::size_t begin = fold * instance_count / f;
        const std::size_t end = (fold + 1) * instance_count / f;
        auto& split = splits[fold];
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < instance_count; ++i) {
            if (i >= begin && i < end) {
                split.test.push_back(order[i]);
            } else {
                rest.push_back(order[i]);
            }
        }
        const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(rest.size())));
        split.validation.assign(rest.end() - static_cast<std::ptrdiff_t>(n_val), rest.end());
        split.train.assign(rest.begin(), rest.end() - static_cast<std::ptrdiff_t>(n_val));
    }
    return splits;
}

LabeledCollection subset(const LabeledCollection& collection, std::span<const std::size_t> indices) {
    std::vector<SensorSequence> seqs;
    seqs.reserve(indices.size());
    for (auto i : indices) seqs.push_back(collection.sequences.at(i));
    LabeledCollection out(std::move(seqs));
    out.dimension = collection.dimension;
    return out;
}

}  // namespace timecast
