#include "timecast/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "timecast/predictor.hpp"

namespace timecast {

int median_length(const LabeledCollection& collection) {
    if (collection.empty()) return 1;
    std::vector<int> lengths;
    for (const auto& s : collection.sequences) lengths.push_back(s.event_time());
    std::sort(lengths.begin(), lengths.end());
    return std::max(1, lengths[lengths.size() / 2]);
}

EvaluationRun evaluate_model(const ModelSet& models, const LabeledCollection& features,
                             std::optional<int> ibs_horizon, int fold_id) {
    const StreamModel model(models);
    EvaluationRun run;
    run.report.fold_id = fold_id;
    for (const auto& seq : features.sequences) {
        StreamState state;
        state.instance_id = seq.instance_id();
        state.history_cap = 1;
        std::vector<PredictionPair> own;
        InstanceForecast forecast{seq.event_time(), {}};
        for (int t = 0; t < seq.length(); ++t) {
            auto [pred, next] = adaptive_predict(std::move(state), seq.at(t), model);
            state = std::move(next);
            const double tau = seq.remaining_time(t);
            if (tau > 0.0) {
                own.emplace_back(pred.point_estimate, tau);
                if (pred.clamped) ++run.report.clamped_ticks;
            }
            if (ibs_horizon) {
                const auto params = pred.params;
                forecast.ticks.push_back(
                    TickForecast{pred.tick, [params](double h) { return survival(params, h); }});
            }
        }
        if (!own.empty()) {
            run.report.per_instance[seq.instance_id()] = {mape(own), rmspe(own)};
            run.pairs.insert(run.pairs.end(), own.begin(), own.end());
        }
        if (ibs_horizon) run.forecasts.push_back(std::move(forecast));
    }
    run.report.evaluated_ticks = static_cast<std::int64_t>(run.pairs.size());
    if (!run.pairs.empty()) {
        run.report.mape = mape(run.pairs);
        run.report.rmspe = rmspe(run.pairs);
    }
    if (ibs_horizon) run.report.ibs = ibs(run.forecasts, *ibs_horizon);
    return run;
}

std::vector<MetricReport> cross_validate(const LabeledCollection& raw, const HyperParams& hyper,
                                         const CrossValidationOptions& options) {
    const auto splits = kfold_protocol(raw.size(), options.folds, options.seed);
    const int horizon = options.ibs_horizon.value_or(median_length(raw));
    const int window = options.fixed_model ? options.fixed_model->hyper.window : hyper.window;
    const bool znorm = options.fixed_model ? options.fixed_model->znormalize : options.znormalize;
    const auto features = prepare_features(raw, window, znorm);

    std::vector<MetricReport> reports;
    std::vector<PredictionPair> pooled;
    std::vector<InstanceForecast> pooled_forecasts;
    MetricReport total;
    for (std::size_t f = 0; f < splits.size(); ++f) {
        const auto test = subset(features, splits[f].test);
        ModelSet models;
        if (options.fixed_model) {
            models = *options.fixed_model;
        } else {
            models = learn(subset(features, splits[f].train), hyper, options.learn).models;
            models.sensor_dim = raw.dimension;
            models.znormalize = znorm;
        }
        auto run = evaluate_model(models, test, horizon, static_cast<int>(f));
        pooled.insert(pooled.end(), run.pairs.begin(), run.pairs.end());
        for (auto& fc : run.forecasts) pooled_forecasts.push_back(std::move(fc));
        total.per_instance.insert(run.report.per_instance.begin(), run.report.per_instance.end());
        total.clamped_ticks += run.report.clamped_ticks;
        reports.push_back(std::move(run.report));
    }
    total.fold_id = -1;
    total.evaluated_ticks = static_cast<std::int64_t>(pooled.size());
    if (!pooled.empty()) {
        total.mape = mape(pooled);
        total.rmspe = rmspe(pooled);
    }
    total.ibs = ibs(pooled_forecasts, horizon);
    reports.push_back(std::move(total));
    return reports;
}

}  // namespace timecast
