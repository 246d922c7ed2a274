#include "timecast/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "timecast/evaluation.hpp"
#include "timecast/segmentation.hpp"

namespace timecast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double relative_change(double previous, double current) {
    return std::abs(current - previous) / std::max(1.0, std::abs(previous));
}

// Least squares from sufficient statistics; intercept only below dim + 2 pairs.
Vector link_from_stats(const LinkStats& ls, int dim) {
    if (ls.count >= dim + 2) return fit_link_from_stats(ls).weights;
    Vector w = Vector::Zero(dim + 1);
    w(dim) = ls.label_sum / static_cast<double>(ls.count);
    return w;
}

// Refits descriptor and predictor of `stage` from its accumulated statistics.
void refit_from_stats(StageModel& stage, double alpha, const GlassoConfig& glasso) {
    const int dim = stage.dimension();
    stage.count = stage.stats.count;
    stage.stale = stage.stats.count == 0;
    if (stage.stats.count == 0) return;
    stage.mean = stage.stats.mean;
    try {
        stage.precision = fit_precision(EmpiricalStats::from_moments(stage.stats), alpha, glasso);
    } catch (const ConvergenceError&) {
        // keep the previous precision
    }
    const auto& ls = stage.link_stats;
    if (ls.count == 0) return;
    stage.link_weights = link_from_stats(ls, dim);
    stage.increment_mean = ls.inv_label_sum / static_cast<double>(ls.count);
    stage.diffusion = ls.count >= 2
                          ? std::max(std::sqrt(ls.abs_dev_sum / static_cast<double>(ls.count)), kMinDiffusion)
                          : kMinDiffusion;
}

struct StreamPoints {
    std::vector<Vector> points;
    std::vector<Vector> pair_features;
    std::vector<double> pair_labels;
};

std::vector<StreamPoints> split_by_stage(const SensorSequence& seq, const StageAssignmentPath& path,
                                         int stage_count) {
    std::vector<StreamPoints> out(static_cast<std::size_t>(stage_count));
    for (int t = 0; t < seq.length(); ++t) {
        auto& b = out[static_cast<std::size_t>(path[t])];
        b.points.push_back(seq.at(t));
        const double tau = seq.remaining_time(t);
        if (tau > 0.0) {
            b.pair_features.push_back(seq.at(t));
            b.pair_labels.push_back(tau);
        }
    }
    return out;
}

// Welford refresh: each stage starts from its base statistics and absorbs the
// stream points now assigned to it.
ModelSet refresh_online(const ModelSet& base, const SensorSequence& seq, const StageAssignmentPath& path,
                        const GlassoConfig& glasso) {
    ModelSet out = base;
    const auto buckets = split_by_stage(seq, path, base.size());
    for (int k = 0; k < base.size(); ++k) {
        const auto& data = buckets[static_cast<std::size_t>(k)];
        if (data.points.empty()) continue;
        StageModel& stage = out.stages[static_cast<std::size_t>(k)];
        for (const auto& p : data.points) stage = welford_update(std::move(stage), p);
        auto& ls = stage.link_stats;
        for (std::size_t i = 0; i < data.pair_labels.size(); ++i) {
            ls.add(data.pair_features[i], data.pair_labels[i]);
        }
        if (ls.count > 0) {
            const double mu_tau = ls.inv_label_sum / static_cast<double>(ls.count);
            // Deviations of the base points are carried over as recorded at their fit.
            for (double tau : data.pair_labels) ls.abs_dev_sum += std::abs(1.0 / tau - mu_tau);
        }
        refit_from_stats(stage, base.hyper.alpha, glasso);
    }
    return out;
}

struct Refreshed {
    ModelSet models;
    StageAssignmentPath path;
    int iterations = 0;
};

// Alternates assignment of `seq` and Welford refresh from `base` until the
// objective settles.
Refreshed refresh_until_settled(const ModelSet& base, const SensorSequence& seq, double beta,
                                const OnlineOptions& options) {
    const LabeledCollection single(std::vector<SensorSequence>{seq});
    Refreshed out{base, {}, 0};
    double objective = 0.0;
    for (int iter = 1; iter <= options.max_inner_iter; ++iter) {
        out.path = assign_stages_dp(seq, out.models, beta);
        out.models = refresh_online(base, seq, out.path, options.glasso);
        out.iterations = iter;
        const double next = total_objective(single, out.models, {out.path}, base.hyper.alpha, beta);
        if (iter > 1 && relative_change(objective, next) < base.hyper.tol) break;
        objective = next;
    }
    return out;
}

StageModel make_candidate(const StreamPoints& data, const StageModel& worst, double alpha,
                          const GlassoConfig& glasso) {
    const int dim = worst.dimension();
    StageModel c = worst;
    auto stats = empirical_stats(data.points);
    const double jitter = std::max(1e-2 * stats.covariance.trace() / dim, 1e-6);
    stats.covariance.diagonal().array() += jitter;
    c.mean = stats.mean;
    try {
        c.precision = fit_precision(stats, alpha, glasso);
    } catch (const ConvergenceError&) {
        c.precision = fit_precision(stats, 0.0, glasso);
    }
    const auto n = data.pair_labels.size();
    if (n >= static_cast<std::size_t>(dim) + 2) {
        c.link_weights = fit_link(data.pair_features, data.pair_labels).weights;
    } else if (n > 0) {
        double sum = 0.0;
        for (double l : data.pair_labels) sum += l;
        c.link_weights = Vector::Zero(dim + 1);
        c.link_weights(dim) = sum / static_cast<double>(n);
    }
    if (n >= 2) {
        const auto diff = fit_diffusion(data.pair_labels);
        c.diffusion = diff.diffusion;
        c.increment_mean = diff.increment_mean;
    }
    // The candidate's statistics come only from stream points assigned to it.
    c.stats = MomentStats::empty(dim);
    c.link_stats = LinkStats::empty(dim);
    c.count = 0;
    c.stale = false;
    return c;
}

}  // namespace

void StreamState::on_stage_inserted(int position) {
    if (position < 0 || position > gamma.size()) throw ArgumentError("stage insertion out of range");
    if (tick > 0) {
        Vector grown(gamma.size() + 1);
        grown.head(position) = gamma.head(position);
        grown(position) = kNegInf;
        grown.tail(gamma.size() - position) = gamma.tail(gamma.size() - position);
        gamma = std::move(grown);
    }
    if (current_stage >= position) ++current_stage;
}

std::vector<Vector> StreamState::drain_history() {
    std::vector<Vector> out;
    out.swap(history);
    return out;
}

StreamModel::StreamModel(ModelSet models) : models_(std::move(models)) {
    models_.validate();
    scorers_.reserve(models_.stages.size());
    for (const auto& s : models_.stages) scorers_.emplace_back(s.mean, s.precision);
}

std::pair<PredictionOutput, StreamState> adaptive_predict(StreamState state, const Vector& x,
                                                          const StreamModel& model) {
    const int k_count = model.size();
    if (x.size() != model.models().feature_dim()) {
        throw ArgumentError("adaptive_predict: feature dimension mismatch");
    }
    std::uint64_t ops = 0;
    if (state.tick == 0) {
        state.gamma.resize(k_count);
        for (int k = 0; k < k_count; ++k) {
            state.gamma(k) = model.descriptor_loglik(k, x);
            ++ops;
        }
    } else {
        if (state.gamma.size() != k_count) {
            throw ArgumentError("adaptive_predict: stream state does not match the model set");
        }
        double best = kNegInf;
        for (int k = 0; k < k_count; ++k) {
            best = std::max(best, state.gamma(k));
            state.gamma(k) = best + model.descriptor_loglik(k, x);
            ops += 2;
        }
    }
    int stage = 0;
    for (int k = 1; k < k_count; ++k) {
        if (state.gamma(k) > state.gamma(stage)) stage = k;
        ++ops;
    }
    state.current_stage = stage;
    ++state.tick;
    state.last_tick_ops = ops;
    if (state.history_cap == 0 || state.history.size() < state.history_cap) {
        state.history.push_back(x);
    } else {
        state.history_truncated = true;
    }

    const auto& s = model.models().stages[static_cast<std::size_t>(stage)];
    const auto link = hitting_params(s, x);
    PredictionOutput out;
    out.instance_id = state.instance_id;
    out.tick = state.tick;
    out.stage = stage;
    out.params = link.params;
    out.point_estimate = predicted_time(link.params);
    out.raw_link = link.raw;
    out.clamped = link.clamped;
    return {std::move(out), std::move(state)};
}

std::pair<PredictionOutput, StreamState> adaptive_predict(StreamState state, const Vector& x,
                                                          const ModelSet& models) {
    return adaptive_predict(std::move(state), x, StreamModel(models));
}

StageModel welford_update(StageModel stage, const Vector& x) {
    if (stage.stats.mean.size() != x.size()) {
        if (stage.stats.count != 0) throw ArgumentError("welford_update: dimension mismatch");
        stage.stats = MomentStats::empty(static_cast<int>(x.size()));
    }
    stage.stats.add(x);
    stage.count = stage.stats.count;
    return stage;
}

ReplayScore replay_score(const StreamModel& model, const SensorSequence& sequence,
                         const StageAssignmentPath* absorbed) {
    if (absorbed && absorbed->size() != sequence.length()) {
        throw ArgumentError("replay_score: path length differs from the sequence");
    }
    ReplayScore score;
    StreamState state;
    state.history_cap = 1;
    const int dim = model.models().feature_dim();
    for (int t = 0; t < sequence.length(); ++t) {
        auto [pred, next] = adaptive_predict(std::move(state), sequence.at(t), model);
        state = std::move(next);
        const double tau = sequence.remaining_time(t);
        if (!(tau > 0.0)) continue;
        double estimate = pred.point_estimate;
        bool clamped = pred.clamped;
        const auto& stage = model.models().stages[static_cast<std::size_t>(pred.stage)];
        if (absorbed && (*absorbed)[t] == pred.stage && stage.link_stats.count > 1) {
            // Refit the link without this tick's own pair.
            LinkStats ls = stage.link_stats;
            Vector z(dim + 1);
            z.head(dim) = sequence.at(t);
            z(dim) = 1.0;
            ls.gram -= z * z.transpose();
            ls.moment -= z * tau;
            ls.label_sum -= tau;
            --ls.count;
            const double raw = link_from_stats(ls, dim).dot(z);
            clamped = !(raw >= kMinPredictedTime);
            estimate = clamped ? kMinPredictedTime : raw;
        }
        score.pairs.emplace_back(estimate, tau);
        if (clamped) ++score.clamped;
    }
    score.mape = score.pairs.empty() ? 0.0 : mape(score.pairs);
    return score;
}

OnlineUpdateResult online_model_update(const ModelSet& models, const SensorSequence& finished,
                                       const OnlineOptions& options) {
    models.validate();
    OnlineUpdateResult result{models, {}};
    auto& report = result.report;
    report.stages_before = models.size();
    report.stages_after = models.size();
    if (finished.dimension() != models.feature_dim()) {
        throw ArgumentError("online_model_update: feature dimension mismatch");
    }
    if (finished.length() < 2) {
        report.reason = "stream shorter than two ticks";
        return result;
    }

    const double beta = models.hyper.beta;
    const auto path = assign_stages_dp(finished, models, beta);
    const auto buckets = split_by_stage(finished, path, models.size());

    // Worst stage: highest MAPE of its own link over its assigned ticks.
    report.stage_mape.assign(static_cast<std::size_t>(models.size()), std::nan(""));
    int worst = -1;
    for (int k = 0; k < models.size(); ++k) {
        const auto& data = buckets[static_cast<std::size_t>(k)];
        if (data.pair_labels.empty()) continue;
        std::vector<PredictionPair> pairs;
        for (std::size_t i = 0; i < data.pair_labels.size(); ++i) {
            const auto link = hitting_params(models.stages[static_cast<std::size_t>(k)], data.pair_features[i]);
            pairs.emplace_back(predicted_time(link.params), data.pair_labels[i]);
        }
        const double m = mape(pairs);
        report.stage_mape[static_cast<std::size_t>(k)] = m;
        if (worst < 0 || m > report.stage_mape[static_cast<std::size_t>(worst)]) worst = k;
    }
    if (worst < 0) {
        report.reason = "no labeled ticks in the finished stream";
        return result;
    }
    report.worst_stage = worst + 1;
    const auto& worst_data = buckets[static_cast<std::size_t>(worst)];
    if (worst_data.points.size() < 2) {
        report.reason = "worst stage has fewer than two points in the stream";
        return result;
    }

    report.attempted = true;
    const int position = options.insert_after_worst ? worst + 1 : models.size();
    report.inserted_at = position + 1;

    ModelSet base = models;
    base.stages.insert(base.stages.begin() + position,
                       make_candidate(worst_data, models.stages[static_cast<std::size_t>(worst)],
                                      models.hyper.alpha, options.glasso));

    const auto reference = refresh_until_settled(models, finished, beta, options);
    const auto grown = refresh_until_settled(base, finished, beta, options);
    report.inner_iterations = grown.iterations;
    report.path_before = reference.path.stages();
    report.path_after = grown.path.stages();

    report.mape_before = replay_score(StreamModel(reference.models), finished, &reference.path).mape;
    report.mape_after = replay_score(StreamModel(grown.models), finished, &grown.path).mape;
    if (report.mape_after < report.mape_before) {
        report.adopted = true;
        report.reason = "candidate improved stream MAPE";
        result.models = grown.models;
        report.stages_after = result.models.size();
    } else {
        report.reason = "candidate did not improve stream MAPE";
    }
    return result;
}

}  // namespace timecast
