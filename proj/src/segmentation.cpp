#include "timecast/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "timecast/parallel.hpp"
#include "timecast/predictor.hpp"

namespace timecast {

namespace {

double relative_change(double previous, double current) {
    return std::abs(current - previous) / std::max(1.0, std::abs(previous));
}

std::vector<GaussianScorer> make_scorers(const ModelSet& models) {
    std::vector<GaussianScorer> scorers;
    scorers.reserve(models.stages.size());
    for (const auto& s : models.stages) scorers.emplace_back(s.mean, s.precision);
    return scorers;
}

Matrix cost_matrix(const SensorSequence& sequence, const ModelSet& models,
                   const std::vector<GaussianScorer>& scorers, double beta) {
    const int k_count = models.size();
    const int length = sequence.length();
    Matrix costs(k_count, length);
    for (int t = 0; t < length; ++t) {
        const Vector& x = sequence.at(t);
        const double tau = sequence.remaining_time(t);
        for (int k = 0; k < k_count; ++k) {
            double c = scorers[static_cast<std::size_t>(k)](x);
            if (beta != 0.0 && tau > 0.0) {
                c += beta * predictor_loglik(x, tau, models.stages[static_cast<std::size_t>(k)]);
            }
            costs(k, t) = c;
        }
    }
    return costs;
}

// Points are borrowed from the collection being fitted.
struct StagePoints {
    std::vector<const Vector*> points;
    std::vector<const Vector*> pair_features;
    std::vector<double> pair_labels;
};

std::vector<StagePoints> gather(const LabeledCollection& collection,
                                const std::vector<StageAssignmentPath>& assignments,
                                int stage_count) {
    if (assignments.size() != collection.size()) {
        throw ArgumentError("assignments must cover every sequence");
    }
    std::vector<StagePoints> out(static_cast<std::size_t>(stage_count));
    for (std::size_t v = 0; v < collection.size(); ++v) {
        const auto& seq = collection.sequences[v];
        const auto& path = assignments[v];
        if (path.size() != seq.length()) {
            throw ArgumentError("assignment length differs from sequence '" + seq.instance_id() + "'");
        }
        for (int t = 0; t < seq.length(); ++t) {
            const int k = path[t];
            if (k >= stage_count) throw ArgumentError("assignment refers to a missing stage");
            auto& bucket = out[static_cast<std::size_t>(k)];
            bucket.points.push_back(&seq.at(t));
            const double tau = seq.remaining_time(t);
            if (tau > 0.0) {
                bucket.pair_features.push_back(&seq.at(t));
                bucket.pair_labels.push_back(tau);
            }
        }
    }
    return out;
}

double predictor_block(const StagePoints& data, const StageModel& stage) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.pair_labels.size(); ++i) {
        total += predictor_loglik(*data.pair_features[i], data.pair_labels[i], stage);
    }
    return total;
}

double descriptor_block(const std::vector<const Vector*>& points, const Vector& mean,
                        const Matrix& precision, double alpha) {
    const GaussianScorer scorer(mean, precision);
    double total = 0.0;
    for (const Vector* p : points) total += scorer(*p);
    return total - alpha * off_diagonal_l1(precision);
}

double mean_label(const std::vector<double>& labels) {
    double sum = 0.0;
    for (double l : labels) sum += l;
    return labels.empty() ? 0.0 : sum / static_cast<double>(labels.size());
}

// Fits the predictor block of `stage` in place from its labeled pairs.
void fit_predictor(StageModel& stage, const StagePoints& data, int dim) {
    const auto n = data.pair_labels.size();
    if (n >= static_cast<std::size_t>(dim) + 2) {
        stage.link_weights = fit_link_from_stats(stage.link_stats).weights;
    } else {
        stage.link_weights = Vector::Zero(dim + 1);
        stage.link_weights(dim) = mean_label(data.pair_labels);
    }
    if (n >= 2) {
        const auto diff = fit_diffusion(data.pair_labels);
        stage.diffusion = diff.diffusion;
        stage.increment_mean = diff.increment_mean;
        stage.link_stats.abs_dev_sum = diff.abs_dev_sum;
    } else {
        stage.diffusion = kMinDiffusion;
        stage.increment_mean = 1.0 / data.pair_labels.front();
        stage.link_stats.abs_dev_sum = 0.0;
    }
}

}  // namespace

double point_cost(const Vector& x, double tau, const StageModel& stage, double beta) {
    const double descriptor = gaussian_loglik(x, stage.mean, stage.precision);
    if (beta == 0.0) return descriptor;
    return descriptor + beta * predictor_loglik(x, tau, stage);
}

Matrix point_cost_matrix(const SensorSequence& sequence, const ModelSet& models, double beta) {
    return cost_matrix(sequence, models, make_scorers(models), beta);
}

DpSolution solve_monotone_dp(const Matrix& costs) {
    const auto k_count = costs.rows();
    const auto length = costs.cols();
    if (k_count < 1 || length < 1) throw ArgumentError("DP needs at least one stage and one tick");

    DpSolution sol;
    sol.table.gamma.resize(k_count, length);
    sol.table.backptr.resize(k_count, length);
    sol.table.gamma.col(0) = costs.col(0);
    sol.table.backptr.col(0).setConstant(-1);
    for (Eigen::Index t = 1; t < length; ++t) {
        double best = -std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (Eigen::Index k = 0; k < k_count; ++k) {
            // Running max over k' <= k; strict comparison keeps the lower index on ties.
            if (sol.table.gamma(k, t - 1) > best) {
                best = sol.table.gamma(k, t - 1);
                best_k = static_cast<int>(k);
            }
            sol.table.gamma(k, t) = best + costs(k, t);
            sol.table.backptr(k, t) = best_k;
        }
    }
    int stage = 0;
    double optimum = sol.table.gamma(0, length - 1);
    for (Eigen::Index k = 1; k < k_count; ++k) {
        if (sol.table.gamma(k, length - 1) > optimum) {
            optimum = sol.table.gamma(k, length - 1);
            stage = static_cast<int>(k);
        }
    }
    std::vector<int> path(static_cast<std::size_t>(length));
    for (Eigen::Index t = length - 1; t >= 0; --t) {
        path[static_cast<std::size_t>(t)] = stage;
        if (t > 0) stage = sol.table.backptr(stage, t);
    }
    sol.path = StageAssignmentPath(std::move(path));
    sol.optimum = optimum;
    return sol;
}

StageAssignmentPath assign_stages_dp(const SensorSequence& sequence, const ModelSet& models,
                                     double beta) {
    return solve_monotone_dp(point_cost_matrix(sequence, models, beta)).path;
}

double total_objective(const LabeledCollection& collection, const ModelSet& models,
                       const std::vector<StageAssignmentPath>& assignments, double alpha,
                       double beta) {
    if (assignments.size() != collection.size()) {
        throw ArgumentError("assignments must cover every sequence");
    }
    const auto scorers = make_scorers(models);
    double total = 0.0;
    for (std::size_t v = 0; v < collection.size(); ++v) {
        const auto& seq = collection.sequences[v];
        const auto& path = assignments[v];
        if (path.size() != seq.length()) throw ArgumentError("assignment length mismatch");
        for (int t = 0; t < seq.length(); ++t) {
            const int k = path[t];
            if (k >= models.size()) throw ArgumentError("assignment refers to a missing stage");
            const Vector& x = seq.at(t);
            double c = scorers[static_cast<std::size_t>(k)](x);
            const double tau = seq.remaining_time(t);
            if (beta != 0.0 && tau > 0.0) {
                c += beta * predictor_loglik(x, tau, models.stages[static_cast<std::size_t>(k)]);
            }
            total += c;
        }
    }
    for (const auto& s : models.stages) total -= alpha * off_diagonal_l1(s.precision);
    return total;
}

StageUpdate update_stage_models(const LabeledCollection& collection,
                                const std::vector<StageAssignmentPath>& assignments,
                                int stage_count, const HyperParams& hyper,
                                const ModelSet* previous, const GlassoConfig& glasso) {
    if (stage_count < 1) throw ArgumentError("stage_count must be >= 1");
    if (previous != nullptr && previous->size() != stage_count) {
        throw ArgumentError("previous model set has a different stage count");
    }
    const int dim = collection.dimension;
    const auto buckets = gather(collection, assignments, stage_count);

    double all_label_sum = 0.0;
    std::size_t all_label_count = 0;
    for (const auto& b : buckets) {
        for (double l : b.pair_labels) all_label_sum += l;
        all_label_count += b.pair_labels.size();
    }
    const double fallback_label =
        all_label_count ? all_label_sum / static_cast<double>(all_label_count) : 1.0;

    StageUpdate update;
    update.models.hyper = hyper;
    update.models.sensor_dim = previous ? previous->sensor_dim : dim;
    update.models.znormalize = previous ? previous->znormalize : false;
    update.models.stages.resize(static_cast<std::size_t>(stage_count));
    update.stale.assign(static_cast<std::size_t>(stage_count), false);
    std::vector<int> failures(static_cast<std::size_t>(stage_count), 0);

    parallel_for(static_cast<std::size_t>(stage_count), [&](std::size_t k) {
        const auto& data = buckets[k];
        const StageModel* old = previous ? &previous->stages[k] : nullptr;
        StageModel& stage = update.models.stages[k];

        if (data.points.empty()) {
            stage = old ? *old : StageModel::placeholder(dim, fallback_label);
            stage.stale = true;
            stage.count = 0;
            update.stale[k] = true;
            return;
        }

        stage.stats = MomentStats::empty(dim);
        for (const Vector* p : data.points) stage.stats.add(*p);
        stage.link_stats = LinkStats::empty(dim);
        for (std::size_t i = 0; i < data.pair_labels.size(); ++i) {
            stage.link_stats.add(*data.pair_features[i], data.pair_labels[i]);
        }
        stage.count = stage.stats.count;
        stage.stale = false;

        // Descriptor block.
        stage.mean = stage.stats.mean;
        bool have_precision = true;
        try {
            stage.precision =
                fit_precision(EmpiricalStats::from_moments(stage.stats), hyper.alpha, glasso);
        } catch (const ConvergenceError&) {
            ++failures[k];
            if (old) {
                stage.precision = old->precision;
            } else {
                stage.precision = fit_precision(EmpiricalStats::from_moments(stage.stats), 0.0, glasso);
            }
            have_precision = false;
        }
        if (old && have_precision) {
            const double fresh = descriptor_block(data.points, stage.mean, stage.precision, hyper.alpha);
            const double kept =
                descriptor_block(data.points, old->mean, old->precision, hyper.alpha);
            if (kept > fresh) {
                stage.mean = old->mean;
                stage.precision = old->precision;
            }
        }

        // Predictor block.
        if (data.pair_labels.empty()) {
            const StageModel basis = old ? *old : StageModel::placeholder(dim, fallback_label);
            stage.link_weights = basis.link_weights;
            stage.diffusion = basis.diffusion;
            stage.increment_mean = basis.increment_mean;
            return;
        }
        fit_predictor(stage, data, dim);
        if (old && hyper.beta != 0.0 && predictor_block(data, *old) > predictor_block(data, stage)) {
            stage.link_weights = old->link_weights;
            stage.diffusion = old->diffusion;
            stage.increment_mean = old->increment_mean;
        }
    });

    for (int f : failures) update.glasso_failures += f;
    return update;
}

std::vector<StageAssignmentPath> initial_assignments(const LabeledCollection& collection,
                                                     int k_init,
                                                     std::optional<std::uint64_t> seed) {
    if (k_init < 1) throw ArgumentError("k_init must be >= 1");
    std::mt19937_64 rng(seed.value_or(0));
    std::vector<StageAssignmentPath> out;
    out.reserve(collection.size());
    for (const auto& seq : collection.sequences) {
        const int length = seq.length();
        std::vector<int> path(static_cast<std::size_t>(length), 0);
        if (length >= k_init && k_init > 1) {
            std::vector<int> cuts(static_cast<std::size_t>(k_init + 1));
            cuts.front() = 0;
            cuts.back() = length;
            for (int j = 1; j < k_init; ++j) {
                cuts[static_cast<std::size_t>(j)] =
                    static_cast<int>((static_cast<long long>(j) * length) / k_init);
            }
            if (seed) {
                const int reach = static_cast<int>(0.1 * static_cast<double>(length) / k_init);
                for (int j = 1; j < k_init && reach > 0; ++j) {
                    const auto span = static_cast<std::uint64_t>(2 * reach + 1);
                    const int offset = static_cast<int>(rng() % span) - reach;
                    int& c = cuts[static_cast<std::size_t>(j)];
                    c = std::clamp(c + offset, cuts[static_cast<std::size_t>(j - 1)] + 1,
                                   length - (k_init - j));
                }
            }
            for (int j = 0; j < k_init; ++j) {
                for (int t = cuts[static_cast<std::size_t>(j)]; t < cuts[static_cast<std::size_t>(j + 1)]; ++t) {
                    path[static_cast<std::size_t>(t)] = j;
                }
            }
        }
        out.emplace_back(std::move(path));
    }
    return out;
}

Initialization initialize(const LabeledCollection& collection, const HyperParams& hyper,
                          std::optional<std::uint64_t> seed, const GlassoConfig& glasso) {
    if (collection.empty()) throw ArgumentError("cannot initialize from an empty collection");
    Initialization init;
    init.assignments = initial_assignments(collection, hyper.k_init, seed);
    init.models =
        update_stage_models(collection, init.assignments, hyper.k_init, hyper, nullptr, glasso).models;
    return init;
}

namespace {

std::vector<StageAssignmentPath> assign_all(const LabeledCollection& collection,
                                            const ModelSet& models, double beta) {
    const auto scorers = make_scorers(models);
    std::vector<StageAssignmentPath> out(collection.size());
    parallel_for(collection.size(), [&](std::size_t v) {
        const auto& seq = collection.sequences[v];
        out[v] = solve_monotone_dp(cost_matrix(seq, models, scorers, beta)).path;
    });
    return out;
}

std::vector<std::int64_t> stage_counts(const std::vector<StageAssignmentPath>& assignments,
                                       int stage_count) {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(stage_count), 0);
    for (const auto& path : assignments) {
        for (int s : path.stages()) ++counts[static_cast<std::size_t>(s)];
    }
    return counts;
}

}  // namespace

LearnResult learn(const LabeledCollection& collection, const HyperParams& hyper,
                  const LearnOptions& options) {
    hyper.validate();
    if (collection.empty()) throw ArgumentError("learn: empty collection");
    collection.validate();

    auto init = initialize(collection, hyper, options.seed, options.glasso);
    ModelSet models = std::move(init.models);
    auto assignments = std::move(init.assignments);

    LearnResult result;
    auto& report = result.report;
    std::vector<int> stale_age(static_cast<std::size_t>(models.size()), 0);
    for (std::size_t k = 0; k < models.stages.size(); ++k) stale_age[k] = models.stages[k].stale ? 1 : 0;

    double objective = total_objective(collection, models, assignments, hyper.alpha, hyper.beta);
    report.objective_trace.push_back(objective);
    report.half_step_trace.push_back(objective);

    for (int iter = 1; iter <= hyper.max_iter; ++iter) {
        assignments = assign_all(collection, models, hyper.beta);
        report.half_step_trace.push_back(
            total_objective(collection, models, assignments, hyper.alpha, hyper.beta));

        auto update =
            update_stage_models(collection, assignments, models.size(), hyper, &models, options.glasso);
        report.glasso_failures += update.glasso_failures;
        models = std::move(update.models);

        if (options.prune_empty_stages) {
            std::vector<bool> drop(static_cast<std::size_t>(models.size()), false);
            bool any = false;
            for (std::size_t k = 0; k < drop.size(); ++k) {
                auto& age = stale_age[k];
                age = update.stale[k] ? age + 1 : 0;
                // A stale stage has no points, so at least one stage always survives.
                drop[k] = age >= 2;
                any = any || drop[k];
            }
            if (any) {
                std::vector<int> remap(drop.size(), -1);
                std::vector<StageModel> kept;
                std::vector<int> kept_age;
                for (std::size_t k = 0; k < drop.size(); ++k) {
                    if (drop[k]) {
                        report.pruned_stages.push_back(static_cast<int>(k) + 1);
                        continue;
                    }
                    remap[k] = static_cast<int>(kept.size());
                    kept.push_back(std::move(models.stages[k]));
                    kept_age.push_back(stale_age[k]);
                }
                models.stages = std::move(kept);
                stale_age = std::move(kept_age);
                for (auto& path : assignments) {
                    std::vector<int> mapped(path.stages());
                    for (int& s : mapped) s = remap[static_cast<std::size_t>(s)];
                    path = StageAssignmentPath(std::move(mapped));
                }
            }
        }

        const double next = total_objective(collection, models, assignments, hyper.alpha, hyper.beta);
        report.half_step_trace.push_back(next);
        report.objective_trace.push_back(next);
        report.iterations = iter;
        const double change = relative_change(objective, next);
        objective = next;
        if (change < hyper.tol) {
            report.converged = true;
            break;
        }
    }

    // Returned paths are the optimal ones for the returned models.
    assignments = assign_all(collection, models, hyper.beta);
    report.stage_counts = stage_counts(assignments, models.size());
    result.models = std::move(models);
    result.assignments = std::move(assignments);
    return result;
}

}  // namespace timecast
