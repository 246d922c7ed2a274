#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "timecast/core_types.hpp"
#include "timecast/descriptor.hpp"
#include "timecast/predictor.hpp"

namespace timecast {

// Per-stream carry-over between ticks: the DP costs Gamma(k, t_c - 1) and the
// features seen so far, needed once the event happens.
struct StreamState {
    std::string instance_id;
    Vector gamma;
    int current_stage = -1;  // zero-based, -1 before the first tick
    int tick = 0;
    std::vector<Vector> history;
    std::size_t history_cap = 0;  // 0 keeps every feature
    bool history_truncated = false;
    std::uint64_t last_tick_ops = 0;

    // Keeps gamma aligned after a stage is inserted at zero-based `position`.
    void on_stage_inserted(int position);
    std::vector<Vector> drain_history();
};

struct PredictionOutput {
    std::string instance_id;
    int tick = 0;
    int stage = 0;  // zero-based
    FirstHittingParams params;
    double point_estimate = 0.0;
    double raw_link = 0.0;
    bool clamped = false;
    std::optional<std::vector<std::pair<double, double>>> survival_curve;
};

// ModelSet snapshot with descriptor scorers prepared once.
class StreamModel {
public:
    explicit StreamModel(ModelSet models);

    const ModelSet& models() const noexcept { return models_; }
    int size() const noexcept { return models_.size(); }
    double descriptor_loglik(int stage, const Vector& x) const {
        return scorers_[static_cast<std::size_t>(stage)](x);
    }

private:
    ModelSet models_;
    std::vector<GaussianScorer> scorers_;
};

// One step of the online DP over descriptor log-likelihoods followed by a
// forecast from the current stage's predictor.
std::pair<PredictionOutput, StreamState> adaptive_predict(StreamState state, const Vector& x,
                                                          const StreamModel& model);
std::pair<PredictionOutput, StreamState> adaptive_predict(StreamState state, const Vector& x,
                                                          const ModelSet& models);

StageModel welford_update(StageModel stage, const Vector& x);

// Causal replay of a finished sequence: MAPE over ticks with positive
// remaining time, and the count of clamped predictions.
struct ReplayScore {
    double mape = 0.0;
    std::vector<std::pair<double, double>> pairs;
    std::int64_t clamped = 0;
};
// With `absorbed`, the path under which the sequence's own labeled pairs were
// folded into the model: a tick scored by the stage that absorbed it uses that
// stage's link refit without the tick, so in-sample fits are not rewarded.
ReplayScore replay_score(const StreamModel& model, const SensorSequence& sequence,
                         const StageAssignmentPath* absorbed = nullptr);

struct OnlineOptions {
    bool insert_after_worst = true;  // otherwise append at the end
    int max_inner_iter = 10;
    GlassoConfig glasso;
};

struct UpdateReport {
    bool attempted = false;
    bool adopted = false;
    std::string reason;
    int worst_stage = 0;        // one-based, 0 when not attempted
    int inserted_at = 0;        // one-based position of the candidate
    int stages_before = 0;
    int stages_after = 0;
    int inner_iterations = 0;
    double mape_before = 0.0;  // held-out replay MAPE of the refreshed models
    double mape_after = 0.0;   // same, with the candidate
    std::vector<double> stage_mape;  // per existing stage, NaN when unassigned
    std::vector<int> path_before;    // zero-based stream assignment, refreshed models
    std::vector<int> path_after;     // zero-based stream assignment, with the candidate
};

struct OnlineUpdateResult {
    ModelSet models;
    UpdateReport report;
};

// Grows the model set by one stage when that lowers the finished stream's
// replay MAPE. Both the current set and the candidate set are refreshed on the
// stream before the comparison; on rejection the input models are returned.
OnlineUpdateResult online_model_update(const ModelSet& models, const SensorSequence& finished,
                                       const OnlineOptions& options = {});

}  // namespace timecast
