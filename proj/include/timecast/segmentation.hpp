#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "timecast/core_types.hpp"
#include "timecast/descriptor.hpp"

namespace timecast {

// Gamma(k, t) and the predecessor stage chosen for each cell.
struct DpTable {
    Matrix gamma;               // K x T
    Eigen::MatrixXi backptr;    // K x T, -1 in the first column
};

struct DpSolution {
    StageAssignmentPath path;
    double optimum = 0.0;
    DpTable table;
};

struct FitReport {
    std::vector<double> objective_trace;  // entry 0 is the initial objective
    std::vector<double> half_step_trace;  // after every assignment and model update
    int iterations = 0;
    bool converged = false;
    std::vector<std::int64_t> stage_counts;
    std::vector<int> pruned_stages;  // one-based indices at the time of pruning
    int glasso_failures = 0;
};

// Descriptor log-likelihood plus beta times the predictor term.
double point_cost(const Vector& x, double tau, const StageModel& stage, double beta);

// K x T matrix of per-tick costs. The predictor term is dropped at ticks whose
// remaining time is zero.
Matrix point_cost_matrix(const SensorSequence& sequence, const ModelSet& models, double beta);

// Best non-decreasing path through a K x T cost matrix. Ties go to the lower
// stage, both for predecessors and for the final stage.
DpSolution solve_monotone_dp(const Matrix& costs);

StageAssignmentPath assign_stages_dp(const SensorSequence& sequence, const ModelSet& models,
                                     double beta);

double total_objective(const LabeledCollection& collection, const ModelSet& models,
                       const std::vector<StageAssignmentPath>& assignments, double alpha,
                       double beta);

struct StageUpdate {
    ModelSet models;
    std::vector<bool> stale;
    int glasso_failures = 0;
};

// Refits every stage from the points assigned to it. With `previous`, a stage
// that receives no points keeps its parameters, and a refit descriptor or
// predictor block is only taken when it does not lower that block's share of
// the objective.
StageUpdate update_stage_models(const LabeledCollection& collection,
                                const std::vector<StageAssignmentPath>& assignments,
                                int stage_count, const HyperParams& hyper,
                                const ModelSet* previous = nullptr,
                                const GlassoConfig& glasso = {});

struct Initialization {
    ModelSet models;
    std::vector<StageAssignmentPath> assignments;
};

// Equal contiguous blocks per sequence; with a seed, each cut moves by up to
// 10% of the block length.
std::vector<StageAssignmentPath> initial_assignments(const LabeledCollection& collection,
                                                     int k_init,
                                                     std::optional<std::uint64_t> seed);

Initialization initialize(const LabeledCollection& collection, const HyperParams& hyper,
                          std::optional<std::uint64_t> seed = std::nullopt,
                          const GlassoConfig& glasso = {});

struct LearnOptions {
    std::optional<std::uint64_t> seed;
    bool prune_empty_stages = true;
    GlassoConfig glasso;
};

struct LearnResult {
    ModelSet models;
    std::vector<StageAssignmentPath> assignments;
    FitReport report;
};

LearnResult learn(const LabeledCollection& collection, const HyperParams& hyper,
                  const LearnOptions& options = {});

}  // namespace timecast
