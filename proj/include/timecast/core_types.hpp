#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "timecast/errors.hpp"

namespace timecast {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// One multivariate reading of an instance at an integer tick.
struct Observation {
    Vector values;
    std::string instance_id;
    int tick = 0;
};

// All observations of one instance, ticks 1..n, plus the tick at which the
// event happened. n may be smaller than event_time when the record stops
// before the event.
class SensorSequence {
public:
    SensorSequence() = default;
    SensorSequence(std::string instance_id, std::vector<Observation> observations,
                   int event_time);

    // Rows of `values` become ticks 1..rows.
    static SensorSequence from_rows(std::string instance_id, const Matrix& values,
                                    int event_time);
    static SensorSequence from_rows(std::string instance_id, const Matrix& values);

    const std::string& instance_id() const noexcept { return instance_id_; }
    int event_time() const noexcept { return event_time_; }
    int length() const noexcept { return static_cast<int>(observations_.size()); }
    int dimension() const noexcept;

    const std::vector<Observation>& observations() const noexcept { return observations_; }
    // Zero-based position, i.e. tick index + 1.
    const Vector& at(int index) const { return observations_.at(static_cast<std::size_t>(index)).values; }

    // Remaining time for the observation at zero-based `index`.
    double remaining_time(int index) const noexcept {
        return static_cast<double>(event_time_ - (index + 1));
    }

    bool operator==(const SensorSequence& other) const;

private:
    std::string instance_id_;
    std::vector<Observation> observations_;
    int event_time_ = 0;
};

// tau = event_time - t, defined for 1 <= t < event_time.
double label_of(const SensorSequence& sequence, int tick);

struct LabeledCollection {
    std::vector<SensorSequence> sequences;
    int dimension = 0;

    LabeledCollection() = default;
    LabeledCollection(std::vector<SensorSequence> sequences);

    std::size_t size() const noexcept { return sequences.size(); }
    bool empty() const noexcept { return sequences.empty(); }
    long long total_ticks() const noexcept;
    void validate() const;

    bool operator==(const LabeledCollection& other) const = default;
};

struct HyperParams {
    double alpha = 1.0;
    double beta = 0.1;
    int k_init = 5;
    int window = 1;
    int max_iter = 50;
    double tol = 1e-4;

    void validate() const;
    bool operator==(const HyperParams&) const = default;
};

// Running count/mean/co-moment, updated one point at a time.
struct MomentStats {
    std::int64_t count = 0;
    Vector mean;
    Matrix comoment;

    static MomentStats empty(int dim);

    void add(const Vector& x);
    void merge(const MomentStats& other);
    // Maximum-likelihood covariance (denominator n).
    Matrix covariance() const;

    bool operator==(const MomentStats& other) const;
};

// Sufficient statistics for the affine link and the increment mean, kept so a
// stage can be refreshed online without revisiting its training points.
struct LinkStats {
    std::int64_t count = 0;
    Matrix gram;    // sum z z^T with z = [x; 1]
    Vector moment;  // sum z * tau
    double label_sum = 0.0;
    double inv_label_sum = 0.0;
    // sum |1/tau - increment_mean| at the time of the last fit
    double abs_dev_sum = 0.0;

    static LinkStats empty(int dim);
    void add(const Vector& x, double tau);
    void merge(const LinkStats& other);

    bool operator==(const LinkStats& other) const;
};

struct StageModel {
    Vector mean;
    Matrix precision;
    Vector link_weights;  // [A; b], tau_hat = A x + b
    double diffusion = 1.0;
    double increment_mean = 0.0;
    std::int64_t count = 0;
    MomentStats stats;
    LinkStats link_stats;
    // Set while the stage has no assigned points.
    bool stale = false;

    int dimension() const noexcept { return static_cast<int>(mean.size()); }
    double link(const Vector& x) const;

    // Identity descriptor, intercept-only link.
    static StageModel placeholder(int dim, double mean_label);

    bool operator==(const StageModel& other) const;
};

// Stage index per tick, zero-based internally, never decreasing.
class StageAssignmentPath {
public:
    StageAssignmentPath() = default;
    explicit StageAssignmentPath(std::vector<int> stages);

    static StageAssignmentPath from_one_based(const std::vector<int>& stages);

    const std::vector<int>& stages() const noexcept { return stages_; }
    std::vector<int> one_based() const;
    int size() const noexcept { return static_cast<int>(stages_.size()); }
    int operator[](int t) const { return stages_.at(static_cast<std::size_t>(t)); }
    int back() const { return stages_.back(); }
    bool empty() const noexcept { return stages_.empty(); }

    static bool is_monotone(const std::vector<int>& stages) noexcept;

    bool operator==(const StageAssignmentPath&) const = default;

private:
    std::vector<int> stages_;
};

struct ModelSet {
    std::vector<StageModel> stages;
    HyperParams hyper;
    int sensor_dim = 0;
    bool znormalize = false;

    int size() const noexcept { return static_cast<int>(stages.size()); }
    int feature_dim() const noexcept { return stages.empty() ? 0 : stages.front().dimension(); }
    void validate() const;

    bool operator==(const ModelSet& other) const = default;
};

// Eigen matrices have no operator== returning bool; compares shape and values.
bool same_values(const Matrix& a, const Matrix& b);
bool same_values(const Vector& a, const Vector& b);

}  // namespace timecast
