#include "timecast/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace timecast {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

bool same_values(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same_values(const Vector& a, const Vector& b) {
    return a.size() == b.size() && (a.size() == 0 || a == b);
}

SensorSequence::SensorSequence(std::string instance_id, std::vector<Observation> observations,
                               int event_time)
    : instance_id_(std::move(instance_id)),
      observations_(std::move(observations)),
      event_time_(event_time) {
    if (observations_.empty()) {
        throw ArgumentError("sequence '" + instance_id_ + "' has no observations");
    }
    const auto dim = observations_.front().values.size();
    if (dim == 0) {
        throw ArgumentError("sequence '" + instance_id_ + "' has zero-dimensional observations");
    }
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        auto& obs = observations_[i];
        if (obs.tick != static_cast<int>(i) + 1) {
            std::ostringstream msg;
            msg << "sequence '" << instance_id_ << "': tick " << obs.tick << " at position " << i
                << " breaks the contiguous 1..T ordering";
            throw DataError(msg.str());
        }
        if (obs.values.size() != dim) {
            throw ArgumentError("sequence '" + instance_id_ + "' mixes observation dimensions");
        }
        if (!all_finite(obs.values)) {
            std::ostringstream msg;
            msg << "sequence '" << instance_id_ << "': non-finite value at tick " << obs.tick;
            throw DataError(msg.str());
        }
        obs.instance_id = instance_id_;
    }
    if (event_time_ < length()) {
        std::ostringstream msg;
        msg << "sequence '" << instance_id_ << "': event time " << event_time_
            << " precedes the last tick " << length();
        throw DataError(msg.str());
    }
}

SensorSequence SensorSequence::from_rows(std::string instance_id, const Matrix& values,
                                         int event_time) {
    std::vector<Observation> obs;
    obs.reserve(static_cast<std::size_t>(values.rows()));
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        obs.push_back(Observation{values.row(r).transpose(), instance_id, static_cast<int>(r) + 1});
    }
    return SensorSequence(std::move(instance_id), std::move(obs), event_time);
}

SensorSequence SensorSequence::from_rows(std::string instance_id, const Matrix& values) {
    return from_rows(std::move(instance_id), values, static_cast<int>(values.rows()));
}

int SensorSequence::dimension() const noexcept {
    return observations_.empty() ? 0 : static_cast<int>(observations_.front().values.size());
}

bool SensorSequence::operator==(const SensorSequence& other) const {
    if (instance_id_ != other.instance_id_ || event_time_ != other.event_time_ ||
        observations_.size() != other.observations_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        if (observations_[i].tick != other.observations_[i].tick ||
            !same_values(observations_[i].values, other.observations_[i].values)) {
            return false;
        }
    }
    return true;
}

double label_of(const SensorSequence& sequence, int tick) {
    if (tick < 1 || tick >= sequence.event_time()) {
        std::ostringstream msg;
        msg << "tick " << tick << " outside [1, " << sequence.event_time() - 1
            << "] for instance '" << sequence.instance_id() << "'";
        throw RangeError(msg.str());
    }
    return static_cast<double>(sequence.event_time() - tick);
}

LabeledCollection::LabeledCollection(std::vector<SensorSequence> seqs)
    : sequences(std::move(seqs)), dimension(sequences.empty() ? 0 : sequences.front().dimension()) {
    validate();
}

long long LabeledCollection::total_ticks() const noexcept {
    long long total = 0;
    for (const auto& s : sequences) total += s.length();
    return total;
}

void LabeledCollection::validate() const {
    for (const auto& s : sequences) {
        if (s.dimension() != dimension) {
            throw ArgumentError("sequence '" + s.instance_id() + "' has dimension " +
                                std::to_string(s.dimension()) + ", collection expects " +
                                std::to_string(dimension));
        }
    }
}

void HyperParams::validate() const {
    if (!(alpha >= 0.0)) throw ArgumentError("alpha must be >= 0");
    if (!(beta >= 0.0)) throw ArgumentError("beta must be >= 0");
    if (k_init < 1) throw ArgumentError("k_init must be >= 1");
    if (window < 1) throw ArgumentError("window must be >= 1");
    if (max_iter < 1) throw ArgumentError("max_iter must be >= 1");
    if (!(tol > 0.0)) throw ArgumentError("tol must be > 0");
}

MomentStats MomentStats::empty(int dim) {
    return MomentStats{0, Vector::Zero(dim), Matrix::Zero(dim, dim)};
}

void MomentStats::add(const Vector& x) {
    ++count;
    const Eigen::Index d = x.size();
    const double inv = 1.0 / static_cast<double>(count);
    // (x - new mean) = (1 - 1/n) (x - old mean); loops avoid temporaries.
    const double shrink = 1.0 - inv;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double dj = (x(j) - mean(j)) * shrink;
        for (Eigen::Index i = 0; i < d; ++i) comoment(i, j) += (x(i) - mean(i)) * dj;
    }
    for (Eigen::Index j = 0; j < d; ++j) mean(j) += (x(j) - mean(j)) * inv;
}

void MomentStats::merge(const MomentStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(count);
    const double nb = static_cast<double>(other.count);
    const double n = na + nb;
    const Vector delta = other.mean - mean;
    comoment += other.comoment + delta * delta.transpose() * (na * nb / n);
    mean += delta * (nb / n);
    count += other.count;
}

Matrix MomentStats::covariance() const {
    if (count == 0) return Matrix::Zero(mean.size(), mean.size());
    return comoment / static_cast<double>(count);
}

bool MomentStats::operator==(const MomentStats& other) const {
    return count == other.count && same_values(mean, other.mean) &&
           same_values(comoment, other.comoment);
}

LinkStats LinkStats::empty(int dim) {
    LinkStats s;
    s.gram = Matrix::Zero(dim + 1, dim + 1);
    s.moment = Vector::Zero(dim + 1);
    return s;
}

void LinkStats::add(const Vector& x, double tau) {
    const auto d = x.size();
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) gram(i, j) += x(i) * x(j);
        gram(d, j) += x(j);
        gram(j, d) += x(j);
        moment(j) += x(j) * tau;
    }
    gram(d, d) += 1.0;
    moment(d) += tau;
    label_sum += tau;
    inv_label_sum += 1.0 / tau;
    ++count;
}

void LinkStats::merge(const LinkStats& other) {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    gram += other.gram;
    moment += other.moment;
    label_sum += other.label_sum;
    inv_label_sum += other.inv_label_sum;
    abs_dev_sum += other.abs_dev_sum;
    count += other.count;
}

bool LinkStats::operator==(const LinkStats& other) const {
    return count == other.count && same_values(gram, other.gram) &&
           same_values(moment, other.moment) && label_sum == other.label_sum &&
           inv_label_sum == other.inv_label_sum && abs_dev_sum == other.abs_dev_sum;
}

double StageModel::link(const Vector& x) const {
    const auto d = x.size();
    return link_weights.head(d).dot(x) + link_weights(d);
}

StageModel StageModel::placeholder(int dim, double mean_label) {
    StageModel s;
    s.mean = Vector::Zero(dim);
    s.precision = Matrix::Identity(dim, dim);
    s.link_weights = Vector::Zero(dim + 1);
    s.link_weights(dim) = mean_label;
    s.diffusion = 1.0;
    s.increment_mean = mean_label > 0.0 ? 1.0 / mean_label : 0.0;
    s.count = 0;
    s.stats = MomentStats::empty(dim);
    s.link_stats = LinkStats::empty(dim);
    s.stale = true;
    return s;
}

bool StageModel::operator==(const StageModel& other) const {
    return same_values(mean, other.mean) && same_values(precision, other.precision) &&
           same_values(link_weights, other.link_weights) && diffusion == other.diffusion &&
           increment_mean == other.increment_mean && count == other.count &&
           stats == other.stats && link_stats == other.link_stats && stale == other.stale;
}

StageAssignmentPath::StageAssignmentPath(std::vector<int> stages) : stages_(std::move(stages)) {
    if (!is_monotone(stages_)) {
        throw ArgumentError("stage assignment path must be non-decreasing and non-negative");
    }
}

StageAssignmentPath StageAssignmentPath::from_one_based(const std::vector<int>& stages) {
    std::vector<int> zero(stages.size());
    std::transform(stages.begin(), stages.end(), zero.begin(), [](int s) { return s - 1; });
    return StageAssignmentPath(std::move(zero));
}

std::vector<int> StageAssignmentPath::one_based() const {
    std::vector<int> out(stages_.size());
    std::transform(stages_.begin(), stages_.end(), out.begin(), [](int s) { return s + 1; });
    return out;
}

bool StageAssignmentPath::is_monotone(const std::vector<int>& stages) noexcept {
    if (!stages.empty() && stages.front() < 0) return false;
    return std::is_sorted(stages.begin(), stages.end());
}

void ModelSet::validate() const {
    if (stages.empty()) throw ArgumentError("model set has no stages");
    hyper.validate();
    const int dim = feature_dim();
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const auto& s = stages[k];
        if (s.dimension() != dim || s.precision.rows() != dim || s.precision.cols() != dim ||
            s.link_weights.size() != dim + 1) {
            throw ArgumentError("stage " + std::to_string(k + 1) + " has inconsistent dimensions");
        }
        if (!(s.diffusion > 0.0)) {
            throw ArgumentError("stage " + std::to_string(k + 1) + " has non-positive diffusion");
        }
    }
}

}  // namespace timecast
