#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "timecast/core_types.hpp"

namespace timecast {

// Long-format CSV: one row per (instance, tick) with one column per sensor.
struct DatasetSpec {
    std::string path;
    std::string instance_column = "instance_id";
    std::string tick_column = "tick";
    std::vector<std::string> sensor_columns;  // empty: every other column
    std::optional<std::string> event_time_column;
    bool znormalize = false;
};

LabeledCollection load_collection(const DatasetSpec& spec);
LabeledCollection load_collection(std::istream& in, const DatasetSpec& spec);

// Writes the long format read by load_collection. An event_time column is
// added when some sequence ends before its event.
void save_collection(const LabeledCollection& collection, std::ostream& out);

struct ZNormResult {
    SensorSequence sequence;
    std::vector<int> constant_sensors;  // zero-based sensor indices mapped to 0
};

// Per-sensor (x - mean) / std over the sequence, std with denominator n.
ZNormResult znormalize(const SensorSequence& sequence);

// Tick t becomes [x_{t-m+1}, ..., x_t]; ticks before the window is full repeat
// the first observation.
SensorSequence windowize(const SensorSequence& sequence, int window);

// Incremental counterpart of windowize for streams.
class WindowBuffer {
public:
    explicit WindowBuffer(int window);
    Vector push(const Vector& observation);

private:
    int window_;
    std::deque<Vector> recent_;
};

// round(0.1 * mean length), at least 1.
int auto_window(const LabeledCollection& collection);

// Windowed (and optionally z-normalized) feature sequences.
LabeledCollection prepare_features(const LabeledCollection& raw, int window, bool znorm);

struct SyntheticStage {
    Vector mean;
    Matrix precision;
    Vector drift;  // per-tick shift of the mean inside the stage; empty for none
    int min_duration = 1;
    int max_duration = 1;
};

struct SyntheticSpec {
    int n_instances = 1;
    std::vector<SyntheticStage> stages;
    std::uint64_t seed = 0;
    std::string id_prefix = "s";

    void validate() const;
};

struct SyntheticData {
    LabeledCollection collection;
    std::vector<StageAssignmentPath> truth;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace timecast
