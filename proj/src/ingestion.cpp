#include "timecast/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace timecast {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::optional<long long> parse_integer(const std::string& s) {
    long long v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

// Numeric ids sort numerically and before any other id.
bool instance_less(const std::string& a, const std::string& b) {
    const auto na = parse_integer(a);
    const auto nb = parse_integer(b);
    if (na && nb) return *na < *nb;
    if (na.has_value() != nb.has_value()) return na.has_value();
    return a < b;
}

struct Row {
    long long tick;
    std::size_t line;
    Vector values;
    std::optional<long long> event_time;
};

}  // namespace

LabeledCollection load_collection(const DatasetSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw DataError("cannot open dataset '" + spec.path + "'");
    return load_collection(in, spec);
}

LabeledCollection load_collection(std::istream& in, const DatasetSpec& spec) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("dataset is empty: missing header row");
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t id_col = column(spec.instance_column);
    const std::size_t tick_col = column(spec.tick_column);
    std::optional<std::size_t> event_col;
    if (spec.event_time_column) event_col = column(*spec.event_time_column);

    std::vector<std::size_t> sensor_cols;
    std::vector<std::string> sensor_names;
    if (spec.sensor_columns.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == id_col || c == tick_col || (event_col && c == *event_col)) continue;
            sensor_cols.push_back(c);
            sensor_names.push_back(header[c]);
        }
    } else {
        for (const auto& name : spec.sensor_columns) {
            sensor_cols.push_back(column(name));
            sensor_names.push_back(name);
        }
    }
    if (sensor_cols.empty()) throw SchemaError("dataset has no sensor columns");

    std::map<std::string, std::vector<Row>, decltype(&instance_less)> rows(&instance_less);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, found " +
                            std::to_string(cells.size()));
        }
        const auto& id = cells[id_col];
        const auto tick = parse_integer(cells[tick_col]);
        if (!tick) {
            throw DataError("line " + std::to_string(line_no) + ": instance '" + id +
                            "' has a non-integer tick '" + cells[tick_col] + "'");
        }
        Row row{*tick, line_no, Vector(static_cast<Eigen::Index>(sensor_cols.size())), std::nullopt};
        for (std::size_t j = 0; j < sensor_cols.size(); ++j) {
            const auto v = parse_real(cells[sensor_cols[j]]);
            if (!v || !std::isfinite(*v)) {
                std::ostringstream msg;
                msg << "instance '" << id << "', tick " << *tick << ", column '" << sensor_names[j]
                    << "': missing or non-finite value '" << cells[sensor_cols[j]] << "'";
                throw DataError(msg.str());
            }
            row.values(static_cast<Eigen::Index>(j)) = *v;
        }
        if (event_col) {
            const auto e = parse_integer(cells[*event_col]);
            if (!e) {
                throw DataError("line " + std::to_string(line_no) + ": instance '" + id +
                                "' has a non-integer event time");
            }
            row.event_time = *e;
        }
        rows[id].push_back(std::move(row));
    }

    std::vector<SensorSequence> sequences;
    for (auto& [id, inst_rows] : rows) {
        std::stable_sort(inst_rows.begin(), inst_rows.end(),
                         [](const Row& a, const Row& b) { return a.tick < b.tick; });
        std::vector<Observation> obs;
        obs.reserve(inst_rows.size());
        std::optional<long long> event_time;
        for (std::size_t i = 0; i < inst_rows.size(); ++i) {
            const auto& r = inst_rows[i];
            if (r.tick != static_cast<long long>(i) + 1) {
                std::ostringstream msg;
                msg << "instance '" << id << "', line " << r.line << ": tick " << r.tick
                    << (i > 0 && r.tick == inst_rows[i - 1].tick ? " is duplicated"
                                                                 : " breaks the contiguous 1..T ordering");
                throw DataError(msg.str());
            }
            if (r.event_time) {
                if (event_time && *event_time != *r.event_time) {
                    throw DataError("instance '" + id + "' has conflicting event times");
                }
                event_time = r.event_time;
            }
            obs.push_back(Observation{r.values, id, static_cast<int>(r.tick)});
        }
        const int t_event = static_cast<int>(event_time.value_or(static_cast<long long>(obs.size())));
        SensorSequence seq(id, std::move(obs), t_event);
        if (spec.znormalize) seq = znormalize(seq).sequence;
        sequences.push_back(std::move(seq));
    }
    if (sequences.empty()) throw DataError("dataset has no rows");
    return LabeledCollection(std::move(sequences));
}

void save_collection(const LabeledCollection& collection, std::ostream& out) {
    const bool explicit_event = std::any_of(collection.sequences.begin(), collection.sequences.end(),
                                            [](const SensorSequence& s) { return s.event_time() != s.length(); });
    out << "instance_id,tick";
    for (int j = 0; j < collection.dimension; ++j) out << ",sensor_" << (j + 1);
    if (explicit_event) out << ",event_time";
    out << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& seq : collection.sequences) {
        for (const auto& obs : seq.observations()) {
            out << seq.instance_id() << ',' << obs.tick;
            for (Eigen::Index j = 0; j < obs.values.size(); ++j) out << ',' << obs.values(j);
            if (explicit_event) out << ',' << seq.event_time();
            out << '\n';
        }
    }
}

ZNormResult znormalize(const SensorSequence& sequence) {
    const int length = sequence.length();
    const int dim = sequence.dimension();
    Matrix values(length, dim);
    for (int t = 0; t < length; ++t) values.row(t) = sequence.at(t).transpose();
    ZNormResult result;
    for (int j = 0; j < dim; ++j) {
        auto col = values.col(j);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (sd < 1e-12) {
            col.setZero();
            result.constant_sensors.push_back(j);
        } else {
            col = (col.array() - mean) / sd;
        }
    }
    result.sequence = SensorSequence::from_rows(sequence.instance_id(), values, sequence.event_time());
    return result;
}

SensorSequence windowize(const SensorSequence& sequence, int window) {
    if (window < 1) throw ArgumentError("window must be >= 1");
    if (window == 1) return sequence;
    const int length = sequence.length();
    const int dim = sequence.dimension();
    Matrix features(length, dim * window);
    for (int t = 0; t < length; ++t) {
        for (int w = 0; w < window; ++w) {
            const int src = std::max(0, t - (window - 1) + w);
            features.row(t).segment(w * dim, dim) = sequence.at(src).transpose();
        }
    }
    return SensorSequence::from_rows(sequence.instance_id(), features, sequence.event_time());
}

WindowBuffer::WindowBuffer(int window) : window_(window) {
    if (window < 1) throw ArgumentError("window must be >= 1");
}

Vector WindowBuffer::push(const Vector& observation) {
    if (recent_.empty()) {
        recent_.assign(static_cast<std::size_t>(window_), observation);
    } else {
        recent_.pop_front();
        recent_.push_back(observation);
    }
    const auto dim = observation.size();
    Vector feature(dim * window_);
    for (int w = 0; w < window_; ++w) feature.segment(w * dim, dim) = recent_[static_cast<std::size_t>(w)];
    return feature;
}

int auto_window(const LabeledCollection& collection) {
    if (collection.empty()) return 1;
    const double mean_len = static_cast<double>(collection.total_ticks()) / static_cast<double>(collection.size());
    return std::max(1, static_cast<int>(std::lround(0.10 * mean_len)));
}

LabeledCollection prepare_features(const LabeledCollection& raw, int window, bool znorm) {
    std::vector<SensorSequence> seqs;
    seqs.reserve(raw.size());
    for (const auto& s : raw.sequences) {
        seqs.push_back(windowize(znorm ? znormalize(s).sequence : s, window));
    }
    return LabeledCollection(std::move(seqs));
}

void SyntheticSpec::validate() const {
    if (n_instances < 1) throw ArgumentError("synthetic spec needs n_instances >= 1");
    if (stages.empty()) throw ArgumentError("synthetic spec needs at least one stage");
    const auto dim = stages.front().mean.size();
    for (std::size_t k = 0; k < stages.size(); ++k) {
        const auto& s = stages[k];
        const std::string where = "synthetic stage " + std::to_string(k + 1);
        if (s.mean.size() != dim || s.precision.rows() != dim || s.precision.cols() != dim) {
            throw ArgumentError(where + ": dimension mismatch");
        }
        if (s.drift.size() != 0 && s.drift.size() != dim) throw ArgumentError(where + ": drift dimension mismatch");
        if (s.min_duration < 1 || s.max_duration < s.min_duration) {
            throw ArgumentError(where + ": durations must satisfy 1 <= min <= max");
        }
        if (!s.precision.isApprox(s.precision.transpose(), 1e-12)) {
            throw ArgumentError(where + ": precision is not symmetric");
        }
        Eigen::LLT<Matrix> llt(s.precision);
        if (llt.info() != Eigen::Success) throw ArgumentError(where + ": precision is not positive definite");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const auto dim = spec.stages.front().mean.size();
    std::vector<Matrix> factors;
    for (const auto& s : spec.stages) {
        const Matrix cov = s.precision.llt().solve(Matrix::Identity(dim, dim));
        factors.push_back(Eigen::LLT<Matrix>(0.5 * (cov + cov.transpose())).matrixL());
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SyntheticData data;
    std::vector<SensorSequence> seqs;
    for (int v = 0; v < spec.n_instances; ++v) {
        std::vector<int> durations;
        int total = 0;
        for (const auto& s : spec.stages) {
            const auto span = static_cast<std::uint64_t>(s.max_duration - s.min_duration + 1);
            durations.push_back(s.min_duration + static_cast<int>(rng() % span));
            total += durations.back();
        }
        Matrix values(total, dim);
        std::vector<int> truth;
        truth.reserve(static_cast<std::size_t>(total));
        int row = 0;
        for (std::size_t k = 0; k < spec.stages.size(); ++k) {
            const auto& s = spec.stages[k];
            for (int i = 0; i < durations[k]; ++i, ++row) {
                Vector z(dim);
                for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(rng);
                Vector x = s.mean + factors[k] * z;
                if (s.drift.size() == dim) x += s.drift * static_cast<double>(i);
                values.row(row) = x.transpose();
                truth.push_back(static_cast<int>(k));
            }
        }
        seqs.push_back(SensorSequence::from_rows(spec.id_prefix + std::to_string(v + 1), values, total));
        data.truth.emplace_back(std::move(truth));
    }
    data.collection = LabeledCollection(std::move(seqs));
    return data;
}

}  // namespace timecast
