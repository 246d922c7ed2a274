// timecast command-line entry point: train, predict, evaluate, synth, plot-data.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "timecast/ingestion.hpp"
#include "timecast/pipeline.hpp"
#include "timecast/predictor.hpp"
#include "timecast/segmentation.hpp"
#include "timecast/serialization.hpp"
#include "timecast/streaming.hpp"

namespace fs = std::filesystem;
using namespace timecast;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kIo = 3, kNumeric = 4 };

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require_readable(const std::string& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw IoError("cannot read '" + path + "'");
}

void write_output(const std::string& path, const std::string& content) {
    try {
        write_file_atomic(path, content);
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
}

std::string default_report_path(const std::string& model_path) {
    fs::path p(model_path);
    return (p.parent_path() / (p.stem().string() + ".fit.json")).string();
}

int parse_window(const std::string& text, const LabeledCollection& raw) {
    if (text == "auto") return auto_window(raw);
    std::size_t used = 0;
    int value = 0;
    try {
        value = std::stoi(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || value < 1) throw ArgumentError("--window must be a positive integer or 'auto'");
    return value;
}

LabeledCollection load_csv(const std::string& path) {
    require_readable(path);
    DatasetSpec spec;
    spec.path = path;
    return load_collection(spec);
}

ModelSet load_model(const std::string& path) {
    require_readable(path);
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw SchemaError("'" + path + "' is not valid JSON: " + e.what());
    }
    return model_set_from_json(j);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::string out;
    std::string report;
    std::string window = "auto";
    HyperParams hyper;
    std::uint64_t seed = 0;
    bool no_znorm = false;
};

int run_train(const TrainArgs& a) {
    const auto raw = load_csv(a.data);
    HyperParams hyper = a.hyper;
    hyper.window = parse_window(a.window, raw);
    hyper.validate();
    const bool znorm = !a.no_znorm;
    const auto features = prepare_features(raw, hyper.window, znorm);

    LearnOptions options;
    options.seed = a.seed;
    auto result = learn(features, hyper, options);
    result.models.sensor_dim = raw.dimension;
    result.models.znormalize = znorm;
    result.models.hyper = hyper;

    const std::string report_path = a.report.empty() ? default_report_path(a.out) : a.report;
    write_output(a.out, to_json(result.models).dump(2) + "\n");
    write_output(report_path, to_json(result.report, features, result.assignments).dump(2) + "\n");
    std::cerr << "trained " << result.models.size() << " stages on " << raw.size() << " instances ("
              << features.total_ticks() << " ticks), " << result.report.iterations << " iterations"
              << (result.report.converged ? "" : ", not converged") << "\n";
    return kOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string model;
    std::string stream;
    std::string out;
    std::string model_out;
    std::string update_log;
    bool online_update = false;
    int curve_points = 0;
    double curve_horizon = 0.0;
};

// One input record: an observation, or the end of an instance.
struct StreamRecord {
    std::string instance_id;
    std::optional<Vector> values;
    int tick = 0;
    std::optional<int> event_time;
};

StreamRecord parse_record(const std::string& line, std::size_t line_no) {
    Json j;
    try {
        j = Json::parse(line);
    } catch (const Json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("instance_id")) {
        throw SchemaError("line " + std::to_string(line_no) + ": missing field 'instance_id'");
    }
    StreamRecord r;
    try {
        r.instance_id = j.at("instance_id").is_string() ? j.at("instance_id").get<std::string>()
                                                        : j.at("instance_id").dump();
        if (j.contains("values")) {
            const auto v = j.at("values").get<std::vector<double>>();
            r.values = Vector(static_cast<Eigen::Index>(v.size()));
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (!std::isfinite(v[i])) {
                    throw DataError("line " + std::to_string(line_no) + ": non-finite value");
                }
                (*r.values)(static_cast<Eigen::Index>(i)) = v[i];
            }
            r.tick = j.value("tick", 0);
        }
        if (j.contains("event_time")) r.event_time = j.at("event_time").get<int>();
    } catch (const Json::exception& e) {
        throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!r.values && !r.event_time) {
        throw SchemaError("line " + std::to_string(line_no) + ": record needs 'values' or 'event_time'");
    }
    return r;
}

std::vector<StreamRecord> records_from_csv(const std::string& path) {
    const auto raw = load_csv(path);
    std::vector<StreamRecord> out;
    for (const auto& seq : raw.sequences) {
        for (const auto& o : seq.observations()) out.push_back({seq.instance_id(), o.values, o.tick, std::nullopt});
        out.push_back({seq.instance_id(), std::nullopt, 0, seq.event_time()});
    }
    return out;
}

class Replayer {
public:
    Replayer(ModelSet models, const PredictArgs& args, std::ostream& out, std::ostream* updates)
        : models_(std::move(models)), snapshot_(models_), args_(args), out_(out), updates_(updates) {}

    void ingest(const StreamRecord& r) {
        if (r.values) observe(r);
        if (r.event_time) finish(r.instance_id, r.event_time);
    }

    void finish_all() {
        for (auto& [id, s] : streams_) {
            if (!s.ended) finish(id, std::nullopt);
        }
    }

    const ModelSet& models() const { return models_; }

private:
    void observe(const StreamRecord& r) {
        auto& s = stream(r.instance_id);
        if (s.ended) throw DataError("instance '" + r.instance_id + "' has records after its end");
        if (r.values->size() != models_.sensor_dim) {
            throw DataError("instance '" + r.instance_id + "' tick " + std::to_string(r.tick) + ": expected " +
                            std::to_string(models_.sensor_dim) + " values, got " + std::to_string(r.values->size()));
        }
        if (s.length > 0 && r.tick != 0 && r.tick <= s.last_tick) {
            throw DataError("instance '" + r.instance_id + "': tick " + std::to_string(r.tick) +
                            " does not increase");
        }
        s.last_tick = r.tick;
        if (models_.znormalize || args_.online_update) s.raw.push_back(*r.values);
        ++s.length;
        // Per-sequence z-normalization needs the whole sequence, so those
        // instances are replayed when they end.
        if (!models_.znormalize) emit(r.instance_id, s, s.window.push(*r.values));
    }

    void finish(const std::string& id, std::optional<int> event_time) {
        auto& s = stream(id);
        if (s.ended) return;
        s.ended = true;
        const int length = s.length;
        const int event = event_time.value_or(length);
        if (event < length) {
            throw DataError("instance '" + id + "': event_time " + std::to_string(event) + " precedes its last tick");
        }
        if (models_.znormalize && length > 0) {
            const auto features = features_of(id, s, event);
            for (const auto& x : features.observations()) emit(id, s, x.values);
        }
        if (args_.online_update && length > 0) update(id, s, event);
        s.raw.clear();
        s.state = StreamState{};
    }

    struct Stream {
        StreamState state;
        WindowBuffer window;
        std::vector<Vector> raw;
        int last_tick = 0;
        int length = 0;
        bool ended = false;
        explicit Stream(int m) : window(m) {}
    };

    Stream& stream(const std::string& id) {
        auto it = streams_.find(id);
        if (it == streams_.end()) it = streams_.emplace(id, Stream(models_.hyper.window)).first;
        return it->second;
    }

    SensorSequence features_of(const std::string& id, const Stream& s, int event) const {
        Matrix rows(static_cast<Eigen::Index>(s.raw.size()), models_.sensor_dim);
        for (std::size_t t = 0; t < s.raw.size(); ++t) rows.row(static_cast<Eigen::Index>(t)) = s.raw[t].transpose();
        LabeledCollection one({SensorSequence::from_rows(id, rows, event)});
        return prepare_features(one, models_.hyper.window, models_.znormalize).sequences.front();
    }

    void emit(const std::string& id, Stream& s, const Vector& x) {
        if (s.state.instance_id.empty()) s.state.instance_id = id;
        // The online update replays the finished stream itself; no per-tick history needed.
        s.state.history_cap = 1;
        auto [pred, next] = adaptive_predict(std::move(s.state), x, snapshot_);
        s.state = std::move(next);
        if (args_.curve_points > 0) {
            const double horizon = args_.curve_horizon > 0.0 ? args_.curve_horizon : 3.0 * pred.params.mu_ig;
            std::vector<std::pair<double, double>> curve;
            for (int i = 1; i <= args_.curve_points; ++i) {
                const double tau = horizon * i / args_.curve_points;
                curve.emplace_back(tau, survival(pred.params, tau));
            }
            pred.survival_curve = std::move(curve);
        }
        out_ << to_json(pred).dump() << '\n';
    }

    void update(const std::string& id, const Stream& s, int event) {
        const auto finished = features_of(id, s, event);
        auto result = online_model_update(models_, finished);
        if (result.report.adopted) {
            models_ = std::move(result.models);
            snapshot_ = StreamModel(models_);
            const int position = result.report.inserted_at - 1;
            for (auto& [other, st] : streams_) {
                if (other != id && !st.ended) st.state.on_stage_inserted(position);
            }
        }
        if (updates_) {
            Json j = to_json(result.report);
            j["instance_id"] = id;
            *updates_ << j.dump() << '\n';
        }
    }

    ModelSet models_;
    StreamModel snapshot_;
    const PredictArgs& args_;
    std::ostream& out_;
    std::ostream* updates_;
    std::map<std::string, Stream> streams_;
};

int run_predict(const PredictArgs& a) {
    if (a.curve_points < 0) throw ArgumentError("--curve-points must be >= 0");
    auto models = load_model(a.model);

    std::ostringstream predictions;
    std::ostringstream update_lines;
    std::ostream* updates = (a.online_update && !a.update_log.empty()) ? &update_lines : nullptr;
    // Without --out predictions go straight to stdout as they are produced.
    std::ostream& sink = a.out.empty() ? std::cout : predictions;
    Replayer replay(std::move(models), a, sink, updates);

    if (fs::path(a.stream).extension() == ".csv") {
        for (const auto& r : records_from_csv(a.stream)) replay.ingest(r);
    } else {
        std::ifstream file;
        std::istream* in = &std::cin;
        if (a.stream != "-") {
            require_readable(a.stream);
            file.open(a.stream);
            if (!file) throw IoError("cannot read '" + a.stream + "'");
            in = &file;
        }
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(*in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            replay.ingest(parse_record(line, line_no));
        }
    }
    replay.finish_all();

    if (!a.out.empty()) write_output(a.out, predictions.str());
    if (updates) write_output(a.update_log, update_lines.str());
    if (a.online_update) {
        std::cerr << "model has " << replay.models().size() << " stages after online updates\n";
        if (!a.model_out.empty()) write_output(a.model_out, to_json(replay.models()).dump(2) + "\n");
    }
    return kOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
    std::string model;
    std::string data;
    std::string out;
    std::string window = "auto";
    HyperParams hyper;
    int folds = 5;
    std::uint64_t seed = 0;
    std::optional<int> ibs_horizon;
    bool no_znorm = false;
};

int run_evaluate(const EvaluateArgs& a) {
    const auto raw = load_csv(a.data);
    CrossValidationOptions options;
    options.folds = a.folds;
    options.seed = a.seed;
    options.ibs_horizon = a.ibs_horizon;
    options.znormalize = !a.no_znorm;
    options.learn.seed = a.seed;
    HyperParams hyper = a.hyper;
    if (!a.model.empty()) {
        options.fixed_model = load_model(a.model);
        if (options.fixed_model->sensor_dim != raw.dimension) {
            throw DataError("model expects " + std::to_string(options.fixed_model->sensor_dim) +
                            " sensors, data has " + std::to_string(raw.dimension));
        }
        hyper = options.fixed_model->hyper;
    } else {
        hyper.window = parse_window(a.window, raw);
        hyper.validate();
    }
    const auto reports = cross_validate(raw, hyper, options);

    Json j = Json::array();
    for (const auto& r : reports) j.push_back(to_json(r));
    std::cout << metric_table(reports);
    if (!a.out.empty()) write_output(a.out, j.dump(2) + "\n");
    return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string spec;
    std::string out;
    std::string truth;
    std::optional<std::uint64_t> seed;
};

int run_synth(const SynthArgs& a) {
    require_readable(a.spec);
    Json j;
    try {
        j = Json::parse(read_file(a.spec));
    } catch (const Json::exception& e) {
        throw SchemaError("'" + a.spec + "' is not valid JSON: " + e.what());
    }
    auto spec = synthetic_spec_from_json(j);
    if (a.seed) spec.seed = *a.seed;
    const auto data = generate_synthetic(spec);
    std::ostringstream csv;
    save_collection(data.collection, csv);
    write_output(a.out, csv.str());
    if (!a.truth.empty()) write_output(a.truth, truth_to_json(data.collection, data.truth).dump(2) + "\n");
    return kOk;
}

// ---------------------------------------------------------------- plot-data

struct PlotArgs {
    std::string preds;
    std::string out;
    int points = 200;
    double horizon = 0.0;
    std::string instance;
    int every = 1;
};

int run_plot(const PlotArgs& a) {
    if (a.points < 2) throw ArgumentError("--points must be >= 2");
    if (a.every < 1) throw ArgumentError("--every must be >= 1");
    require_readable(a.preds);
    std::ifstream in(a.preds);
    Json curves = Json::array();
    std::string line;
    std::size_t line_no = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        PredictionOutput p;
        try {
            p = prediction_from_json(Json::parse(line));
        } catch (const Json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!a.instance.empty() && p.instance_id != a.instance) continue;
        if (seen[p.instance_id]++ % a.every != 0) continue;
        const double horizon = a.horizon > 0.0 ? a.horizon : 3.0 * p.params.mu_ig;
        std::vector<double> tau, density, surv;
        for (int i = 0; i < a.points; ++i) {
            const double t = horizon * (i + 1) / a.points;
            tau.push_back(t);
            density.push_back(event_density(p.params, t));
            surv.push_back(survival(p.params, t));
        }
        curves.push_back({{"instance_id", p.instance_id},
                          {"tick", p.tick},
                          {"stage", p.stage + 1},
                          {"mu_ig", p.params.mu_ig},
                          {"lambda_ig", p.params.lambda_ig},
                          {"point_estimate", p.point_estimate},
                          {"tau", tau},
                          {"density", density},
                          {"survival", surv}});
    }
    const Json j{{"schema_version", kSchemaVersion}, {"kind", "timecast.curves"}, {"curves", curves}};
    write_output(a.out, j.dump() + "\n");
    return kOk;
}

void add_hyper_options(CLI::App* cmd, HyperParams& h, std::string& window) {
    cmd->add_option("--alpha", h.alpha, "off-diagonal l1 penalty on stage precisions")->capture_default_str();
    cmd->add_option("--beta", h.beta, "weight of the remaining-time likelihood")->capture_default_str();
    cmd->add_option("--k", h.k_init, "initial number of stages")->capture_default_str();
    cmd->add_option("--window", window, "sliding window length, or 'auto'")->capture_default_str();
    cmd->add_option("--max-iter", h.max_iter, "outer iteration cap")->capture_default_str();
    cmd->add_option("--tol", h.tol, "relative objective change for convergence")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"timecast: stage-aware remaining-time forecasting for multivariate sensor streams"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "learn a stage model set from a CSV collection");
    train_cmd->add_option("--data", train.data, "long-format CSV")->required();
    train_cmd->add_option("--out", train.out, "model set JSON")->required();
    train_cmd->add_option("--report", train.report, "fit report JSON (default: <out>.fit.json)");
    train_cmd->add_option("--seed", train.seed, "seed for the initial segmentation")->capture_default_str();
    train_cmd->add_flag("--no-znorm", train.no_znorm, "skip per-sequence z-normalization");
    add_hyper_options(train_cmd, train.hyper, train.window);

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "replay streams tick by tick");
    predict_cmd->add_option("--model", predict.model, "model set JSON")->required();
    predict_cmd->add_option("--stream", predict.stream, "NDJSON records, a .csv collection, or - for stdin")
        ->required();
    predict_cmd->add_option("--out", predict.out, "prediction NDJSON (default: stdout)");
    predict_cmd->add_flag("--online-update", predict.online_update, "grow the model when a stream ends");
    predict_cmd->add_option("--model-out", predict.model_out, "write the updated model set here");
    predict_cmd->add_option("--update-log", predict.update_log, "NDJSON log of online update decisions");
    predict_cmd->add_option("--curve-points", predict.curve_points, "survival samples per prediction")
        ->capture_default_str();
    predict_cmd->add_option("--curve-horizon", predict.curve_horizon, "curve end (default: 3x the mean)");

    EvaluateArgs evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "k-fold MAPE, RMSPE and IBS");
    evaluate_cmd->add_option("--data", evaluate.data, "long-format CSV")->required();
    evaluate_cmd->add_option("--model", evaluate.model, "evaluate this model on every fold instead of training");
    evaluate_cmd->add_option("--folds", evaluate.folds)->capture_default_str();
    evaluate_cmd->add_option("--seed", evaluate.seed)->capture_default_str();
    evaluate_cmd->add_option("--ibs-horizon", evaluate.ibs_horizon, "default: median sequence length");
    evaluate_cmd->add_option("--out", evaluate.out, "metric reports JSON");
    evaluate_cmd->add_flag("--no-znorm", evaluate.no_znorm, "skip per-sequence z-normalization");
    add_hyper_options(evaluate_cmd, evaluate.hyper, evaluate.window);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic staged collection");
    synth_cmd->add_option("--spec", synth.spec, "synthetic spec JSON")->required();
    synth_cmd->add_option("--out", synth.out, "CSV output")->required();
    synth_cmd->add_option("--truth", synth.truth, "ground-truth stage paths JSON");
    synth_cmd->add_option("--seed", synth.seed, "override the spec seed");

    PlotArgs plot;
    auto* plot_cmd = app.add_subcommand("plot-data", "sample density and survival curves from predictions");
    plot_cmd->add_option("--preds", plot.preds, "prediction NDJSON")->required();
    plot_cmd->add_option("--out", plot.out, "curves JSON")->required();
    plot_cmd->add_option("--points", plot.points)->capture_default_str();
    plot_cmd->add_option("--horizon", plot.horizon, "grid end (default: 3x each prediction's mean)");
    plot_cmd->add_option("--instance", plot.instance, "only this instance");
    plot_cmd->add_option("--every", plot.every, "keep every n-th tick per instance")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train_cmd) return run_train(train);
        if (*predict_cmd) return run_predict(predict);
        if (*evaluate_cmd) return run_evaluate(evaluate);
        if (*synth_cmd) return run_synth(synth);
        if (*plot_cmd) return run_plot(plot);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kData;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const ConvergenceError& e) {
        std::cerr << "numerical error: " << e.what() << " (" << e.iterations() << " iterations)\n";
        return kNumeric;
    } catch (const Error& e) {
        // RangeError, DomainError, DegenerateStageError
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}
