#include "timecast/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace timecast {

namespace {

Json vec_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json mat_json(const Matrix& m) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    }
    return Json(flat);
}

Vector json_vec(const Json& j, const char* field) {
    if (!j.is_array()) throw SchemaError(std::string("field '") + field + "' must be an array");
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Matrix json_mat(const Json& j, Eigen::Index rows, Eigen::Index cols, const char* field) {
    const Vector flat = json_vec(j, field);
    if (flat.size() != rows * cols) {
        throw SchemaError(std::string("field '") + field + "' has " + std::to_string(flat.size()) +
                          " entries, expected " + std::to_string(rows * cols));
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = flat(i * cols + c);
    }
    return m;
}

Json one_based(const std::vector<int>& zero_based) {
    std::vector<int> out(zero_based);
    for (int& s : out) ++s;
    return Json(out);
}

const Json& field(const Json& j, const char* name) {
    if (!j.contains(name)) throw SchemaError(std::string("missing field '") + name + "'");
    return j.at(name);
}

void check_version(const Json& j) {
    const int version = field(j, "schema_version").get<int>();
    if (version != kSchemaVersion) {
        throw SchemaError("unsupported schema_version " + std::to_string(version));
    }
}

}  // namespace

Json to_json(const ModelSet& models) {
    Json stages = Json::array();
    for (const auto& s : models.stages) {
        stages.push_back({
            {"mean", vec_json(s.mean)},
            {"precision", mat_json(s.precision)},
            {"link_weights", vec_json(s.link_weights)},
            {"diffusion", s.diffusion},
            {"increment_mean", s.increment_mean},
            {"count", s.count},
            {"stale", s.stale},
            {"stats", {{"count", s.stats.count}, {"mean", vec_json(s.stats.mean)}, {"comoment", mat_json(s.stats.comoment)}}},
            {"link_stats",
             {{"count", s.link_stats.count},
              {"gram", mat_json(s.link_stats.gram)},
              {"moment", vec_json(s.link_stats.moment)},
              {"label_sum", s.link_stats.label_sum},
              {"inv_label_sum", s.link_stats.inv_label_sum},
              {"abs_dev_sum", s.link_stats.abs_dev_sum}}},
        });
    }
    const auto& h = models.hyper;
    return Json{
        {"schema_version", kSchemaVersion},
        {"kind", "timecast.model_set"},
        {"sensor_dim", models.sensor_dim},
        {"feature_dim", models.feature_dim()},
        {"znormalize", models.znormalize},
        {"hyper",
         {{"alpha", h.alpha}, {"beta", h.beta}, {"k_init", h.k_init}, {"window", h.window}, {"max_iter", h.max_iter}, {"tol", h.tol}}},
        {"stages", stages},
    };
}

ModelSet model_set_from_json(const Json& j) {
    check_version(j);
    ModelSet m;
    m.sensor_dim = field(j, "sensor_dim").get<int>();
    m.znormalize = j.value("znormalize", false);
    const auto& h = field(j, "hyper");
    m.hyper.alpha = field(h, "alpha").get<double>();
    m.hyper.beta = field(h, "beta").get<double>();
    m.hyper.k_init = field(h, "k_init").get<int>();
    m.hyper.window = field(h, "window").get<int>();
    m.hyper.max_iter = field(h, "max_iter").get<int>();
    m.hyper.tol = field(h, "tol").get<double>();
    const auto dim = static_cast<Eigen::Index>(field(j, "feature_dim").get<int>());
    for (const auto& js : field(j, "stages")) {
        StageModel s;
        s.mean = json_vec(field(js, "mean"), "mean");
        s.precision = json_mat(field(js, "precision"), dim, dim, "precision");
        s.link_weights = json_vec(field(js, "link_weights"), "link_weights");
        s.diffusion = field(js, "diffusion").get<double>();
        s.increment_mean = field(js, "increment_mean").get<double>();
        s.count = field(js, "count").get<std::int64_t>();
        s.stale = js.value("stale", false);
        const auto& st = field(js, "stats");
        s.stats.count = field(st, "count").get<std::int64_t>();
        s.stats.mean = json_vec(field(st, "mean"), "stats.mean");
        s.stats.comoment = json_mat(field(st, "comoment"), dim, dim, "stats.comoment");
        const auto& ls = field(js, "link_stats");
        s.link_stats.count = field(ls, "count").get<std::int64_t>();
        s.link_stats.gram = json_mat(field(ls, "gram"), dim + 1, dim + 1, "link_stats.gram");
        s.link_stats.moment = json_vec(field(ls, "moment"), "link_stats.moment");
        s.link_stats.label_sum = field(ls, "label_sum").get<double>();
        s.link_stats.inv_label_sum = field(ls, "inv_label_sum").get<double>();
        s.link_stats.abs_dev_sum = field(ls, "abs_dev_sum").get<double>();
        m.stages.push_back(std::move(s));
    }
    m.validate();
    return m;
}

Json to_json(const FitReport& report) {
    return Json{
        {"schema_version", kSchemaVersion},
        {"kind", "timecast.fit_report"},
        {"objective_trace", report.objective_trace},
        {"half_step_trace", report.half_step_trace},
        {"iterations", report.iterations},
        {"converged", report.converged},
        {"stage_counts", report.stage_counts},
        {"pruned_stages", report.pruned_stages},
        {"glasso_failures", report.glasso_failures},
    };
}

Json to_json(const FitReport& report, const LabeledCollection& collection,
             const std::vector<StageAssignmentPath>& assignments) {
    Json j = to_json(report);
    Json paths = Json::object();
    for (std::size_t v = 0; v < collection.size() && v < assignments.size(); ++v) {
        paths[collection.sequences[v].instance_id()] = assignments[v].one_based();
    }
    j["assignments"] = std::move(paths);
    return j;
}

Json to_json(const MetricReport& report) {
    Json per = Json::object();
    for (const auto& [id, m] : report.per_instance) per[id] = {{"mape", m.first}, {"rmspe", m.second}};
    return Json{
        {"schema_version", kSchemaVersion},
        {"kind", "timecast.metric_report"},
        {"fold_id", report.fold_id},
        {"mape", report.mape},
        {"rmspe", report.rmspe},
        {"ibs", report.ibs ? Json(*report.ibs) : Json(nullptr)},
        {"evaluated_ticks", report.evaluated_ticks},
        {"clamped_ticks", report.clamped_ticks},
        {"per_instance", per},
    };
}

Json to_json(const PredictionOutput& p) {
    Json j{
        {"schema_version", kSchemaVersion},
        {"instance_id", p.instance_id},
        {"tick", p.tick},
        {"stage", p.stage + 1},
        {"mu_ig", p.params.mu_ig},
        {"lambda_ig", p.params.lambda_ig},
        {"boundary", p.params.boundary},
        {"point_estimate", p.point_estimate},
        {"raw_link", p.raw_link},
        {"clamped", p.clamped},
    };
    if (p.survival_curve) {
        Json curve = Json::array();
        for (const auto& [tau, s] : *p.survival_curve) curve.push_back({tau, s});
        j["survival_curve"] = std::move(curve);
    }
    return j;
}

PredictionOutput prediction_from_json(const Json& j) {
    check_version(j);
    PredictionOutput p;
    p.instance_id = field(j, "instance_id").get<std::string>();
    p.tick = field(j, "tick").get<int>();
    p.stage = field(j, "stage").get<int>() - 1;
    p.params.mu_ig = field(j, "mu_ig").get<double>();
    p.params.lambda_ig = field(j, "lambda_ig").get<double>();
    p.params.boundary = j.value("boundary", 1.0);
    p.point_estimate = field(j, "point_estimate").get<double>();
    p.raw_link = j.value("raw_link", p.point_estimate);
    p.clamped = j.value("clamped", false);
    p.params.validate();
    return p;
}

Json to_json(const UpdateReport& r) {
    Json stage_mape = Json::array();
    for (double m : r.stage_mape) stage_mape.push_back(std::isnan(m) ? Json(nullptr) : Json(m));
    return Json{
        {"schema_version", kSchemaVersion},
        {"kind", "timecast.online_update"},
        {"attempted", r.attempted},
        {"adopted", r.adopted},
        {"reason", r.reason},
        {"worst_stage", r.worst_stage},
        {"inserted_at", r.inserted_at},
        {"stages_before", r.stages_before},
        {"stages_after", r.stages_after},
        {"inner_iterations", r.inner_iterations},
        {"mape_before", r.mape_before},
        {"mape_after", r.mape_after},
        {"stage_mape", stage_mape},
        {"path_before", one_based(r.path_before)},
        {"path_after", one_based(r.path_after)},
    };
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
    SyntheticSpec spec;
    spec.n_instances = field(j, "n_instances").get<int>();
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.id_prefix = j.value("id_prefix", std::string("s"));
    for (const auto& js : field(j, "stages")) {
        SyntheticStage s;
        s.mean = json_vec(field(js, "mean"), "mean");
        const auto dim = s.mean.size();
        s.precision = json_mat(field(js, "precision"), dim, dim, "precision");
        if (js.contains("drift")) s.drift = json_vec(js.at("drift"), "drift");
        const auto duration = field(js, "duration").get<std::vector<int>>();
        if (duration.size() != 2) throw SchemaError("field 'duration' must be [min, max]");
        s.min_duration = duration[0];
        s.max_duration = duration[1];
        spec.stages.push_back(std::move(s));
    }
    spec.validate();
    return spec;
}

Json truth_to_json(const LabeledCollection& collection, const std::vector<StageAssignmentPath>& truth) {
    Json paths = Json::object();
    for (std::size_t v = 0; v < collection.size(); ++v) {
        paths[collection.sequences[v].instance_id()] = truth.at(v).one_based();
    }
    return Json{{"schema_version", kSchemaVersion}, {"kind", "timecast.synthetic_truth"}, {"assignments", paths}};
}

std::string metric_table(const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    out << std::left << std::setw(6) << "fold" << std::right << std::setw(12) << "MAPE" << std::setw(12)
        << "RMSPE" << std::setw(12) << "IBS" << std::setw(10) << "ticks" << std::setw(10) << "clamped"
        << '\n';
    out << std::fixed << std::setprecision(5);
    for (const auto& r : reports) {
        out << std::left << std::setw(6) << (r.fold_id < 0 ? std::string("all") : std::to_string(r.fold_id))
            << std::right << std::setw(12) << r.mape << std::setw(12) << r.rmspe << std::setw(12);
        if (r.ibs) {
            out << *r.ibs;
        } else {
            out << "-";
        }
        out << std::setw(10) << r.evaluated_ticks << std::setw(10) << r.clamped_ticks << '\n';
    }
    return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out.flush()) throw std::runtime_error("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace timecast
