#include <doctest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "timecast/predictor.hpp"
#include "timecast/segmentation.hpp"

using namespace timecast;

namespace {

StageModel simple_stage(const Vector& mean, double label) {
    StageModel s = StageModel::placeholder(static_cast<int>(mean.size()), label);
    s.mean = mean;
    s.stale = false;
    return s;
}

ModelSet model_of(std::vector<StageModel> stages, double beta = 0.0) {
    ModelSet m;
    m.stages = std::move(stages);
    m.sensor_dim = m.stages.front().dimension();
    m.hyper.beta = beta;
    return m;
}

Matrix random_costs(std::mt19937_64& rng, int k, int t) {
    std::uniform_int_distribution<int> u(-40, 40);
    // Quarter-integer costs keep every path sum exact, so ties really are ties.
    return Matrix::NullaryExpr(k, t, [&](Eigen::Index, Eigen::Index) { return u(rng) * 0.25; });
}

}  // namespace

TEST_CASE("point_cost") {
    Vector mu = Vector::Zero(2);
    StageModel s = simple_stage(mu, 4.0);
    s.increment_mean = 0.25;
    CHECK(point_cost(mu, 4.0, s, 0.0) == gaussian_loglik(mu, mu, s.precision));
    CHECK(point_cost(mu, 4.0, s, 0.1) == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
    CHECK(point_cost(mu, 4.0, s, 0.1) == doctest::Approx(-1.837877).epsilon(1e-6));

    std::mt19937_64 rng(12);
    std::normal_distribution<double> n(0, 1);
    for (int i = 0; i < 10; ++i) {
        Vector x = Vector::NullaryExpr(2, [&](Eigen::Index) { return n(rng); });
        StageModel st = simple_stage(Vector::NullaryExpr(2, [&](Eigen::Index) { return n(rng); }), 9.0);
        st.precision << 2.0, 0.3, 0.3, 1.5;
        st.link_weights << n(rng), n(rng), 10.0;
        st.diffusion = 0.4;
        st.increment_mean = 0.12;
        const double tau = 3.0 + i;
        const double expected = oracle::mvn_logpdf_direct(x, st.mean, st.precision) +
                                0.3 * (-std::abs(tau - st.link(x)) - std::log(0.16) - std::abs(1.0 / tau - 0.12) / 0.16);
        CHECK(std::abs(point_cost(x, tau, st, 0.3) - expected) < 1e-12);
    }
}

TEST_CASE("monotone DP: small closed cases") {
    Matrix one = Matrix::Constant(1, 6, -1.0);
    CHECK(solve_monotone_dp(one).path.stages() == std::vector<int>(6, 0));

    Matrix costs(2, 3);
    costs << 0.0, -5.0, -5.0,
             -1.0, 0.0, 0.0;
    const auto sol = solve_monotone_dp(costs);
    CHECK(sol.path.one_based() == std::vector<int>{1, 2, 2});
    CHECK(sol.optimum == 0.0);

    // All ties: stay in the lowest stage.
    CHECK(solve_monotone_dp(Matrix::Zero(3, 5)).path.stages() == std::vector<int>(5, 0));

    // Stages can be skipped.
    Matrix skip(3, 2);
    skip << 1.0, -9.0, -9.0, -9.0, -9.0, 1.0;
    CHECK(solve_monotone_dp(skip).path.stages() == std::vector<int>{0, 2});
}

TEST_CASE("monotone DP equals exhaustive enumeration") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> kd(1, 3), td(1, 8);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = kd(rng), t = td(rng);
        const Matrix costs = random_costs(rng, k, t);
        const auto sol = solve_monotone_dp(costs);
        const auto brute = oracle::brute_force_monotone(costs);
        CAPTURE(trial);
        CHECK(std::abs(sol.optimum - brute.value) <= 1e-12);
        CHECK(sol.path.stages() == brute.path);
        CHECK(StageAssignmentPath::is_monotone(sol.path.stages()));

        // Recurrence holds cell by cell.
        const auto& g = sol.table.gamma;
        for (int c = 1; c < t; ++c) {
            for (int r = 0; r < k; ++r) {
                CHECK(g(r, c) == g.col(c - 1).head(r + 1).maxCoeff() + costs(r, c));
            }
        }
    }
    CHECK(oracle::count_monotone_paths(3, 8) == 45);
}

TEST_CASE("assign_stages_dp drops the predictor term at the event tick") {
    StageModel a = simple_stage(Vector::Zero(1), 2.0);
    StageModel b = simple_stage(Vector::Zero(1), 2.0);
    b.increment_mean = 10.0;
    const auto models = model_of({a, b});
    const auto seq = SensorSequence::from_rows("x", Matrix::Zero(3, 1));
    const Matrix costs = point_cost_matrix(seq, models, 1.0);
    CHECK(costs(0, 2) == costs(1, 2));
    CHECK(costs(0, 0) > costs(1, 0));
    CHECK(assign_stages_dp(seq, models, 1.0).stages() == std::vector<int>{0, 0, 0});
}

TEST_CASE("total_objective") {
    Matrix prec(2, 2);
    prec << 2.0, 0.5, 0.5, 1.0;
    StageModel s0 = simple_stage(Vector::Zero(2), 3.0);
    s0.precision = prec;
    StageModel s1 = simple_stage(Vector::Constant(2, 1.0), 1.0);
    s1.precision(0, 1) = s1.precision(1, 0) = -0.25;

    Matrix rows(4, 2);
    rows << 0.1, 0.2, -0.3, 0.0, 1.2, 0.9, 0.8, 1.1;
    const auto seq = SensorSequence::from_rows("x", rows);
    const LabeledCollection c({seq});

    SUBCASE("one stage, beta 0") {
        std::vector<Vector> pts;
        for (int t = 0; t < 4; ++t) pts.push_back(seq.at(t));
        const auto m = model_of({s0});
        CHECK(total_objective(c, m, {StageAssignmentPath({0, 0, 0, 0})}, 0.7, 0.0) ==
              doctest::Approx(stage_descriptor_objective(pts, s0.mean, prec, 0.7)).epsilon(1e-14));
    }
    SUBCASE("empty stage contributes only its penalty") {
        const auto one = model_of({s0});
        const auto two = model_of({s0, s1});
        const StageAssignmentPath path({0, 0, 0, 0});
        CHECK(total_objective(c, two, {path}, 0.7, 0.4) ==
              doctest::Approx(total_objective(c, one, {path}, 0.7, 0.4) - 0.7 * 0.5).epsilon(1e-14));
    }
    SUBCASE("two stages, term by term") {
        const auto m = model_of({s0, s1});
        const std::vector<int> path{0, 0, 1, 1};
        double expected = -0.7 * (1.0 + 0.5);
        for (int t = 0; t < 4; ++t) {
            const auto& st = m.stages[static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
            expected += oracle::mvn_logpdf_direct(seq.at(t), st.mean, st.precision);
            const double tau = 4.0 - (t + 1);
            if (tau > 0) expected += 0.4 * predictor_loglik(seq.at(t), tau, st);
        }
        CHECK(total_objective(c, m, {StageAssignmentPath(path)}, 0.7, 0.4) == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("initial_assignments") {
    const LabeledCollection c({SensorSequence::from_rows("a", Matrix::Zero(10, 1)),
                               SensorSequence::from_rows("b", Matrix::Zero(3, 1))});
    const auto plain = initial_assignments(c, 5, std::nullopt);
    CHECK(plain[0].one_based() == std::vector<int>{1, 1, 2, 2, 3, 3, 4, 4, 5, 5});
    CHECK(plain[1].one_based() == std::vector<int>{1, 1, 1});

    const LabeledCollection longer({SensorSequence::from_rows("a", Matrix::Zero(200, 1))});
    const auto j1 = initial_assignments(longer, 4, 1);
    const auto j2 = initial_assignments(longer, 4, 2);
    CHECK(StageAssignmentPath::is_monotone(j1[0].stages()));
    CHECK(StageAssignmentPath::is_monotone(j2[0].stages()));
    CHECK(j1[0].stages() != j2[0].stages());
    CHECK(j1[0].stages() == initial_assignments(longer, 4, 1)[0].stages());
    const auto blocks = initial_assignments(longer, 4, std::nullopt)[0].stages();
    for (std::size_t t = 0; t < 200; ++t) CHECK(std::abs(j1[0][static_cast<int>(t)] - blocks[t]) <= 1);
}

TEST_CASE("update_stage_models") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0, 1);
    Matrix rows(400, 2);
    for (int t = 0; t < 400; ++t) {
        const double shift = t < 200 ? -5.0 : 5.0;
        rows(t, 0) = shift + n(rng);
        rows(t, 1) = -shift + n(rng);
    }
    const LabeledCollection c({SensorSequence::from_rows("x", rows)});
    HyperParams h;
    h.alpha = 0.0;
    std::vector<int> split(400, 0);
    for (int t = 200; t < 400; ++t) split[static_cast<std::size_t>(t)] = 1;

    SUBCASE("separated clusters") {
        const auto u = update_stage_models(c, {StageAssignmentPath(split)}, 2, h);
        const double band = 3.0 * std::sqrt(1.0 / 200.0);
        CHECK(std::abs(u.models.stages[0].mean(0) + 5.0) < band);
        CHECK(std::abs(u.models.stages[0].mean(1) - 5.0) < band);
        CHECK(std::abs(u.models.stages[1].mean(0) - 5.0) < band);
        CHECK(std::abs(u.models.stages[1].mean(1) + 5.0) < band);
        CHECK(u.stale == std::vector<bool>{false, false});
    }
    SUBCASE("empty stages keep their parameters and are flagged") {
        const auto first = update_stage_models(c, {StageAssignmentPath(split)}, 3, h);
        CHECK(first.stale == std::vector<bool>{false, false, true});
        const auto again = update_stage_models(c, {StageAssignmentPath(std::vector<int>(400, 0))}, 3, h, &first.models);
        CHECK(again.stale == std::vector<bool>{false, true, true});
        CHECK(again.models.stages[1].mean == first.models.stages[1].mean);
        CHECK(again.models.stages[1].precision == first.models.stages[1].precision);
        CHECK(again.models.stages[1].link_weights == first.models.stages[1].link_weights);
    }
    SUBCASE("exactly linear labels give the exact link") {
        Matrix lin(30, 2);
        for (int t = 0; t < 30; ++t) {
            const double tau = 30.0 - (t + 1);
            lin(t, 0) = std::cos(t);
            lin(t, 1) = (tau - 4.0 - 0.5 * lin(t, 0)) / 2.0;  // tau = 0.5 x1 + 2 x2 + 4
        }
        const LabeledCollection lc({SensorSequence::from_rows("l", lin)});
        const auto u = update_stage_models(lc, {StageAssignmentPath(std::vector<int>(30, 0))}, 1, h);
        const Vector w = u.models.stages[0].link_weights;
        CHECK(std::abs(w(0) - 0.5) < 1e-8);
        CHECK(std::abs(w(1) - 2.0) < 1e-8);
        CHECK(std::abs(w(2) - 4.0) < 1e-8);
    }
}

TEST_CASE("learn: a single stage is the global fit") {
    auto data = generate_synthetic(fixture::three_stage(6, 4));
    HyperParams h;
    h.k_init = 1;
    const auto r = learn(data.collection, h);
    CHECK(r.report.converged);
    CHECK(r.report.iterations <= 2);
    CHECK(r.models.size() == 1);
    std::vector<Vector> all;
    for (const auto& s : data.collection.sequences)
        for (int t = 0; t < s.length(); ++t) all.push_back(s.at(t));
    const auto stats = empirical_stats(all);
    CHECK((r.models.stages[0].mean - stats.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((r.models.stages[0].precision - fit_precision(stats, h.alpha)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("learn: objective never decreases") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        auto data = generate_synthetic(fixture::three_stage(8, seed, 20, 50));
        HyperParams h;
        h.k_init = 2 + static_cast<int>(seed % 4);
        h.beta = seed % 2 == 0 ? 0.0 : 0.1 * static_cast<double>(seed);
        h.alpha = 0.5 * static_cast<double>(seed);
        LearnOptions opt;
        opt.seed = seed;
        const auto r = learn(data.collection, h, opt);
        CAPTURE(seed);
        for (std::size_t i = 1; i < r.report.half_step_trace.size(); ++i) {
            CHECK(r.report.half_step_trace[i] >= r.report.half_step_trace[i - 1] - 1e-9);
        }
        for (std::size_t i = 1; i < r.report.objective_trace.size(); ++i) {
            CHECK(r.report.objective_trace[i] >= r.report.objective_trace[i - 1] - 1e-9);
        }
        CHECK(r.report.converged);
        for (const auto& p : r.assignments) CHECK(StageAssignmentPath::is_monotone(p.stages()));
        CHECK(r.report.stage_counts.size() == static_cast<std::size_t>(r.models.size()));
    }
}

TEST_CASE("learn: recovers well separated stages") {
    auto data = generate_synthetic(fixture::three_stage(20, 77));
    HyperParams h;
    h.k_init = 3;
    const auto r = learn(data.collection, h, LearnOptions{.seed = 1});
    REQUIRE(r.models.size() == 3);
    long long right = 0, total = 0;
    for (std::size_t v = 0; v < data.truth.size(); ++v) {
        for (int t = 0; t < data.truth[v].size(); ++t) {
            right += data.truth[v][t] == r.assignments[v][t];
            ++total;
        }
    }
    CHECK(static_cast<double>(right) / static_cast<double>(total) >= 0.9);
}
