#include <doctest.h>
#include <random>

#include "timecast/core_types.hpp"

using namespace timecast;

TEST_CASE("label_of returns the remaining time") {
    const auto seq = SensorSequence::from_rows("a", Matrix::Zero(135, 2), 227);
    CHECK(label_of(seq, 135) == 92.0);

    const auto short_seq = SensorSequence::from_rows("b", Matrix::Zero(10, 1), 10);
    CHECK(label_of(short_seq, 9) == 1.0);
    CHECK_THROWS_AS(label_of(short_seq, 10), RangeError);
    CHECK_THROWS_AS(label_of(short_seq, 0), RangeError);
}

TEST_CASE("sequences reject broken tick order and non-finite values") {
    std::vector<Observation> obs{{Vector::Ones(2), "x", 1}, {Vector::Ones(2), "x", 3}};
    CHECK_THROWS_AS(SensorSequence("x", obs, 3), DataError);

    Matrix bad = Matrix::Zero(3, 2);
    bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(SensorSequence::from_rows("x", bad), DataError);

    CHECK_THROWS_AS(SensorSequence::from_rows("x", Matrix::Zero(4, 1), 3), DataError);
}

TEST_CASE("collections require one dimension") {
    std::vector<SensorSequence> seqs{SensorSequence::from_rows("a", Matrix::Zero(3, 2)),
                                     SensorSequence::from_rows("b", Matrix::Zero(3, 3))};
    CHECK_THROWS_AS(LabeledCollection{seqs}, ArgumentError);
}

TEST_CASE("assignment paths must be non-decreasing") {
    CHECK_NOTHROW(StageAssignmentPath({0, 0, 1, 2, 2}));
    CHECK_THROWS_AS(StageAssignmentPath({0, 1, 0}), ArgumentError);
    CHECK_THROWS_AS(StageAssignmentPath({-1, 0}), ArgumentError);
    const auto p = StageAssignmentPath::from_one_based({1, 2, 2});
    CHECK(p.stages() == std::vector<int>{0, 1, 1});
    CHECK(p.one_based() == std::vector<int>{1, 2, 2});
}

TEST_CASE("hyperparameters validate their ranges") {
    HyperParams h;
    CHECK(h.alpha == 1.0);
    CHECK(h.beta == 0.1);
    CHECK(h.k_init == 5);
    CHECK_NOTHROW(h.validate());
    h.alpha = -1;
    CHECK_THROWS_AS(h.validate(), ArgumentError);
    h = {};
    h.window = 0;
    CHECK_THROWS_AS(h.validate(), ArgumentError);
}

TEST_CASE("moment merge equals sequential adds") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    MomentStats all = MomentStats::empty(3), a = MomentStats::empty(3), b = MomentStats::empty(3);
    for (int i = 0; i < 40; ++i) {
        Vector x(3);
        for (int j = 0; j < 3; ++j) x(j) = n(rng) * (j + 1) + 5;
        all.add(x);
        (i < 17 ? a : b).add(x);
    }
    a.merge(b);
    CHECK(a.count == all.count);
    CHECK((a.mean - all.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.comoment - all.comoment).cwiseAbs().maxCoeff() < 1e-10);
}
