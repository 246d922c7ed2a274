#pragma once

#include <cstdint>

#include "timecast/ingestion.hpp"

namespace fixture {

using timecast::Matrix;
using timecast::Vector;

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Three stages in three dimensions with separated means, different sparse
// precisions and a different within-stage drift each.
inline timecast::SyntheticSpec three_stage(int instances, std::uint64_t seed, int min_len = 40,
                                           int max_len = 80) {
    timecast::SyntheticSpec spec;
    spec.n_instances = instances;
    spec.seed = seed;

    Matrix p1 = Matrix::Identity(3, 3) * 4.0;
    p1(0, 1) = p1(1, 0) = 1.5;
    Matrix p2 = Matrix::Identity(3, 3);
    p2.diagonal() = vec({2.0, 6.0, 3.0});
    Matrix p3 = Matrix::Identity(3, 3) * 3.0;
    p3(0, 2) = p3(2, 0) = -1.2;
    p3(1, 2) = p3(2, 1) = 0.8;

    spec.stages = {
        {vec({0.0, 0.0, 0.0}), p1, vec({0.02, 0.0, 0.01}), min_len, max_len},
        {vec({4.0, -3.0, 2.0}), p2, vec({0.0, 0.06, -0.02}), min_len, max_len},
        {vec({-3.0, 5.0, 4.0}), p3, vec({0.05, 0.03, 0.08}), min_len, max_len},
    };
    return spec;
}

// The first two stages of three_stage with fixed durations.
inline timecast::SyntheticSpec two_stage(int instances, std::uint64_t seed) {
    auto spec = three_stage(instances, seed, 60, 60);
    spec.stages.pop_back();
    return spec;
}

// One drifting stage with isotropic noise of the given precision.
inline timecast::SyntheticSpec single_stage(int instances, std::uint64_t seed, double precision) {
    timecast::SyntheticSpec spec;
    spec.n_instances = instances;
    spec.seed = seed;
    spec.stages = {{vec({0.0, 0.0, 0.0}), Matrix::Identity(3, 3) * precision, vec({0.05, 0.03, 0.08}), 60, 60}};
    return spec;
}

}  // namespace fixture
