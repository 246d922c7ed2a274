#pragma once

#include <span>

#include "timecast/core_types.hpp"

namespace timecast {

// ADMM settings for the graphical lasso.
struct GlassoConfig {
    double rho = 1.0;
    double abs_tol = 1e-8;
    double rel_tol = 1e-6;
    int max_admm_iter = 10000;

    void validate() const;
};

struct EmpiricalStats {
    Vector mean;
    Matrix covariance;  // denominator n
    std::int64_t count = 0;

    static EmpiricalStats from_moments(const MomentStats& moments);
};

EmpiricalStats empirical_stats(std::span<const Vector> points);

// Maximizes n (log det L - tr(Q L)) - alpha * sum_{i != j} |L_ij| over symmetric
// positive-definite L. Throws ConvergenceError if ADMM does not settle.
Matrix fit_precision(const EmpiricalStats& stats, double alpha, const GlassoConfig& cfg = {});

// Diagonal loading applied to near-singular covariances before solving.
double diagonal_loading(const Matrix& covariance);

double off_diagonal_l1(const Matrix& m);

double gaussian_loglik(const Vector& x, const Vector& mean, const Matrix& precision);

double stage_descriptor_objective(std::span<const Vector> points, const Vector& mean,
                                  const Matrix& precision, double alpha);

// Gaussian log density with the Cholesky factor and normalizer computed once.
class GaussianScorer {
public:
    GaussianScorer(const Vector& mean, const Matrix& precision);

    double operator()(const Vector& x) const;
    int dimension() const noexcept { return static_cast<int>(mean_.size()); }

private:
    Vector mean_;
    Matrix precision_;
    double normalizer_;
};

}  // namespace timecast
