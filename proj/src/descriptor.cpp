#include "timecast/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace timecast {

namespace {

constexpr double kZeroSnap = 1e-8;

double log_det_pd(const Matrix& precision) {
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) {
        throw ArgumentError("precision matrix is not positive definite");
    }
    const auto& l = llt.matrixL();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < precision.rows(); ++i) sum += std::log(l(i, i));
    return 2.0 * sum;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void snap_small(Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (i != j && std::abs(m(i, j)) < kZeroSnap) m(i, j) = 0.0;
        }
    }
}

bool is_pd(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    return llt.info() == Eigen::Success;
}

}  // namespace

void GlassoConfig::validate() const {
    if (!(rho > 0.0)) throw ArgumentError("glasso rho must be > 0");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw ArgumentError("glasso tolerances must be > 0");
    if (max_admm_iter < 1) throw ArgumentError("max_admm_iter must be >= 1");
}

EmpiricalStats EmpiricalStats::from_moments(const MomentStats& moments) {
    if (moments.count < 1) throw ArgumentError("empirical statistics need at least one point");
    return EmpiricalStats{moments.mean, symmetrized(moments.covariance()), moments.count};
}

EmpiricalStats empirical_stats(std::span<const Vector> points) {
    if (points.empty()) throw ArgumentError("empirical_stats: empty input");
    const auto dim = points.front().size();
    Vector mean = Vector::Zero(dim);
    for (const auto& p : points) {
        if (p.size() != dim) throw ArgumentError("empirical_stats: dimension mismatch");
        mean += p;
    }
    const double n = static_cast<double>(points.size());
    mean /= n;
    Matrix cov = Matrix::Zero(dim, dim);
    for (const auto& p : points) {
        const Vector c = p - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= n;
    return EmpiricalStats{std::move(mean), symmetrized(cov), static_cast<std::int64_t>(points.size())};
}

double diagonal_loading(const Matrix& covariance) {
    const double dim = static_cast<double>(covariance.rows());
    return std::max(1e-3 * covariance.trace() / dim, 1e-6);
}

Matrix fit_precision(const EmpiricalStats& stats, double alpha, const GlassoConfig& cfg) {
    cfg.validate();
    if (!(alpha >= 0.0)) throw ArgumentError("fit_precision: alpha must be >= 0");
    if (stats.count < 1) throw ArgumentError("fit_precision: no points");
    if (!stats.covariance.allFinite()) throw ArgumentError("fit_precision: non-finite covariance");

    const Eigen::Index p = stats.covariance.rows();
    Matrix q = symmetrized(stats.covariance);

    Eigen::SelfAdjointEigenSolver<Matrix> spectrum(q, Eigen::EigenvaluesOnly);
    const double min_eig = spectrum.eigenvalues().minCoeff();
    const double max_eig = std::max(spectrum.eigenvalues().maxCoeff(), 0.0);
    const bool near_singular = !(min_eig > 1e-10 * std::max(max_eig, 1e-300));
    if (stats.count < p + 1 || near_singular) {
        q.diagonal().array() += diagonal_loading(q);
    }

    if (alpha == 0.0) {
        Eigen::LLT<Matrix> llt(q);
        if (llt.info() != Eigen::Success) throw ArgumentError("fit_precision: covariance not PD");
        Matrix inv = llt.solve(Matrix::Identity(p, p));
        inv = symmetrized(inv);
        snap_small(inv);
        return inv;
    }

    // Scaled-dual ADMM on  -log det X + tr(Q X) + lambda ||Z||_od,1,  X = Z.
    const double lambda = alpha / static_cast<double>(stats.count);
    const double rho = cfg.rho;
    const double threshold = lambda / rho;
    const double dim = static_cast<double>(p);

    Matrix x = Matrix::Zero(p, p);
    Matrix z = Matrix::Zero(p, p);
    Matrix u = Matrix::Zero(p, p);
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    double primal = 0.0;
    double dual = 0.0;

    for (int iter = 1; iter <= cfg.max_admm_iter; ++iter) {
        eig.compute(symmetrized(rho * (z - u) - q));
        const Vector& e = eig.eigenvalues();
        Vector xe(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            xe(i) = (e(i) + std::sqrt(e(i) * e(i) + 4.0 * rho)) / (2.0 * rho);
        }
        const Matrix& v = eig.eigenvectors();
        x.noalias() = v * xe.asDiagonal() * v.transpose();
        x = symmetrized(x);

        const Matrix z_old = z;
        const Matrix a = x + u;
        for (Eigen::Index j = 0; j < p; ++j) {
            for (Eigen::Index i = 0; i < p; ++i) {
                if (i == j) {
                    z(i, j) = a(i, j);
                } else {
                    const double val = a(i, j);
                    z(i, j) = std::copysign(std::max(std::abs(val) - threshold, 0.0), val);
                }
            }
        }
        u += x - z;

        primal = (x - z).norm();
        dual = rho * (z - z_old).norm();
        const double eps_primal = dim * cfg.abs_tol + cfg.rel_tol * std::max(x.norm(), z.norm());
        const double eps_dual = dim * cfg.abs_tol + cfg.rel_tol * rho * u.norm();
        if (primal <= eps_primal && dual <= eps_dual) {
            Matrix result = symmetrized(z);
            snap_small(result);
            if (!is_pd(result)) {
                result = x;
                snap_small(result);
            }
            return result;
        }
    }
    std::ostringstream msg;
    msg << "graphical lasso ADMM did not converge in " << cfg.max_admm_iter
        << " iterations (primal " << primal << ", dual " << dual << ")";
    throw ConvergenceError(msg.str(), cfg.max_admm_iter, primal, dual);
}

double off_diagonal_l1(const Matrix& m) {
    return m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum();
}

double gaussian_loglik(const Vector& x, const Vector& mean, const Matrix& precision) {
    if (x.size() != mean.size() || precision.rows() != x.size() || precision.cols() != x.size()) {
        throw ArgumentError("gaussian_loglik: dimension mismatch");
    }
    const double logdet = log_det_pd(precision);
    const Vector c = x - mean;
    const double quad = c.dot(precision * c);
    const double dim = static_cast<double>(x.size());
    return -0.5 * quad + 0.5 * logdet - 0.5 * dim * std::log(2.0 * std::numbers::pi);
}

double stage_descriptor_objective(std::span<const Vector> points, const Vector& mean,
                                  const Matrix& precision, double alpha) {
    double total = 0.0;
    if (!points.empty()) {
        const GaussianScorer scorer(mean, precision);
        for (const auto& p : points) total += scorer(p);
    }
    return total - alpha * off_diagonal_l1(precision);
}

GaussianScorer::GaussianScorer(const Vector& mean, const Matrix& precision)
    : mean_(mean), precision_(precision) {
    if (precision.rows() != mean.size() || precision.cols() != mean.size()) {
        throw ArgumentError("GaussianScorer: dimension mismatch");
    }
    const double dim = static_cast<double>(mean.size());
    normalizer_ = 0.5 * log_det_pd(precision) - 0.5 * dim * std::log(2.0 * std::numbers::pi);
}

double GaussianScorer::operator()(const Vector& x) const {
    if (x.size() != mean_.size()) throw ArgumentError("gaussian_loglik: dimension mismatch");
    // Plain loops: this runs once per tick and stage, and Eigen temporaries
    // would allocate on every call.
    const Eigen::Index d = mean_.size();
    double quad = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        const double cj = x(j) - mean_(j);
        double row = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) row += precision_(i, j) * (x(i) - mean_(i));
        quad += cj * row;
    }
    return -0.5 * quad + normalizer_;
}

}  // namespace timecast
