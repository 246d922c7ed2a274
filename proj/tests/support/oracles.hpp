#pragma once

// Reference computations used only by the tests. Each one takes a different
// route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline double soft(double v, double t) { return std::copysign(std::max(std::abs(v) - t, 0.0), v); }

// Block coordinate descent graphical lasso with an unpenalized diagonal:
// minimizes -log det T + tr(S T) + lambda * sum_{i != j} |T_ij|.
inline Matrix glasso_cd(const Matrix& s, double lambda, double tol = 1e-13, int max_sweeps = 100000) {
    const Eigen::Index p = s.rows();
    Matrix w = s;
    Matrix betas = Matrix::Zero(p - 1, p);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index i = 0; i < p; ++i) {
                if (i != j) idx.push_back(i);
            }
            const auto m = static_cast<Eigen::Index>(idx.size());
            Matrix w11(m, m);
            Vector s12(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                s12(a) = s(idx[a], j);
                for (Eigen::Index b = 0; b < m; ++b) w11(a, b) = w(idx[a], idx[b]);
            }
            Vector beta = betas.col(j);
            for (int inner = 0; inner < 100000; ++inner) {
                double delta = 0.0;
                for (Eigen::Index k = 0; k < m; ++k) {
                    const double r = s12(k) - w11.row(k).dot(beta) + w11(k, k) * beta(k);
                    const double nb = soft(r, lambda) / w11(k, k);
                    delta = std::max(delta, std::abs(nb - beta(k)));
                    beta(k) = nb;
                }
                if (delta < tol) break;
            }
            betas.col(j) = beta;
            const Vector w12 = w11 * beta;
            for (Eigen::Index a = 0; a < m; ++a) {
                change = std::max(change, std::abs(w(idx[a], j) - w12(a)));
                w(idx[a], j) = w12(a);
                w(j, idx[a]) = w12(a);
            }
        }
        if (change < tol) break;
    }
    Matrix theta = Matrix::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < p; ++i) {
            if (i != j) idx.push_back(i);
        }
        const Vector beta = betas.col(j);
        Vector w12(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) w12(static_cast<Eigen::Index>(a)) = w(idx[a], j);
        const double t22 = 1.0 / (w(j, j) - w12.dot(beta));
        theta(j, j) = t22;
        for (std::size_t a = 0; a < idx.size(); ++a) theta(idx[a], j) = -beta(static_cast<Eigen::Index>(a)) * t22;
    }
    return 0.5 * (theta + theta.transpose());
}

// Largest violation of the glasso optimality conditions, per-sample units:
// (inv(T) - S)_ij = lambda * sign(T_ij) where T_ij != 0, |.| <= lambda elsewhere.
inline double glasso_kkt_residual(const Matrix& theta, const Matrix& s, double lambda) {
    const Matrix g = theta.inverse() - s;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
            double r = 0.0;
            if (i == j) {
                r = std::abs(g(i, j));
            } else if (theta(i, j) != 0.0) {
                r = std::abs(g(i, j) - lambda * (theta(i, j) > 0 ? 1.0 : -1.0));
            } else {
                r = std::max(0.0, std::abs(g(i, j)) - lambda);
            }
            worst = std::max(worst, r);
        }
    }
    return worst;
}

struct PathOptimum {
    double value = -std::numeric_limits<double>::infinity();
    std::vector<int> path;
};

// Enumerates every non-decreasing path through a K x T cost matrix. Ties keep
// the first path found; paths are visited in lexicographic order.
inline PathOptimum brute_force_monotone(const Matrix& costs) {
    const int k_count = static_cast<int>(costs.rows());
    const int length = static_cast<int>(costs.cols());
    PathOptimum best;
    std::vector<int> path(static_cast<std::size_t>(length), 0);
    std::function<void(int, int, double)> walk = [&](int t, int lo, double acc) {
        if (t == length) {
            if (acc > best.value) {
                best.value = acc;
                best.path = path;
            }
            return;
        }
        for (int k = lo; k < k_count; ++k) {
            path[static_cast<std::size_t>(t)] = k;
            walk(t + 1, k, acc + costs(k, t));
        }
    };
    walk(0, 0, 0.0);
    return best;
}

inline long long count_monotone_paths(int k_count, int length) {
    // C(T + K - 1, K - 1)
    long long c = 1;
    for (int i = 1; i <= k_count - 1; ++i) c = c * (length + i) / i;
    return c;
}

// log N(x; mean, inv(precision)) through determinant and explicit inverse.
inline double mvn_logpdf_direct(const Vector& x, const Vector& mean, const Matrix& precision) {
    const Matrix cov = precision.inverse();
    const Vector c = x - mean;
    const double d = static_cast<double>(x.size());
    const double quad = c.dot(cov.inverse() * c);
    return -0.5 * quad - 0.5 * std::log(cov.determinant()) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

// Affine least squares via the normal equations, solved by Gauss-Jordan
// elimination with partial pivoting.
inline Vector normal_equations(const std::vector<Vector>& xs, const std::vector<double>& ys) {
    const auto d = xs.front().size();
    const auto m = d + 1;
    Matrix a = Matrix::Zero(m, m + 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Vector z(m);
        z.head(d) = xs[i];
        z(d) = 1.0;
        a.leftCols(m) += z * z.transpose();
        a.col(m) += z * ys[i];
    }
    for (Eigen::Index c = 0; c < m; ++c) {
        Eigen::Index piv = c;
        for (Eigen::Index r = c + 1; r < m; ++r) {
            if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
        }
        a.row(c).swap(a.row(piv));
        a.row(c) /= a(c, c);
        for (Eigen::Index r = 0; r < m; ++r) {
            if (r != c) a.row(r) -= a(r, c) * a.row(c);
        }
    }
    return a.col(m);
}

// Inverse-Gaussian density written from the boundary-crossing form.
inline double ig_density(double f, double sigma, double tau) {
    const double e = 1.0 - tau / f;
    return std::exp(-e * e / (2.0 * sigma * sigma * tau)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma * tau * tau * tau);
}

// Integral of g over [a, b) (b may be +inf) for integrands concentrated like
// an inverse Gaussian with mean mu and shape lambda. Knots are log-spaced over
// the support and packed around the bulk so narrow peaks are not stepped over.
inline double integrate(const std::function<double(double)>& g, double a, double b, double mu, double lambda) {
    using boost::math::quadrature::gauss_kronrod;
    const double sd = std::sqrt(mu * mu * mu / lambda);
    const double lo = std::max(a, std::min(lambda / 400.0, mu * 1e-3));
    const double hi = std::min(b, 80.0 * std::max(mu + 10.0 * sd, 2.0 * mu * mu / lambda));
    std::vector<double> knots{lo, hi};
    for (double t = lo; t < hi; t *= 1.1) knots.push_back(t);
    for (int k = -12; k <= 12; ++k) {
        const double t = mu + 0.5 * k * sd;
        if (t > lo && t < hi) knots.push_back(t);
    }
    const double mode = mu * (std::sqrt(1.0 + 2.25 * mu * mu / (lambda * lambda)) - 1.5 * mu / lambda);
    for (double f : {0.5, 1.0, 2.0}) {
        if (mode * f > lo && mode * f < hi) knots.push_back(mode * f);
    }
    std::sort(knots.begin(), knots.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (knots[i + 1] > knots[i]) total += gauss_kronrod<double, 61>::integrate(g, knots[i], knots[i + 1], 10, 1e-13);
    }
    return total;
}

}  // namespace oracle
