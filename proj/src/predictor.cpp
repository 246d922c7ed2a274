#include "timecast/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

namespace timecast {

namespace {

double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

void require_positive_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be a positive finite time");
}

double ridge_penalty(double feature_trace, double dim) {
    return std::max(1e-6 * feature_trace / std::max(dim, 1.0), 1e-12);
}

Vector solve_ridge(const Matrix& gram, const Vector& moment, double penalty) {
    const Eigen::Index d = gram.rows() - 1;
    Matrix lhs = gram;
    lhs.diagonal().head(d).array() += penalty;
    return lhs.ldlt().solve(moment);
}

}  // namespace

void FirstHittingParams::validate() const {
    if (!(mu_ig > 0.0) || !(lambda_ig > 0.0)) {
        throw ArgumentError("first-hitting parameters must be positive");
    }
}

LinkPrediction hitting_params(const StageModel& stage, const Vector& x) {
    LinkPrediction out;
    out.raw = stage.link(x);
    out.clamped = !(out.raw >= kMinPredictedTime);
    out.params.mu_ig = out.clamped ? kMinPredictedTime : out.raw;
    const double sigma = std::max(stage.diffusion, kMinDiffusion);
    out.params.lambda_ig = 1.0 / (sigma * sigma);
    return out;
}

namespace {

template <typename At>
LinkFit fit_link_impl(std::size_t count, At at, std::span<const double> labels) {
    if (count != labels.size()) throw ArgumentError("fit_link: size mismatch");
    if (count == 0) throw ArgumentError("fit_link: no pairs");
    const auto n = static_cast<Eigen::Index>(count);
    const auto d = at(0).size();
    Matrix design(n, d + 1);
    Vector target(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector& x = at(static_cast<std::size_t>(i));
        if (x.size() != d) throw ArgumentError("fit_link: dimension mismatch");
        design.row(i).head(d) = x.transpose();
        design(i, d) = 1.0;
        target(i) = labels[static_cast<std::size_t>(i)];
    }

    if (n >= d + 2) {
        Eigen::ColPivHouseholderQR<Matrix> qr(design);
        if (qr.rank() == d + 1) return LinkFit{qr.solve(target), false};
    }
    const Matrix gram = design.transpose() * design;
    const double penalty = ridge_penalty(gram.diagonal().head(d).sum(), static_cast<double>(d));
    return LinkFit{solve_ridge(gram, design.transpose() * target, penalty), true};
}

}  // namespace

LinkFit fit_link(std::span<const Vector> features, std::span<const double> labels) {
    return fit_link_impl(features.size(), [&](std::size_t i) -> const Vector& { return features[i]; }, labels);
}

LinkFit fit_link(std::span<const Vector* const> features, std::span<const double> labels) {
    return fit_link_impl(features.size(), [&](std::size_t i) -> const Vector& { return *features[i]; }, labels);
}

LinkFit fit_link_from_stats(const LinkStats& stats) {
    if (stats.count < 1) throw ArgumentError("fit_link: no pairs");
    const Eigen::Index d = stats.gram.rows() - 1;
    bool full_rank = stats.count >= d + 2;
    if (full_rank) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(stats.gram, Eigen::EigenvaluesOnly);
        const double hi = eig.eigenvalues().maxCoeff();
        full_rank = eig.eigenvalues().minCoeff() > 1e-12 * hi;
    }
    if (full_rank) {
        const Eigen::LDLT<Matrix> ldlt(stats.gram);
        if (ldlt.info() == Eigen::Success) return LinkFit{ldlt.solve(stats.moment), false};
    }
    const double penalty =
        ridge_penalty(stats.gram.diagonal().head(d).sum(), static_cast<double>(d));
    return LinkFit{solve_ridge(stats.gram, stats.moment, penalty), true};
}

DiffusionFit fit_diffusion(std::span<const double> labels) {
    if (labels.size() < 2) {
        throw DegenerateStageError("fit_diffusion: need at least two labeled points");
    }
    double inv_sum = 0.0;
    for (double tau : labels) {
        require_positive_tau(tau);
        inv_sum += 1.0 / tau;
    }
    const double n = static_cast<double>(labels.size());
    DiffusionFit out;
    out.increment_mean = inv_sum / n;
    for (double tau : labels) out.abs_dev_sum += std::abs(1.0 / tau - out.increment_mean);
    out.diffusion = std::max(std::sqrt(out.abs_dev_sum / n), kMinDiffusion);
    return out;
}

double event_density(const FirstHittingParams& params, double tau) {
    require_positive_tau(tau);
    params.validate();
    const double mu = params.mu_ig;
    const double lambda = params.lambda_ig;
    const double dev = tau - mu;
    const double log_p = 0.5 * (std::log(lambda) - std::log(2.0 * std::numbers::pi) - 3.0 * std::log(tau)) -
                         lambda * dev * dev / (2.0 * mu * mu * tau);
    return std::exp(log_p);
}

double log_normal_cdf(double x) {
    if (x > 5.0) return std::log1p(-normal_upper_tail(x));
    if (x > -30.0) return std::log(normal_upper_tail(-x));
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2) +
                          105.0 / (x2 * x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double survival(const FirstHittingParams& params, double tau) {
    require_positive_tau(tau);
    params.validate();
    const double mu = params.mu_ig;
    const double lambda = params.lambda_ig;
    const double scale = std::sqrt(lambda / tau);
    const double a = scale * (tau / mu - 1.0);
    const double b = scale * (tau / mu + 1.0);
    const double upper = normal_upper_tail(a);
    const double reflected = std::exp(2.0 * lambda / mu + log_normal_cdf(-b));
    return std::clamp(upper - reflected, 0.0, 1.0);
}

double event_cdf(const FirstHittingParams& params, double tau) { return 1.0 - survival(params, tau); }

double predicted_time(const FirstHittingParams& params) { return params.mu_ig; }

double predictor_loglik(const Vector& x, double tau, const StageModel& stage) {
    require_positive_tau(tau);
    const double sigma2 = stage.diffusion * stage.diffusion;
    return -std::abs(tau - stage.link(x)) - std::log(sigma2) -
           std::abs(1.0 / tau - stage.increment_mean) / sigma2;
}

}  // namespace timecast
