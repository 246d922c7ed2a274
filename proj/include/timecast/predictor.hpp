#pragma once

#include <span>

#include "timecast/core_types.hpp"

namespace timecast {

// Lower bound applied to f(x) before it is used as an inverse-Gaussian mean.
inline constexpr double kMinPredictedTime = 1e-3;
inline constexpr double kMinDiffusion = 1e-6;

// First-hitting time of W(tau) = tau / f(x) + sigma B(tau) at boundary 1:
// inverse Gaussian with mean f(x) and shape 1 / sigma^2.
struct FirstHittingParams {
    double mu_ig = 1.0;
    double lambda_ig = 1.0;
    double boundary = 1.0;

    void validate() const;
    bool operator==(const FirstHittingParams&) const = default;
};

struct LinkPrediction {
    FirstHittingParams params;
    double raw = 0.0;  // f(x) before clamping
    bool clamped = false;
};

LinkPrediction hitting_params(const StageModel& stage, const Vector& x);

struct LinkFit {
    Vector weights;  // [A; b]
    bool ridge = false;
};

// Least-squares affine link tau ~ A x + b. Falls back to a small ridge on A
// when there are fewer than dim + 2 pairs or the design is rank deficient.
LinkFit fit_link(std::span<const Vector> features, std::span<const double> labels);
LinkFit fit_link(std::span<const Vector* const> features, std::span<const double> labels);
LinkFit fit_link_from_stats(const LinkStats& stats);

struct DiffusionFit {
    double diffusion = kMinDiffusion;
    double increment_mean = 0.0;
    double abs_dev_sum = 0.0;
};

// increment_mean = mean(1/tau); diffusion = sqrt(mean |1/tau - increment_mean|),
// floored at kMinDiffusion.
DiffusionFit fit_diffusion(std::span<const double> labels);

double event_density(const FirstHittingParams& params, double tau);
double event_cdf(const FirstHittingParams& params, double tau);
double survival(const FirstHittingParams& params, double tau);
double predicted_time(const FirstHittingParams& params);

// Per-point predictor term of the learning objective:
//   -|tau - f(x)| - log sigma^2 - |1/tau - mu_tau| / sigma^2
double predictor_loglik(const Vector& x, double tau, const StageModel& stage);

// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);

}  // namespace timecast
