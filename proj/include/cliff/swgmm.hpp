#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cliff/core.hpp"
#include "cliff/random.hpp"

namespace cliff {

/// Symmetric 2x2 covariance over (heading, speed).
struct Cov2 {
    double tt = 0.0;  // var(heading)
    double tr = 0.0;  // cov(heading, speed)
    double rr = 0.0;  // var(speed)

    double det() const { return tt * rr - tr * tr; }
    double min_eigenvalue() const;

    static Cov2 diagonal(double var_heading, double var_speed) { return {var_heading, 0.0, var_speed}; }
    static Cov2 isotropic(double var) { return {var, 0.0, var}; }

    friend bool operator==(const Cov2&, const Cov2&) = default;
};

/// Covariance regularization added on every M-step and the validity floor for densities.
inline constexpr double kCovarianceFloor = 1e-6;

/// Wrap offsets summed by the semi-wrapped density: theta + 2*pi*k for k in [-1, 1].
inline constexpr int kWrapLimit = 1;

/// Bivariate normal over (heading, speed); heading wrapped on the circle, speed linear.
struct SemiWrappedComponent {
    double weight = 1.0;
    PolarVelocity mean;  // mean.heading in (-pi, pi], mean.speed >= 0
    Cov2 cov;

    friend bool operator==(const SemiWrappedComponent&, const SemiWrappedComponent&) = default;
};

struct Swgmm {
    std::vector<SemiWrappedComponent> components;
    std::size_t support_count = 0;  // observations the mixture was fitted on

    std::size_t size() const { return components.size(); }

    friend bool operator==(const Swgmm&, const Swgmm&) = default;
};

/// Throws InvalidInput when weights are out of range / not normalised, or a mean is invalid.
void validate(const Swgmm& m);

/// Sum over k of N([heading + 2 pi k, speed]; mean, cov).
/// Throws NumericError if cov falls below kCovarianceFloor.
double swn_pdf(const SemiWrappedComponent& comp, PolarVelocity v);

double swgmm_pdf(const Swgmm& m, PolarVelocity v);

struct EmOptions {
    double tol = 1e-6;  // relative log-likelihood improvement
    int max_iter = 200;
};

struct EmResult {
    Swgmm model;
    double log_likelihood = 0.0;
    std::vector<double> trace;  // log-likelihood before each M-step and after the last
    int iterations = 0;
};

/// EM for a J-component semi-wrapped mixture, initialised by k-means++ on the
/// circular embedding (rho cos theta, rho sin theta, rho). Components whose
/// responsibility mass vanishes are dropped, so the result may hold fewer than J.
/// Throws InsufficientData if samples.size() < 3 * J.
EmResult fit_em(std::span<const PolarVelocity> samples, int components, std::uint64_t seed,
                const EmOptions& options = {});

/// Log-likelihood of samples under m (natural log).
double log_likelihood(const Swgmm& m, std::span<const PolarVelocity> samples);

/// -2 log L + (6J - 1) log N.
double bic(const Swgmm& m, double log_lik, std::size_t n);

struct SelectionResult {
    Swgmm model;
    int chosen_components = 0;
    std::vector<double> bic_by_components;  // index J-1
};

/// Fits J = 1 .. min(max_components, n / 3) and keeps the BIC minimiser.
SelectionResult select_components(std::span<const PolarVelocity> samples, int max_components, std::uint64_t seed,
                                  const EmOptions& options = {});

/// Draws one velocity. Negative speeds are redrawn up to 16 times, then clamped to 0.
PolarVelocity sample(const Swgmm& m, Rng& rng);

/// Mean of the component with the highest peak density weight / (2 pi sqrt(det)).
PolarVelocity ml_velocity(const Swgmm& m);

/// Monte-Carlo estimate of KL(p || q) from n draws of p; densities floored at 1e-300.
double kl_mc(const Swgmm& p, const Swgmm& q, int n, Rng& rng);

}  // namespace cliff
