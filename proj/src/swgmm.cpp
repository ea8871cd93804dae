#include "cliff/swgmm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "cliff/error.hpp"

namespace cliff {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
constexpr int kWrapCount = 2 * kWrapLimit + 1;
constexpr double kDensityFloor = 1e-300;

// log N([dh, ds]; 0, cov) for a precomputed inverse and log-determinant.
struct GaussianTerms {
    double inv_tt, inv_tr, inv_rr;
    double log_norm;  // -log(2 pi) - 0.5 log det

    explicit GaussianTerms(const Cov2& c) {
        const double det = c.det();
        inv_tt = c.rr / det;
        inv_tr = -c.tr / det;
        inv_rr = c.tt / det;
        log_norm = -kLogTwoPi - 0.5 * std::log(det);
    }

    double log_density(double dh, double ds) const {
        const double maha = inv_tt * dh * dh + 2.0 * inv_tr * dh * ds + inv_rr * ds * ds;
        return log_norm - 0.5 * maha;
    }
};

void require_valid_cov(const Cov2& c) {
    if (!(c.min_eigenvalue() >= kCovarianceFloor * (1.0 - 1e-9)) || !std::isfinite(c.det()))
        throw NumericError("semi-wrapped component covariance is below the regularization floor");
}

double log_sum_exp(std::span<const double> xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

// Embedding that respects heading circularity: nearby velocities map to nearby points.
std::array<double, 3> embed(const PolarVelocity& v) {
    return {v.speed * std::cos(v.heading), v.speed * std::sin(v.heading), v.speed};
}

double sq_dist(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

// k-means++ seeding followed by a few Lloyd iterations; returns the cluster of each sample.
std::vector<int> kmeans_assign(std::span<const PolarVelocity> samples, int k, Rng& rng) {
    const std::size_t n = samples.size();
    std::vector<std::array<double, 3>> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = embed(samples[i]);

    std::vector<std::array<double, 3>> centers;
    centers.reserve(static_cast<std::size_t>(k));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    centers.push_back(pts[pick(rng)]);

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(pts[i], centers[0]);
    while (static_cast<int>(centers.size()) < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (chosen = 0; chosen + 1 < n; ++chosen) {
                target -= d2[chosen];
                if (target < 0.0) break;
            }
        } else {
            chosen = pick(rng);
        }
        centers.push_back(pts[chosen]);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
    }

    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 10; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(pts[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(pts[i], centers[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                changed = true;
                assign[i] = best;
            }
        }
        if (!changed) break;
        std::vector<std::array<double, 3>> sums(static_cast<std::size_t>(k), {0.0, 0.0, 0.0});
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            for (int d = 0; d < 3; ++d) sums[c][static_cast<std::size_t>(d)] += pts[i][static_cast<std::size_t>(d)];
            ++counts[c];
        }
        for (std::size_t c = 0; c < centers.size(); ++c) {
            if (counts[c] == 0) continue;
            for (int d = 0; d < 3; ++d)
                centers[c][static_cast<std::size_t>(d)] =
                    sums[c][static_cast<std::size_t>(d)] / static_cast<double>(counts[c]);
        }
    }
    return assign;
}

Swgmm initial_model(std::span<const PolarVelocity> samples, int k, Rng& rng) {
    const auto assign = kmeans_assign(samples, k, rng);
    const std::size_t n = samples.size();
    Swgmm m;
    for (int c = 0; c < k; ++c) {
        double sx = 0, sy = 0, sr = 0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != c) continue;
            const auto e = embed(samples[i]);
            sx += e[0];
            sy += e[1];
            sr += e[2];
            ++count;
        }
        if (count == 0) continue;
        SemiWrappedComponent comp;
        comp.weight = static_cast<double>(count) / static_cast<double>(n);
        comp.mean.heading = (sx == 0.0 && sy == 0.0) ? 0.0 : wrap_angle(std::atan2(sy, sx));
        comp.mean.speed = sr / static_cast<double>(count);
        double tt = 0, tr = 0, rr = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (assign[i] != c) continue;
            const double dh = angular_diff(samples[i].heading, comp.mean.heading);
            const double ds = samples[i].speed - comp.mean.speed;
            tt += dh * dh;
            tr += dh * ds;
            rr += ds * ds;
        }
        const auto cn = static_cast<double>(count);
        comp.cov = {tt / cn + kCovarianceFloor, tr / cn, rr / cn + kCovarianceFloor};
        m.components.push_back(comp);
    }
    m.support_count = n;
    return m;
}

// E-step: fills resp (n x J x wraps) and returns the log-likelihood.
double expectation(const Swgmm& m, std::span<const PolarVelocity> samples, std::vector<double>& resp) {
    const std::size_t n = samples.size();
    const std::size_t J = m.components.size();
    const std::size_t stride = J * kWrapCount;
    resp.assign(n * stride, 0.0);

    std::vector<GaussianTerms> terms;
    std::vector<double> log_w;
    terms.reserve(J);
    for (const auto& c : m.components) {
        terms.emplace_back(c.cov);
        log_w.push_back(std::log(c.weight));
    }

    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* r = resp.data() + i * stride;
        for (std::size_t j = 0; j < J; ++j) {
            const auto& c = m.components[j];
            const double ds = samples[i].speed - c.mean.speed;
            for (int k = -kWrapLimit; k <= kWrapLimit; ++k) {
                const double dh = samples[i].heading + kTwoPi * k - c.mean.heading;
                r[j * kWrapCount + static_cast<std::size_t>(k + kWrapLimit)] = log_w[j] + terms[j].log_density(dh, ds);
            }
        }
        const double lse = log_sum_exp({r, stride});
        if (!std::isfinite(lse)) throw NumericError("fit_em: non-finite log-likelihood");
        for (std::size_t q = 0; q < stride; ++q) r[q] = std::exp(r[q] - lse);
        ll += lse;
    }
    return ll;
}

Swgmm maximization(const Swgmm& prev, std::span<const PolarVelocity> samples, const std::vector<double>& resp) {
    const std::size_t n = samples.size();
    const std::size_t J = prev.components.size();
    const std::size_t stride = J * kWrapCount;
    Swgmm next;
    next.support_count = n;
    for (std::size_t j = 0; j < J; ++j) {
        double mass = 0, mh = 0, ms = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = resp.data() + i * stride + j * kWrapCount;
            for (int k = -kWrapLimit; k <= kWrapLimit; ++k) {
                const double w = r[k + kWrapLimit];
                mass += w;
                mh += w * (samples[i].heading + kTwoPi * k);
                ms += w * samples[i].speed;
            }
        }
        if (mass <= 1e-10 * static_cast<double>(n)) continue;
        mh /= mass;
        ms /= mass;
        double tt = 0, tr = 0, rr = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = resp.data() + i * stride + j * kWrapCount;
            const double ds = samples[i].speed - ms;
            for (int k = -kWrapLimit; k <= kWrapLimit; ++k) {
                const double w = r[k + kWrapLimit];
                const double dh = samples[i].heading + kTwoPi * k - mh;
                tt += w * dh * dh;
                tr += w * dh * ds;
                rr += w * ds * ds;
            }
        }
        SemiWrappedComponent c;
        c.weight = mass / static_cast<double>(n);
        c.mean = {std::max(0.0, ms), wrap_angle(mh)};
        c.cov = {tt / mass + kCovarianceFloor, tr / mass, rr / mass + kCovarianceFloor};
        next.components.push_back(c);
    }
    // Renormalise after dropping empty components.
    double total = 0.0;
    for (const auto& c : next.components) total += c.weight;
    for (auto& c : next.components) c.weight /= total;
    return next;
}

}  // namespace

double Cov2::min_eigenvalue() const {
    const double mean = 0.5 * (tt + rr);
    const double half_diff = 0.5 * (tt - rr);
    return mean - std::sqrt(half_diff * half_diff + tr * tr);
}

void validate(const Swgmm& m) {
    if (m.components.empty()) throw InvalidInput("mixture has no components");
    double total = 0.0;
    for (const auto& c : m.components) {
        if (!(c.weight > 0.0 && c.weight <= 1.0)) throw InvalidInput("mixture weight outside (0, 1]");
        if (!(c.mean.speed >= 0.0) || !std::isfinite(c.mean.speed)) throw InvalidInput("negative mean speed");
        if (!(c.mean.heading > -kPi && c.mean.heading <= kPi)) throw InvalidInput("mean heading not wrapped");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InvalidInput("mixture weights do not sum to 1");
}

double swn_pdf(const SemiWrappedComponent& comp, PolarVelocity v) {
    require_valid_cov(comp.cov);
    const GaussianTerms g(comp.cov);
    const double ds = v.speed - comp.mean.speed;
    double density = 0.0;
    for (int k = -kWrapLimit; k <= kWrapLimit; ++k)
        density += std::exp(g.log_density(v.heading + kTwoPi * k - comp.mean.heading, ds));
    return density;
}

double swgmm_pdf(const Swgmm& m, PolarVelocity v) {
    double density = 0.0;
    for (const auto& c : m.components) density += c.weight * swn_pdf(c, v);
    return density;
}

double log_likelihood(const Swgmm& m, std::span<const PolarVelocity> samples) {
    for (const auto& c : m.components) require_valid_cov(c.cov);
    std::vector<double> resp;
    return expectation(m, samples, resp);
}

EmResult fit_em(std::span<const PolarVelocity> samples, int components, std::uint64_t seed,
                const EmOptions& options) {
    if (components < 1) throw InvalidInput("fit_em: need at least one component");
    if (samples.size() < 3 * static_cast<std::size_t>(components))
        throw InsufficientData("fit_em: " + std::to_string(samples.size()) + " samples are too few for " +
                               std::to_string(components) + " components");
    for (const auto& s : samples)
        if (!std::isfinite(s.speed) || !std::isfinite(s.heading) || s.speed < 0.0)
            throw InvalidInput("fit_em: invalid sample");

    Rng rng = make_rng(seed);
    EmResult result;
    result.model = initial_model(samples, components, rng);

    std::vector<double> resp;
    double ll = expectation(result.model, samples, resp);
    result.trace.push_back(ll);
    for (int it = 1; it <= options.max_iter; ++it) {
        Swgmm next = maximization(result.model, samples, resp);
        const double next_ll = expectation(next, samples, resp);
        result.model = std::move(next);
        result.trace.push_back(next_ll);
        result.iterations = it;
        const double gain = next_ll - ll;
        ll = next_ll;
        if (gain < options.tol * std::abs(result.trace[result.trace.size() - 2])) break;
    }
    result.log_likelihood = ll;
    result.model.support_count = samples.size();
    return result;
}

double bic(const Swgmm& m, double log_lik, std::size_t n) {
    const auto params = 6.0 * static_cast<double>(m.components.size()) - 1.0;
    return -2.0 * log_lik + params * std::log(static_cast<double>(n));
}

SelectionResult select_components(std::span<const PolarVelocity> samples, int max_components, std::uint64_t seed,
                                  const EmOptions& options) {
    if (samples.size() < 3) throw InsufficientData("select_components: need at least 3 samples");
    if (max_components < 1) throw InvalidInput("select_components: max_components must be >= 1");
    const int limit = std::min(max_components, static_cast<int>(samples.size() / 3));

    SelectionResult best;
    double best_score = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= limit; ++j) {
        auto fit = fit_em(samples, j, derive_seed(seed, {static_cast<std::uint64_t>(j)}), options);
        const double score = bic(fit.model, fit.log_likelihood, samples.size());
        best.bic_by_components.push_back(score);
        if (score < best_score) {
            best_score = score;
            best.model = std::move(fit.model);
            best.chosen_components = j;
        }
    }
    return best;
}

PolarVelocity sample(const Swgmm& m, Rng& rng) {
    std::size_t idx = 0;
    if (m.components.size() > 1) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double target = u(rng);
        for (idx = 0; idx + 1 < m.components.size(); ++idx) {
            target -= m.components[idx].weight;
            if (target < 0.0) break;
        }
    }
    const auto& c = m.components[idx];
    // Cholesky factor of the (heading, speed) covariance.
    const double l00 = std::sqrt(std::max(c.cov.tt, 0.0));
    const double l10 = l00 > 0.0 ? c.cov.tr / l00 : 0.0;
    const double l11 = std::sqrt(std::max(c.cov.rr - l10 * l10, 0.0));

    std::normal_distribution<double> z(0.0, 1.0);
    double heading = 0.0, speed = -1.0;
    for (int attempt = 0; attempt <= 16 && speed < 0.0; ++attempt) {
        const double z0 = z(rng);
        const double z1 = z(rng);
        heading = c.mean.heading + l00 * z0;
        speed = c.mean.speed + l10 * z0 + l11 * z1;
    }
    return {std::max(speed, 0.0), wrap_angle(heading)};
}

PolarVelocity ml_velocity(const Swgmm& m) {
    if (m.components.empty()) throw InvalidInput("ml_velocity: empty mixture");
    std::size_t best = 0;
    double best_peak = -1.0;
    for (std::size_t j = 0; j < m.components.size(); ++j) {
        const auto& c = m.components[j];
        const double det = c.cov.det();
        const double peak = det > 0.0 ? c.weight / (kTwoPi * std::sqrt(det)) : std::numeric_limits<double>::infinity();
        if (peak > best_peak) {
            best_peak = peak;
            best = j;
        }
    }
    return m.components[best].mean;
}

double kl_mc(const Swgmm& p, const Swgmm& q, int n, Rng& rng) {
    if (n < 1) throw InvalidInput("kl_mc: n must be >= 1");
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto v = sample(p, rng);
        acc += std::log(std::max(swgmm_pdf(p, v), kDensityFloor)) - std::log(std::max(swgmm_pdf(q, v), kDensityFloor));
    }
    return acc / static_cast<double>(n);
}

}  // namespace cliff
