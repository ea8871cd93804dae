#include "cliff/predictor.hpp"

#include <cmath>

#include "cliff/error.hpp"
#include "cliff/parallel.hpp"

namespace cliff {

std::string to_string(PredictionMode m) { return m == PredictionMode::stochastic ? "stochastic" : "most_likely"; }

PredictionMode prediction_mode_from_string(const std::string& s) {
    if (s == "stochastic") return PredictionMode::stochastic;
    if (s == "most_likely" || s == "most-likely") return PredictionMode::most_likely;
    throw InvalidInput("unknown prediction mode '" + s + "' (expected stochastic or most_likely)");
}

void PredictorParams::validate() const {
    if (!(beta > 0.0)) throw InvalidInput("predictor: beta must be positive");
    if (!(r_s > 0.0)) throw InvalidInput("predictor: r_s must be positive");
    if (!(dt > 0.0)) throw InvalidInput("predictor: dt must be positive");
    if (predicted_steps < 1) throw InvalidInput("predictor: T_p must be >= 1");
    if (samples < 1) throw InvalidInput("predictor: K must be >= 1");
}

double kernel(double x, double beta) { return std::exp(-beta * x * x); }

PolarVelocity rollout_step(PolarVelocity current, PolarVelocity sampled, double beta) {
    const double d_speed = sampled.speed - current.speed;
    const double d_heading = angular_diff(sampled.heading, current.heading);
    const double speed = current.speed + d_speed * kernel(d_speed, beta);
    const double heading = wrap_angle(current.heading + d_heading * kernel(d_heading, beta));
    return {speed, heading};
}

PredictionSet predict(const PredictionInstance& instance, const ConditionedMapSet& maps,
                      const PredictorParams& params, bool conditioned, std::uint64_t seed) {
    params.validate();
    if (instance.observed.empty()) throw InvalidInput("predict: instance '" + instance.id + "' has no observations");

    PredictionSet out;
    out.instance_id = instance.id;
    const CliffMap* map = &maps.general;
    if (conditioned) {
        if (const auto* own = maps.for_class(instance.agent_class)) {
            map = own;
        } else {
            out.fell_back_to_general = true;
        }
    }

    const State& last = instance.observed.back();
    PlanarVector start_velocity = last.velocity;
    if (params.init == InitialVelocity::window_mean_speed) {
        double speed = 0.0;
        for (const auto& s : instance.observed) speed += s.velocity.norm();
        speed /= static_cast<double>(instance.observed.size());
        start_velocity = from_polar({speed, to_polar(last.velocity).heading});
    }

    const int K = params.effective_samples();
    const auto steps = static_cast<std::size_t>(params.predicted_steps);
    out.samples.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
        PlanarVector velocity = start_velocity;
        PolarVelocity polar = to_polar(velocity);
        // Positions are extrapolated from the point where the velocity last changed,
        // so an unbiased rollout reproduces cvm_predict bit for bit.
        PlanarVector anchor = last.position;
        double held_steps = 0.0;

        std::vector<PlanarVector> positions;
        positions.reserve(steps);
        for (std::size_t t = 0; t < steps; ++t) {
            const PlanarVector here = held_steps == 0.0 ? anchor : anchor + (held_steps * params.dt) * velocity;
            if (const Swgmm* local = query(*map, here, params.r_s)) {
                const PolarVelocity target =
                    params.mode == PredictionMode::stochastic ? sample(*local, rng) : ml_velocity(*local);
                const PolarVelocity next = rollout_step(polar, target, params.beta);
                if (!(next == polar)) {
                    polar = next;
                    velocity = from_polar(polar);
                    anchor = here;
                    held_steps = 0.0;
                }
            }
            held_steps += 1.0;
            positions.push_back(anchor + (held_steps * params.dt) * velocity);
        }
        out.samples.push_back(std::move(positions));
    }
    return out;
}

std::vector<PredictionSet> predict_all(std::span<const PredictionInstance> instances, const ConditionedMapSet& maps,
                                       const PredictorParams& params, bool conditioned, std::uint64_t base_seed,
                                       unsigned threads) {
    std::vector<PredictionSet> out(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t n) {
        out[n] = predict(instances[n], maps, params, conditioned, derive_seed(base_seed, {n}));
    });
    return out;
}

std::vector<PlanarVector> cvm_predict(const PredictionInstance& instance, int predicted_steps, double dt) {
    if (instance.observed.empty()) throw InvalidInput("cvm_predict: instance '" + instance.id + "' has no observations");
    const State& last = instance.observed.back();
    std::vector<PlanarVector> out;
    out.reserve(static_cast<std::size_t>(std::max(predicted_steps, 0)));
    for (int t = 1; t <= predicted_steps; ++t) out.push_back(last.position + (static_cast<double>(t) * dt) * last.velocity);
    return out;
}

}  // namespace cliff
