#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cliff/cliffmap.hpp"
#include "cliff/core.hpp"
#include "cliff/ingest.hpp"

namespace cliff {

enum class PredictionMode {
    stochastic,   // velocities sampled from the local mixture, K rollouts
    most_likely,  // deterministic rollout on the local mixture's most likely velocity
};

enum class InitialVelocity {
    last_observed,
    window_mean_speed,  // mean observed speed, heading of the last observed state
};

std::string to_string(PredictionMode m);
PredictionMode prediction_mode_from_string(const std::string& s);

struct PredictorParams {
    double beta = 5.0;  // kernel parameter; lower trusts the map more
    double r_s = 0.2;   // sampling radius
    double dt = kDefaultDt;
    int predicted_steps = 12;
    int samples = 1;  // K
    PredictionMode mode = PredictionMode::most_likely;
    InitialVelocity init = InitialVelocity::last_observed;

    /// Rollouts that will actually be produced (1 in most-likely mode).
    int effective_samples() const { return mode == PredictionMode::most_likely ? 1 : samples; }
    /// Throws InvalidInput unless every numeric field is positive.
    void validate() const;
};

struct PredictionSet {
    std::string instance_id;
    std::vector<std::vector<PlanarVector>> samples;  // K sequences of predicted_steps positions
    bool fell_back_to_general = false;  // conditioned, but no map exists for the instance's class
};

/// exp(-beta x^2)
double kernel(double x, double beta);

/// Biases the current velocity toward the sampled one, separately in speed and in
/// (wrapped) heading, each scaled by kernel(deviation).
PolarVelocity rollout_step(PolarVelocity current, PolarVelocity sampled, double beta);

/// Map-biased constant-velocity rollout. Where no populated cell lies within r_s the
/// velocity is held. Sample k draws from the stream derive_seed(seed, {k}).
PredictionSet predict(const PredictionInstance& instance, const ConditionedMapSet& maps,
                      const PredictorParams& params, bool conditioned, std::uint64_t seed);

/// Predicts every instance; instance n uses seed derive_seed(base_seed, {n}).
std::vector<PredictionSet> predict_all(std::span<const PredictionInstance> instances, const ConditionedMapSet& maps,
                                       const PredictorParams& params, bool conditioned, std::uint64_t base_seed,
                                       unsigned threads = 1);

/// last position + t * dt * last velocity, t = 1 .. predicted_steps.
std::vector<PlanarVector> cvm_predict(const PredictionInstance& instance, int predicted_steps, double dt);

}  // namespace cliff
