#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliff/core.hpp"
#include "cliff/ingest.hpp"

namespace cliff::synth {

enum class PathType {
    line,      // starts at origin (plus lateral offset)
    arc,       // like line, heading turns by turn_rate rad/s
    crossing,  // straight line whose midpoint passes the origin
};

std::string to_string(PathType p);
PathType path_from_string(const std::string& s);

struct ClassSpec {
    std::string label;
    PathType path = PathType::line;
    double speed = 1.0;    // unit/s
    double heading = 0.0;  // rad
    int count = 1;
    PlanarVector origin;
    double lateral_spread = 0.0;  // start offsets uniform in +-spread/2, perpendicular to heading
    double turn_rate = 0.0;       // arc only
};

struct ScenarioSpec {
    std::string name = "synthetic";
    Unit unit = Unit::meter;
    std::vector<ClassSpec> classes;
    double noise_sigma_pos = 0.0;    // observation noise on positions
    double noise_sigma_speed = 0.0;  // per-step isotropic velocity noise
    double dt = kDefaultDt;
    int steps_per_traj = 40;
    std::uint64_t seed = 0;

    /// Throws InvalidInput. min_steps is O_p + T_p of the intended use.
    void validate(int min_steps = 20) const;
};

/// Each step draws velocity = nominal + N(0, sigma_speed^2 I) and integrates it; the
/// stored velocity is that draw. Trajectory (c, n) uses stream derive_seed(seed, {c, n}).
Dataset generate(const ScenarioSpec& spec);

/// Two classes crossing at the origin: "A" along +x at 1.2, "B" along pi/4 at 0.6.
ScenarioSpec crossing_scenario(std::uint64_t seed = 0);

/// A majority class "group" and a faster minority "carrier" on the same corridor.
ScenarioSpec kl_contrast_scenario(std::uint64_t seed = 0);

/// One noiseless class on straight lines.
ScenarioSpec line_scenario(double speed = 1.0, double heading = 0.0, int count = 10, int steps = 30);

}  // namespace cliff::synth
