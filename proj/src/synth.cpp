#include "cliff/synth.hpp"

#include <cmath>
#include <random>

#include "cliff/error.hpp"
#include "cliff/random.hpp"

namespace cliff::synth {

std::string to_string(PathType p) {
    switch (p) {
        case PathType::line: return "line";
        case PathType::arc: return "arc";
        case PathType::crossing: return "crossing";
    }
    return "line";
}

PathType path_from_string(const std::string& s) {
    if (s == "line") return PathType::line;
    if (s == "arc") return PathType::arc;
    if (s == "crossing") return PathType::crossing;
    throw InvalidInput("unknown path type '" + s + "' (expected line, arc or crossing)");
}

void ScenarioSpec::validate(int min_steps) const {
    if (classes.empty()) throw InvalidInput("scenario: no classes");
    for (const auto& c : classes) {
        if (c.label.empty()) throw InvalidInput("scenario: class with empty label");
        if (c.count < 1) throw InvalidInput("scenario: class '" + c.label + "' count must be >= 1");
        if (!(c.speed > 0.0)) throw InvalidInput("scenario: class '" + c.label + "' speed must be positive");
        if (!(c.lateral_spread >= 0.0)) throw InvalidInput("scenario: class '" + c.label + "' lateral spread < 0");
    }
    if (!(dt > 0.0)) throw InvalidInput("scenario: dt must be positive");
    if (!(noise_sigma_pos >= 0.0) || !(noise_sigma_speed >= 0.0))
        throw InvalidInput("scenario: noise levels must be non-negative");
    if (steps_per_traj < min_steps)
        throw InvalidInput("scenario: steps_per_traj " + std::to_string(steps_per_traj) + " < " +
                           std::to_string(min_steps));
}

namespace {

Trajectory make_one(const ScenarioSpec& spec, const ClassSpec& cls, const AgentClass& agent, int n, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(-0.5, 0.5);

    const PlanarVector dir{std::cos(cls.heading), std::sin(cls.heading)};
    const PlanarVector normal{-dir.y, dir.x};
    const double offset = cls.lateral_spread > 0.0 ? cls.lateral_spread * unit(rng) : 0.0;
    PlanarVector pos = cls.origin + offset * normal;
    if (cls.path == PathType::crossing)
        pos = pos - (0.5 * spec.steps_per_traj * spec.dt * cls.speed) * dir;

    Trajectory tr;
    tr.id = cls.label + "_" + std::to_string(n);
    tr.agent_class = agent;
    tr.dt = spec.dt;
    tr.start_time = 0.0;
    double heading = cls.heading;
    for (int k = 0; k < spec.steps_per_traj; ++k) {
        PlanarVector v = from_polar({cls.speed, heading});
        if (spec.noise_sigma_speed > 0.0) {
            v.x += spec.noise_sigma_speed * gauss(rng);
            v.y += spec.noise_sigma_speed * gauss(rng);
        }
        PlanarVector observed = pos;
        if (spec.noise_sigma_pos > 0.0) {
            observed.x += spec.noise_sigma_pos * gauss(rng);
            observed.y += spec.noise_sigma_pos * gauss(rng);
        }
        tr.times.push_back(k * spec.dt);
        tr.states.push_back({observed, v});
        pos = pos + spec.dt * v;
        if (cls.path == PathType::arc) heading = wrap_angle(heading + cls.turn_rate * spec.dt);
    }
    return tr;
}

}  // namespace

Dataset generate(const ScenarioSpec& spec) {
    spec.validate(2);
    Dataset ds;
    ds.name = spec.name;
    ds.unit = spec.unit;
    ds.dt = spec.dt;
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        const auto& cls = spec.classes[c];
        const AgentClass* agent = ds.find_class(cls.label);
        if (agent == nullptr) {
            ds.classes.push_back({cls.label, static_cast<int>(ds.classes.size())});
            agent = &ds.classes.back();
        }
        const AgentClass copy = *agent;
        for (int n = 0; n < cls.count; ++n) {
            Rng rng = make_rng(derive_seed(spec.seed, {c, static_cast<std::uint64_t>(n)}));
            ds.trajectories.push_back(make_one(spec, cls, copy, n, rng));
        }
    }
    return ds;
}

ScenarioSpec crossing_scenario(std::uint64_t seed) {
    ScenarioSpec s;
    s.name = "two-class-crossing";
    s.noise_sigma_pos = 0.02;
    s.noise_sigma_speed = 0.05;
    s.dt = 0.4;
    s.steps_per_traj = 40;
    s.seed = seed;
    ClassSpec a{"A", PathType::crossing, 1.2, 0.0, 60, {0.0, 0.0}, 2.0, 0.0};
    ClassSpec b{"B", PathType::crossing, 0.6, kPi / 4.0, 60, {0.0, 0.0}, 2.0, 0.0};
    s.classes = {a, b};
    return s;
}

ScenarioSpec kl_contrast_scenario(std::uint64_t seed) {
    ScenarioSpec s;
    s.name = "kl-contrast";
    s.noise_sigma_pos = 0.02;
    s.noise_sigma_speed = 0.05;
    s.dt = 0.4;
    s.steps_per_traj = 30;
    s.seed = seed;
    ClassSpec group{"group", PathType::crossing, 1.0, 0.0, 80, {0.0, 0.0}, 1.0, 0.0};
    ClassSpec carrier{"carrier", PathType::crossing, 2.0, 0.0, 20, {0.0, 0.0}, 1.0, 0.0};
    s.classes = {group, carrier};
    return s;
}

ScenarioSpec line_scenario(double speed, double heading, int count, int steps) {
    ScenarioSpec s;
    s.name = "line";
    s.steps_per_traj = steps;
    s.classes = {ClassSpec{"walker", PathType::line, speed, heading, count, {0.0, 0.0}, 1.0, 0.0}};
    return s;
}

}  // namespace cliff::synth
