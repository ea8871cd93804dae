#include "cliff/core.hpp"

#include "cliff/error.hpp"

namespace cliff {

std::string to_string(Unit u) { return u == Unit::meter ? "meter" : "pixel"; }

Unit unit_from_string(const std::string& s) {
    if (s == "meter" || s == "m") return Unit::meter;
    if (s == "pixel" || s == "px") return Unit::pixel;
    throw InvalidInput("unknown unit '" + s + "' (expected meter or pixel)");
}

double wrap_angle(double a) {
    // fmod keeps the reduction exact for |a| within a few turns.
    double r = std::fmod(a, kTwoPi);
    if (r > kPi) {
        r -= kTwoPi;
    } else if (r <= -kPi) {
        r += kTwoPi;
    }
    // Rounding in the subtraction can land exactly on -pi.
    if (r <= -kPi) r = kPi;
    return r;
}

double angular_diff(double a, double b) { return wrap_angle(a - b); }

PolarVelocity to_polar(PlanarVector v) {
    if (!v.finite()) throw InvalidInput("to_polar: non-finite velocity component");
    const double speed = std::hypot(v.x, v.y);
    if (speed == 0.0) return {0.0, 0.0};
    return {speed, wrap_angle(std::atan2(v.y, v.x))};
}

PlanarVector from_polar(PolarVelocity p) { return {p.speed * std::cos(p.heading), p.speed * std::sin(p.heading)}; }

void validate(const Trajectory& traj) {
    if (traj.states.size() < 2) throw DataError("trajectory '" + traj.id + "' has fewer than 2 states");
    if (!(traj.dt > 0.0)) throw DataError("trajectory '" + traj.id + "' has non-positive dt");
    if (traj.times.size() != traj.states.size())
        throw DataError("trajectory '" + traj.id + "' has mismatched times/states");
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const auto& s = traj.states[k];
        if (!s.position.finite() || !s.velocity.finite())
            throw DataError("trajectory '" + traj.id + "' has a non-finite state at index " + std::to_string(k));
        if (k > 0) {
            const double step = traj.times[k] - traj.times[k - 1];
            if (std::abs(step - traj.dt) > 1e-6 * traj.dt + 1e-9)
                throw DataError("trajectory '" + traj.id + "' is not uniformly spaced at index " +
                                std::to_string(k));
        }
    }
}

}  // namespace cliff
