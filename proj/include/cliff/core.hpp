#pragma once

#include <cmath>
#include <compare>
#include <numbers>
#include <string>
#include <vector>

namespace cliff {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Cartesian 2D vector in dataset units (meters or pixels).
struct PlanarVector {
    double x = 0.0;
    double y = 0.0;

    constexpr PlanarVector& operator+=(PlanarVector o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr PlanarVector& operator-=(PlanarVector o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    friend constexpr PlanarVector operator+(PlanarVector a, PlanarVector b) { return a += b; }
    friend constexpr PlanarVector operator-(PlanarVector a, PlanarVector b) { return a -= b; }
    friend constexpr PlanarVector operator*(double s, PlanarVector v) { return {s * v.x, s * v.y}; }
    friend constexpr PlanarVector operator*(PlanarVector v, double s) { return {s * v.x, s * v.y}; }
    friend constexpr bool operator==(PlanarVector, PlanarVector) = default;

    double norm() const { return std::hypot(x, y); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double distance(PlanarVector a, PlanarVector b) { return (a - b).norm(); }

struct State {
    PlanarVector position;
    PlanarVector velocity;  // unit/s

    friend bool operator==(const State&, const State&) = default;
};

/// Velocity in polar form: speed >= 0, heading in (-pi, pi].
struct PolarVelocity {
    double speed = 0.0;
    double heading = 0.0;

    friend bool operator==(const PolarVelocity&, const PolarVelocity&) = default;
};

struct AgentClass {
    std::string label;
    int id = 0;

    // Ordered by the dense id so class-keyed containers iterate in a stable order.
    friend bool operator==(const AgentClass& a, const AgentClass& b) { return a.id == b.id && a.label == b.label; }
    friend auto operator<=>(const AgentClass& a, const AgentClass& b) {
        if (auto c = a.id <=> b.id; c != 0) return c;
        return a.label <=> b.label;
    }
};

enum class Unit { meter, pixel };

std::string to_string(Unit u);
Unit unit_from_string(const std::string& s);

/// A single agent track. `times` parallels `states`; for resampled tracks it is the
/// uniform lattice start_time + k * dt.
struct Trajectory {
    std::string id;
    AgentClass agent_class;
    double dt = 0.4;
    double start_time = 0.0;
    std::vector<double> times;
    std::vector<State> states;

    std::size_t size() const { return states.size(); }
};

/// Throws DataError if the trajectory breaks its invariants (length, finiteness, uniform spacing).
void validate(const Trajectory& traj);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Shortest signed angular difference a - b, in (-pi, pi].
double angular_diff(double a, double b);

/// Throws InvalidInput for non-finite components. Heading is 0 for a zero vector.
PolarVelocity to_polar(PlanarVector v);

PlanarVector from_polar(PolarVelocity p);

}  // namespace cliff
