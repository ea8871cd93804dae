#include <doctest.h>

#include <cmath>

#include "cliff/error.hpp"
#include "cliff/predictor.hpp"
#include "cliff/synth.hpp"
#include "oracles.hpp"

using namespace cliff;

namespace {

PredictionInstance straight_instance(PlanarVector start, PlanarVector velocity, const std::string& cls = "A") {
    PredictionInstance inst;
    inst.id = "x#0";
    inst.source_traj = "x";
    inst.agent_class = {cls, 0};
    for (int k = 0; k < 8; ++k) inst.observed.push_back({start + (0.4 * k) * velocity, velocity});
    return inst;
}

ConditionedMapSet one_cell(PolarVelocity v, double cov = 0.01) {
    ConditionedMapSet set;
    set.general.grid = GridSpec{100.0, {-50, -50}};
    set.general.cells[{0, 0}] = Swgmm{{{1.0, v, Cov2::isotropic(cov)}}, 100};
    return set;
}

}  // namespace

TEST_CASE("kernel values") {
    CHECK(std::abs(kernel(0.2, 5) - 0.81873075) < 1e-8);
    CHECK(std::abs(kernel(1.0, 5) - 0.00673795) < 1e-8);
    CHECK(kernel(0.0, 5) == 1.0);
}

TEST_CASE("rollout_step") {
    const PolarVelocity cur{1.3, -0.4};
    CHECK(rollout_step(cur, cur, 5) == cur);

    CHECK(std::abs(rollout_step({1.0, 0.0}, {2.0, 0.0}, 5).speed - 1.00673795) < 1e-8);

    // Crossing the seam from 3.0 toward -3.0 moves forward by the short way.
    const long double delta = -6.0L + 2.0L * 3.141592653589793238462643383279502884L;
    const long double raw = 3.0L + delta * std::exp(-5.0L * delta * delta);
    const long double wrapped = raw - 2.0L * 3.141592653589793238462643383279502884L;
    const auto out = rollout_step({1.0, 3.0}, {1.0, -3.0}, 5);
    CHECK(std::abs(out.heading - static_cast<double>(wrapped)) < 1e-12);
    CHECK(std::abs(static_cast<double>(raw) - 3.189640824935749) < 1e-12);
    CHECK(out.heading > -kPi);
    CHECK(out.heading <= kPi);
}

TEST_CASE("rollout speed stays between current and sampled") {
    for (double beta : {0.1, 1.0, 5.0, 50.0})
        for (double cur = 0.0; cur <= 3.0; cur += 0.25)
            for (double s = 0.0; s <= 3.0; s += 0.25) {
                const double out = rollout_step({cur, 0}, {s, 0}, beta).speed;
                CHECK(out >= std::min(cur, s) - 1e-15);
                CHECK(out <= std::max(cur, s) + 1e-15);
            }
}

TEST_CASE("kernel-scaled deviation is bounded") {
    for (double beta : {0.5, 5.0, 1e6}) {
        const double bound = 1.0 / std::sqrt(2.0 * beta * std::exp(1.0));
        for (int k = -20000; k <= 20000; ++k) {
            const double d = k * 1e-4 * 10.0 / std::sqrt(beta);
            CHECK(std::abs(d * kernel(d, beta)) <= bound + 1e-9);
        }
    }
}

TEST_CASE("first-step deviation shrinks as beta grows") {
    const auto set = one_cell({1.5, 0.5}, 0.05);
    const auto inst = straight_instance({0, 0}, {1.0, 0.0});
    PredictorParams p;
    p.mode = PredictionMode::stochastic;
    p.r_s = 100;
    p.predicted_steps = 1;
    double previous = INFINITY;
    for (double beta : {1.0, 5.0, 25.0}) {
        p.beta = beta;
        const auto out = predict(inst, set, p, false, 77);
        const double step = distance(out.samples[0][0], inst.observed.back().position);
        const double deviation = std::abs(step / p.dt - 1.0);
        CHECK(deviation <= previous);
        previous = deviation;
    }
}

TEST_CASE("cvm_predict") {
    auto inst = straight_instance({-2.8, 0}, {1, 0});
    const auto out = cvm_predict(inst, 12, 0.4);
    REQUIRE(out.size() == 12);
    CHECK(std::abs(out.back().x - 4.8) < 1e-12);
    CHECK(out.back().y == 0.0);

    auto still = straight_instance({3, 3}, {0, 0});
    for (const auto& p : cvm_predict(still, 12, 0.4)) CHECK(p == PlanarVector{3, 3});

    auto down = straight_instance({0, 0}, {0, -0.5});
    down.observed.back().position = {0, 0};
    const auto d = cvm_predict(down, 12, 0.4);
    for (int t = 1; t <= 12; ++t) {
        CHECK(d[t - 1].x == 0.0);
        CHECK(std::abs(d[t - 1].y + 0.2 * t) < 1e-12);
    }
}

TEST_CASE("empty map reproduces cvm exactly") {
    const auto ds = synth::generate(synth::crossing_scenario(2));
    const auto instances = make_windows(ds, 8, 12, 7);
    ConditionedMapSet empty;
    empty.general.grid = GridSpec{1.0, {0, 0}};
    PredictorParams p;
    p.mode = PredictionMode::stochastic;
    p.samples = 3;
    for (const auto& inst : instances) {
        const auto out = predict(inst, empty, p, true, 5);
        CHECK(out.fell_back_to_general);
        const auto cvm = cvm_predict(inst, 12, p.dt);
        REQUIRE(out.samples.size() == 3);
        for (const auto& s : out.samples) CHECK(s == cvm);
    }
}

TEST_CASE("matching most-likely velocity reproduces cvm") {
    const auto inst = straight_instance({0, 0}, from_polar({1.2, 0.3}));
    const auto set = one_cell(to_polar(inst.observed.back().velocity));
    PredictorParams p;
    p.r_s = 100;
    const auto out = predict(inst, set, p, false, 0);
    CHECK(out.samples.size() == 1);
    CHECK(out.samples[0] == cvm_predict(inst, 12, p.dt));
}

TEST_CASE("predict is reproducible and seeds per sample") {
    const auto set = one_cell({1.2, 0.2}, 0.05);
    const auto inst = straight_instance({0, 0}, {1.0, 0.0});
    PredictorParams p;
    p.r_s = 100;
    p.mode = PredictionMode::stochastic;
    p.samples = 4;
    const auto a = predict(inst, set, p, false, 123);
    const auto b = predict(inst, set, p, false, 123);
    CHECK(a.samples == b.samples);
    CHECK(a.samples[0] != a.samples[1]);
    const auto c = predict(inst, set, p, false, 124);
    CHECK(a.samples != c.samples);
}

TEST_CASE("map bias pulls toward the local velocity") {
    const auto set = one_cell({1.0, 0.0}, 0.001);
    const auto inst = straight_instance({0, 0}, {0.8, 0.0});
    PredictorParams p;
    p.r_s = 100;
    const auto out = predict(inst, set, p, false, 0);
    const auto cvm = cvm_predict(inst, 12, p.dt);
    CHECK(out.samples[0].back().x > cvm.back().x);
    CHECK(out.samples[0].back().x < inst.observed.back().position.x + 12 * 0.4 * 1.0);
}

TEST_CASE("conditioned prediction uses the class map and falls back") {
    ConditionedMapSet set = one_cell({0.5, 0.0}, 0.001);
    CliffMap fast = set.general;
    fast.cells.begin()->second.components[0].mean = {1.5, 0.0};
    set.per_class.emplace(AgentClass{"A", 0}, fast);
    PredictorParams p;
    p.r_s = 100;
    const auto inst = straight_instance({0, 0}, {1.0, 0.0}, "A");
    const auto own = predict(inst, set, p, true, 0);
    const auto general = predict(inst, set, p, false, 0);
    CHECK_FALSE(own.fell_back_to_general);
    CHECK(own.samples[0].back().x > general.samples[0].back().x);

    const auto other = predict(straight_instance({0, 0}, {1.0, 0.0}, "B"), set, p, true, 0);
    CHECK(other.fell_back_to_general);
    CHECK(other.samples == general.samples);
}

TEST_CASE("window-mean initial speed") {
    PredictionInstance inst = straight_instance({0, 0}, {1.0, 0.0});
    for (std::size_t k = 0; k < inst.observed.size(); ++k) inst.observed[k].velocity = {k < 4 ? 0.5 : 1.5, 0.0};
    ConditionedMapSet empty;
    PredictorParams p;
    p.init = InitialVelocity::window_mean_speed;
    const auto out = predict(inst, empty, p, false, 0);
    CHECK(std::abs(out.samples[0][0].x - (inst.observed.back().position.x + 0.4 * 1.0)) < 1e-12);
}

TEST_CASE("predictor parameter validation") {
    PredictorParams p;
    CHECK_NOTHROW(p.validate());
    p.beta = 0;
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p = {};
    p.predicted_steps = 0;
    CHECK_THROWS_AS(p.validate(), InvalidInput);
    p = {};
    p.samples = 3;
    CHECK(p.effective_samples() == 1);
    p.mode = PredictionMode::stochastic;
    CHECK(p.effective_samples() == 3);
    CHECK(prediction_mode_from_string("stochastic") == PredictionMode::stochastic);
    CHECK_THROWS_AS(prediction_mode_from_string("greedy"), InvalidInput);
}

TEST_CASE("predict_all is independent of thread count") {
    const auto ds = synth::generate(synth::crossing_scenario(5));
    const auto maps = build_conditioned(ds.trajectories, GridSpec{1.0, {0, 0}}, ds.unit, FitParams{});
    const auto instances = make_windows(ds, 8, 12, 4);
    PredictorParams p;
    p.r_s = 1.0;
    p.mode = PredictionMode::stochastic;
    p.samples = 3;
    const auto one = predict_all(instances, maps, p, true, 9, 1);
    const auto many = predict_all(instances, maps, p, true, 9, 4);
    REQUIRE(one.size() == many.size());
    for (std::size_t n = 0; n < one.size(); ++n) CHECK(one[n].samples == many[n].samples);
}
