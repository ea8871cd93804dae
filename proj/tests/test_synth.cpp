#include <doctest.h>

#include "cliff/error.hpp"
#include "cliff/eval.hpp"
#include "cliff/synth.hpp"

using namespace cliff;

TEST_CASE("noiseless line has exact velocities") {
    const auto ds = synth::generate(synth::line_scenario(1.0, 0.0, 5, 30));
    REQUIRE(ds.trajectories.size() == 5);
    for (const auto& t : ds.trajectories) {
        CHECK(t.states.size() == 30);
        for (const auto& s : t.states) CHECK(s.velocity == PlanarVector{1, 0});
    }
}

TEST_CASE("class proportions follow the counts") {
    auto spec = synth::crossing_scenario(0);
    spec.classes[0].count = 10;
    spec.classes[1].count = 10;
    const auto shares = class_proportions(synth::generate(spec));
    REQUIRE(shares.size() == 2);
    for (const auto& [c, share] : shares) CHECK(share == doctest::Approx(0.5));
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = synth::generate(synth::crossing_scenario(3));
    const auto b = synth::generate(synth::crossing_scenario(3));
    const auto c = synth::generate(synth::crossing_scenario(4));
    REQUIRE(a.trajectories.size() == b.trajectories.size());
    for (std::size_t n = 0; n < a.trajectories.size(); ++n) CHECK(a.trajectories[n].states == b.trajectories[n].states);
    CHECK(a.trajectories[0].states != c.trajectories[0].states);
}

TEST_CASE("generated trajectories are valid") {
    for (const auto& spec : {synth::crossing_scenario(1), synth::kl_contrast_scenario(1), synth::line_scenario()}) {
        const auto ds = synth::generate(spec);
        for (const auto& t : ds.trajectories) CHECK_NOTHROW(validate(t));
    }
    auto arc = synth::line_scenario();
    arc.classes[0].path = synth::PathType::arc;
    arc.classes[0].turn_rate = 0.2;
    for (const auto& t : synth::generate(arc).trajectories) CHECK_NOTHROW(validate(t));
}

TEST_CASE("cvm is exact on every noiseless line instance") {
    const auto ds = synth::generate(synth::line_scenario(0.8, -2.0, 6, 25));
    for (const auto& inst : make_windows(ds, 8, 12, 1))
        CHECK(ade(future_positions(inst), cvm_predict(inst, 12, ds.dt)) < 1e-9);
}

TEST_CASE("canonical crossing scenario") {
    const auto spec = synth::crossing_scenario();
    REQUIRE(spec.classes.size() == 2);
    CHECK(spec.classes[0].speed == 1.2);
    CHECK(spec.classes[0].heading == 0.0);
    CHECK(spec.classes[1].speed == 0.6);
    CHECK(spec.classes[1].heading == doctest::Approx(kPi / 4));
    CHECK(spec.classes[0].count == 60);
    CHECK(spec.noise_sigma_pos == 0.02);
    CHECK(spec.noise_sigma_speed == 0.05);
    CHECK(spec.dt == 0.4);
    CHECK(spec.steps_per_traj == 40);
    // Both classes pass through the origin mid-track.
    const auto ds = synth::generate(spec);
    for (const auto& t : ds.trajectories) {
        const auto mid = t.states[20].position;
        CHECK(mid.norm() < 2.5);
    }
}

TEST_CASE("scenario validation") {
    auto spec = synth::line_scenario();
    spec.classes[0].count = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidInput);
    spec = synth::line_scenario();
    spec.classes[0].speed = 0;
    CHECK_THROWS_AS(spec.validate(), InvalidInput);
    spec = synth::line_scenario();
    spec.steps_per_traj = 10;
    CHECK_THROWS_AS(spec.validate(20), InvalidInput);
    CHECK(synth::path_from_string("arc") == synth::PathType::arc);
    CHECK_THROWS_AS(synth::path_from_string("spiral"), InvalidInput);
}
