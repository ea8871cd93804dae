#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "cliff/error.hpp"
#include "cliff/eval.hpp"
#include "cliff/synth.hpp"
#include "oracles.hpp"

using namespace cliff;

namespace {

std::vector<PlanarVector> line(int n, PlanarVector offset = {0, 0}) {
    std::vector<PlanarVector> out;
    for (int t = 0; t < n; ++t) out.push_back(PlanarVector{static_cast<double>(t), 0.0} + offset);
    return out;
}

std::vector<PredictionInstance> fake_instances(int trajectories, int windows_each) {
    std::vector<PredictionInstance> out;
    for (int n = 0; n < trajectories; ++n)
        for (int w = 0; w < windows_each; ++w) {
            PredictionInstance inst;
            inst.source_traj = "t" + std::to_string(n);
            inst.offset = static_cast<std::size_t>(w);
            inst.id = inst.source_traj + "#" + std::to_string(w);
            out.push_back(inst);
        }
    return out;
}

BenchmarkParams synthetic_params() {
    BenchmarkParams p;
    p.grid.resolution = 1.0;
    p.predictor.r_s = 1.0;
    return p;
}

ExternalPredictions truth_predictions(std::span<const PredictionInstance> instances, int k) {
    ExternalPredictions preds;
    for (const auto& inst : instances)
        preds.by_instance[inst.id] = std::vector<std::vector<PlanarVector>>(k, future_positions(inst));
    return preds;
}

}  // namespace

TEST_CASE("ade and fde") {
    const auto gt = line(3);
    CHECK(ade(gt, gt) == 0.0);
    CHECK(fde(gt, gt) == 0.0);
    const auto shifted = line(3, {1, 0});
    CHECK(ade(gt, shifted) == 1.0);
    CHECK(fde(gt, shifted) == 1.0);
    const std::vector<PlanarVector> growing{{0, 0}, {1, 1}, {2, 2}};
    CHECK(ade(gt, growing) == doctest::Approx(1.0));
    CHECK(fde(gt, growing) == 2.0);
    CHECK_THROWS_AS(ade(gt, line(2)), InvalidInput);
    CHECK_THROWS_AS(fde({}, {}), InvalidInput);
}

TEST_CASE("top_k") {
    const auto gt = line(4);
    const std::vector<std::vector<PlanarVector>> one{line(4, {0, 0.5})};
    CHECK(top_k(gt, one).ade == ade(gt, one[0]));
    const std::vector<std::vector<PlanarVector>> three{line(4, {2, 0}), line(4, {0, 1}), line(4, {-3, 0})};
    const auto r = top_k(gt, three);
    CHECK(r.ade == 1.0);
    CHECK(r.fde == 1.0);
    CHECK_THROWS_AS(top_k(gt, std::vector<std::vector<PlanarVector>>{}), InvalidInput);
}

TEST_CASE("top_k minimises ade and fde independently") {
    const std::vector<PlanarVector> gt{{0, 0}, {0, 0}};
    // First sample is good early, bad at the end; second the reverse.
    const std::vector<std::vector<PlanarVector>> s{{{0, 0}, {3, 0}}, {{2, 0}, {0, 0}}};
    const auto r = top_k(gt, s);
    CHECK(r.ade == 1.0);
    CHECK(r.fde == 0.0);
}

TEST_CASE("top_k agrees with brute force and is monotone in nested K") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(-5, 5);
    std::uniform_int_distribution<int> len(1, 6), kk(1, 4);
    for (int trial = 0; trial < 300; ++trial) {
        const int t = len(gen), k = kk(gen);
        std::vector<PlanarVector> gt(t);
        for (auto& p : gt) p = {u(gen), u(gen)};
        std::vector<std::vector<PlanarVector>> samples(k, std::vector<PlanarVector>(t));
        for (auto& s : samples)
            for (auto& p : s) p = {u(gen), u(gen)};
        const auto fast = top_k(gt, samples);
        const auto slow = oracle::brute_top_k(gt, samples);
        CHECK(fast.ade == slow.ade);
        CHECK(fast.fde == slow.fde);

        auto more = samples;
        more.push_back(gt);
        const auto grown = top_k(gt, more);
        CHECK(grown.ade <= fast.ade);
        CHECK(grown.fde <= fast.fde);

        const PlanarVector shift{u(gen), u(gen)};
        auto gt2 = gt;
        for (auto& p : gt2) p = p + shift;
        auto s2 = samples[0];
        for (auto& p : s2) p = p + shift;
        CHECK(std::abs(ade(gt2, s2) - ade(gt, samples[0])) < 1e-12);
        CHECK(std::abs(fde(gt2, s2) - fde(gt, samples[0])) < 1e-12);
    }
}

TEST_CASE("make_splits") {
    const auto instances = fake_instances(100, 3);
    SplitSpec spec;
    spec.train_ratio = 0.9;
    spec.iterations = 10;
    spec.base_seed = 4;
    const auto splits = make_splits(instances, spec);
    REQUIRE(splits.size() == 10);
    std::set<std::vector<std::string>> distinct;
    for (const auto& s : splits) {
        CHECK(s.train_trajs.size() == 90);
        CHECK(s.test_trajs.size() == 10);
        CHECK(s.train_instances.size() == 270);
        CHECK(s.test_instances.size() == 30);
        std::set<std::string> train(s.train_trajs.begin(), s.train_trajs.end());
        for (const auto& id : s.test_trajs) CHECK(train.count(id) == 0);
        for (auto idx : s.test_instances) CHECK(train.count(instances[idx].source_traj) == 0);
        distinct.insert(s.test_trajs);
    }
    CHECK(distinct.size() == 10);

    const auto again = make_splits(instances, spec);
    for (std::size_t i = 0; i < splits.size(); ++i) CHECK(again[i].test_trajs == splits[i].test_trajs);

    spec.train_ratio = 0.5;
    CHECK_THROWS_AS(make_splits(fake_instances(1, 5), spec), DegenerateSplit);
    spec.train_ratio = 0.99;
    CHECK_THROWS_AS(make_splits(fake_instances(10, 1), spec), DegenerateSplit);
    spec.train_ratio = 1.0;
    CHECK_THROWS_AS(make_splits(instances, spec), InvalidInput);
}

TEST_CASE("cvm is exact on noiseless straight lines") {
    const auto ds = synth::generate(synth::line_scenario(1.3, 0.7, 12, 30));
    const auto r = run_benchmark(ds, Method::cvm, SplitSpec{}, synthetic_params());
    const auto* g = r.find("cvm", kGlobalClass);
    REQUIRE(g != nullptr);
    CHECK(g->ade_mean < 1e-9);
    CHECK(g->fde_mean < 1e-9);
    CHECK(g->iterations == 10);
}

TEST_CASE("cmod beats mod on the crossing scenario") {
    const auto ds = synth::generate(synth::crossing_scenario(0));
    SplitSpec spec;
    spec.iterations = 3;
    const auto mod = run_benchmark(ds, Method::mod, spec, synthetic_params());
    const auto cmod = run_benchmark(ds, Method::cmod, spec, synthetic_params());
    CHECK(cmod.find("cmod", kGlobalClass)->ade_mean < mod.find("mod", kGlobalClass)->ade_mean);
}

TEST_CASE("global row is the instance-weighted class mean") {
    const auto ds = synth::generate(synth::crossing_scenario(1));
    SplitSpec spec;
    spec.iterations = 3;
    const auto r = run_benchmark(ds, Method::cmod, spec, synthetic_params());
    for (int it = 0; it < 3; ++it) {
        double weighted = 0, weighted_fde = 0;
        std::size_t total = 0;
        const IterationRecord* global = nullptr;
        for (const auto& row : r.per_iteration) {
            if (row.iteration != it) continue;
            if (row.agent_class == kGlobalClass) {
                global = &row;
                continue;
            }
            weighted += row.ade * static_cast<double>(row.instances);
            weighted_fde += row.fde * static_cast<double>(row.instances);
            total += row.instances;
        }
        REQUIRE(global != nullptr);
        CHECK(global->instances == total);
        CHECK(std::abs(global->ade - weighted / static_cast<double>(total)) < 1e-9);
        CHECK(std::abs(global->fde - weighted_fde / static_cast<double>(total)) < 1e-9);
    }
}

TEST_CASE("aggregate uses the sample standard deviation across iterations") {
    const auto ds = synth::generate(synth::crossing_scenario(2));
    SplitSpec spec;
    spec.iterations = 4;
    const auto r = run_benchmark(ds, Method::cvm, spec, synthetic_params());
    std::vector<double> values;
    for (const auto& row : r.per_iteration)
        if (row.agent_class == "A") values.push_back(row.ade);
    REQUIRE(values.size() == 4);
    double mean = 0;
    for (double v : values) mean += v / 4.0;
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean) / 3.0;
    const auto* a = r.find("cvm", "A");
    REQUIRE(a != nullptr);
    CHECK(a->ade_mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(a->ade_std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("benchmarks are reproducible and thread independent") {
    const auto ds = synth::generate(synth::crossing_scenario(3));
    SplitSpec spec;
    spec.iterations = 2;
    auto params = synthetic_params();
    params.predictor.mode = PredictionMode::stochastic;
    params.predictor.samples = 3;
    const auto a = run_benchmark(ds, Method::cmod, spec, params);
    params.threads = 4;
    const auto b = run_benchmark(ds, Method::cmod, spec, params);
    std::ostringstream sa, sb;
    write_long_csv(a.per_iteration, sa);
    write_long_csv(b.per_iteration, sb);
    CHECK(sa.str() == sb.str());
}

TEST_CASE("external predictions equal to ground truth score zero") {
    const auto ds = synth::generate(synth::crossing_scenario(4));
    const auto instances = make_windows(ds, 8, 12, 1);
    const auto preds = truth_predictions(instances, 1);
    SplitSpec spec;
    spec.iterations = 2;
    const auto r = run_benchmark(ds, Method::external, spec, synthetic_params(), &preds);
    CHECK(r.find("external", kGlobalClass)->ade_mean == 0.0);
    CHECK_THROWS_AS(run_benchmark(ds, Method::external, spec, synthetic_params()), InvalidInput);

    const auto scored = score_external(preds, instances, 1);
    CHECK(scored.find("external", kGlobalClass)->ade_mean == 0.0);
    CHECK(scored.find("external", kGlobalClass)->fde_mean == 0.0);
}

TEST_CASE("score_external validation") {
    const auto ds = synth::generate(synth::crossing_scenario(4));
    const auto instances = make_windows(ds, 8, 12, 10);
    auto preds = truth_predictions(instances, 3);

    SUBCASE("constant offsets pick the closest") {
        const auto& first = instances.front();
        auto gt = future_positions(first);
        std::vector<std::vector<PlanarVector>> samples;
        for (double off : {2.0, 1.0, 3.0}) {
            auto s = gt;
            for (auto& p : s) p = p + PlanarVector{off, 0};
            samples.push_back(s);
        }
        preds.by_instance[first.id] = samples;
        const std::vector<PredictionInstance> just{first};
        const auto r = score_external(preds, just, 3);
        CHECK(r.find("external", kGlobalClass)->ade_mean == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("missing instance") {
        preds.by_instance.erase(instances[1].id);
        try {
            score_external(preds, instances, 3);
            FAIL("expected a validation error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(instances[1].id) != std::string::npos);
        }
    }
    SUBCASE("wrong K") {
        CHECK_THROWS_AS(score_external(preds, instances, 2), ValidationError);
    }
    SUBCASE("wrong length") {
        preds.by_instance[instances[0].id][0].pop_back();
        CHECK_THROWS_AS(score_external(preds, instances, 3), ValidationError);
    }
}

TEST_CASE("prediction files round trip") {
    PredictionSet a{"t1#0", {{{0.1, 0.2}, {0.3, 0.4}}, {{1, 2}, {3, 4}}}, false};
    PredictionSet b{"t2#5", {{{-1.0 / 3.0, 2}, {5, 6}}, {{7, 8}, {9, 10}}}, false};
    const std::vector<PredictionSet> sets{a, b};
    std::stringstream buf;
    write_predictions(sets, buf);
    const auto back = read_predictions(buf, "mem");
    REQUIRE(back.by_instance.size() == 2);
    CHECK(back.by_instance.at("t1#0") == a.samples);
    CHECK(back.by_instance.at("t2#5") == b.samples);

    std::istringstream gap("instance_id,sample_idx,t,x,y\nq,0,1,0,0\nq,0,3,0,0\n");
    CHECK_THROWS_AS(read_predictions(gap, "gap"), ValidationError);
    std::istringstream skip("instance_id,sample_idx,t,x,y\nq,1,1,0,0\n");
    CHECK_THROWS_AS(read_predictions(skip, "skip"), ValidationError);
    std::istringstream junk("instance_id,sample_idx,t,x,y\nq,0,1,zero,0\n");
    CHECK_THROWS_AS(read_predictions(junk, "junk"), ParseError);
}

TEST_CASE("data_efficiency_sweep") {
    const auto ds = synth::generate(synth::crossing_scenario(6));
    SplitSpec spec;
    spec.iterations = 2;
    const std::vector<double> ratios{0.1, 0.5, 0.9};
    const auto r = data_efficiency_sweep(ds, Method::cvm, ratios, spec, synthetic_params());
    std::set<double> seen;
    for (const auto& m : r.aggregate) seen.insert(*m.train_ratio);
    CHECK(seen.size() == 3);
    for (double p : ratios) CHECK(r.find("cvm", kGlobalClass, p) != nullptr);
    CHECK(default_train_ratios().size() == 9);
    CHECK(default_train_ratios().front() == doctest::Approx(0.1));
}

TEST_CASE("csv writers") {
    IterationRecord row{"mod", "A", 1, 0.9, 0, 0.5, 1.25, 10};
    std::ostringstream longs;
    write_long_csv(std::vector<IterationRecord>{row}, longs);
    CHECK(longs.str() == "method,class,K,p,iteration,ade,fde\nmod,A,1,0.9,0,0.5,1.25\n");
    MetricRecord agg{"cmod", "GLOBAL", 3, std::nullopt, 0.5, 0.1, 1.0, 0.2, 10};
    std::ostringstream aggs;
    write_aggregate_csv(std::vector<MetricRecord>{agg}, aggs);
    CHECK(aggs.str() == "method,class,K,p,ade_mean,ade_std,fde_mean,fde_std\ncmod,GLOBAL,3,,0.5,0.1,1,0.2\n");
    CHECK(method_from_string("cmod") == Method::cmod);
    CHECK_THROWS_AS(method_from_string("lstm"), InvalidInput);
}
