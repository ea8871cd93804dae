#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "cliff/cliffmap.hpp"
#include "cliff/error.hpp"
#include "cliff/eval.hpp"
#include "cliff/ingest.hpp"
#include "cliff/predictor.hpp"
#include "cliff/synth.hpp"
#include "cliff/text.hpp"

namespace cliff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

json default_config() {
    return json{
        {"manifest", nullptr},
        {"output_dir", nullptr},
        {"resolution", 0.2},
        {"r_s", nullptr},  // null: follow resolution
        {"beta", 5.0},
        {"observed_steps", 8},
        {"predicted_steps", 12},
        {"stride", 1},
        {"samples", 1},
        {"mode", "most_likely"},
        {"train_ratios", nullptr},  // null: 0.9 for evaluate, the default sweep for sweep
        {"iterations", 10},
        {"base_seed", 0},
        {"min_observations", 10},
        {"max_components", 5},
        {"threads", 1},
        {"methods", json::array({"cvm", "mod", "cmod"})},
        {"predictions", nullptr},
    };
}

template <class T>
T field(const json& cfg, const std::string& key) {
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InvalidInput("config field '" + key + "': " + e.what());
    }
}

std::optional<std::string> optional_string(const json& cfg, const std::string& key) {
    if (!cfg.contains(key) || cfg.at(key).is_null()) return std::nullopt;
    return field<std::string>(cfg, key);
}

void require_positive(const json& cfg, const std::string& key) {
    if (!(field<double>(cfg, key) > 0.0)) throw InvalidInput("config field '" + key + "' must be positive");
}

/// Values collected from flags; only options that were given override the config.
struct Flags {
    std::string config;
    std::string manifest, output_dir, mode, predictions;
    double resolution = 0, r_s = 0, beta = 0;
    int observed_steps = 0, predicted_steps = 0, stride = 0, samples = 0, iterations = 0;
    int min_observations = 0, max_components = 0;
    unsigned threads = 0;
    std::uint64_t base_seed = 0;
    std::vector<double> train_ratios;
    std::vector<std::string> methods;
    std::map<std::string, CLI::Option*> options;
};

void add_run_options(CLI::App& app, Flags& f, bool evaluation) {
    app.add_option("--config", f.config, "JSON config file");
    f.options["manifest"] = app.add_option("--manifest", f.manifest, "dataset manifest (JSON)");
    f.options["output_dir"] = app.add_option("--output-dir,-o", f.output_dir, "output directory");
    f.options["resolution"] = app.add_option("--resolution", f.resolution, "grid cell size");
    f.options["min_observations"] = app.add_option("--min-observations", f.min_observations, "N_min per cell");
    f.options["max_components"] = app.add_option("--max-components", f.max_components, "J_max per cell");
    f.options["base_seed"] = app.add_option("--seed", f.base_seed, "base seed");
    f.options["threads"] = app.add_option("--threads", f.threads, "worker threads (0 = all cores)");
    if (!evaluation) return;
    f.options["r_s"] = app.add_option("--r-s", f.r_s, "sampling radius (defaults to resolution)");
    f.options["beta"] = app.add_option("--beta", f.beta, "kernel parameter");
    f.options["observed_steps"] = app.add_option("--observed-steps", f.observed_steps, "O_p");
    f.options["predicted_steps"] = app.add_option("--predicted-steps", f.predicted_steps, "T_p");
    f.options["stride"] = app.add_option("--stride", f.stride, "window stride");
    f.options["samples"] = app.add_option("-k,--samples", f.samples, "K");
    f.options["mode"] = app.add_option("--mode", f.mode, "most_likely or stochastic");
    f.options["iterations"] = app.add_option("--iterations", f.iterations, "validation repetitions");
    f.options["train_ratios"] = app.add_option("--train-ratio", f.train_ratios, "train ratio(s)");
    f.options["methods"] = app.add_option("--methods", f.methods, "cvm, mod, cmod, external")->delimiter(',');
    f.options["predictions"] = app.add_option("--predictions", f.predictions, "external prediction CSV");
}

json resolve_config(const Flags& f) {
    json cfg = default_config();
    if (!f.config.empty()) {
        std::ifstream in(f.config);
        if (!in) throw InvalidInput("cannot open config file '" + f.config + "'");
        json file;
        try {
            file = json::parse(in);
        } catch (const json::exception& e) {
            throw ParseError(f.config, 0, e.what());
        }
        if (!file.is_object()) throw InvalidInput("config file '" + f.config + "' must hold a JSON object");
        for (auto it = file.begin(); it != file.end(); ++it) {
            if (!cfg.contains(it.key()))
                throw InvalidInput("config file '" + f.config + "': unknown field '" + it.key() + "'");
            cfg[it.key()] = it.value();
        }
        // Relative paths in a config file are relative to the file.
        const fs::path base = fs::path(f.config).parent_path();
        for (const char* key : {"manifest", "predictions", "output_dir"}) {
            if (file.contains(key) && file[key].is_string()) {
                const fs::path p = file[key].get<std::string>();
                if (p.is_relative()) cfg[key] = (base / p).lexically_normal().string();
            }
        }
    }
    auto given = [&](const char* key) {
        const auto it = f.options.find(key);
        return it != f.options.end() && it->second->count() > 0;
    };
    if (given("manifest")) cfg["manifest"] = f.manifest;
    if (given("output_dir")) cfg["output_dir"] = f.output_dir;
    if (given("resolution")) cfg["resolution"] = f.resolution;
    if (given("r_s")) cfg["r_s"] = f.r_s;
    if (given("beta")) cfg["beta"] = f.beta;
    if (given("observed_steps")) cfg["observed_steps"] = f.observed_steps;
    if (given("predicted_steps")) cfg["predicted_steps"] = f.predicted_steps;
    if (given("stride")) cfg["stride"] = f.stride;
    if (given("samples")) cfg["samples"] = f.samples;
    if (given("mode")) cfg["mode"] = f.mode;
    if (given("iterations")) cfg["iterations"] = f.iterations;
    if (given("train_ratios")) cfg["train_ratios"] = f.train_ratios;
    if (given("base_seed")) cfg["base_seed"] = f.base_seed;
    if (given("min_observations")) cfg["min_observations"] = f.min_observations;
    if (given("max_components")) cfg["max_components"] = f.max_components;
    if (given("threads")) cfg["threads"] = f.threads;
    if (given("methods")) cfg["methods"] = f.methods;
    if (given("predictions")) cfg["predictions"] = f.predictions;

    if (cfg["output_dir"].is_null()) {
        const char* env = std::getenv("CLIFF_OUTPUT_DIR");
        cfg["output_dir"] = env != nullptr && *env != '\0' ? env : ".";
    }
    if (cfg["r_s"].is_null()) cfg["r_s"] = cfg["resolution"];

    for (const char* key : {"resolution", "r_s", "beta", "observed_steps", "predicted_steps", "stride", "samples",
                            "iterations", "min_observations", "max_components"})
        require_positive(cfg, key);
    prediction_mode_from_string(field<std::string>(cfg, "mode"));
    const auto ratios =
        cfg["train_ratios"].is_null() ? std::vector<double>{0.9} : field<std::vector<double>>(cfg, "train_ratios");
    if (ratios.empty()) throw InvalidInput("config field 'train_ratios' is empty");
    for (double p : ratios)
        if (!(p > 0.0 && p < 1.0)) throw InvalidInput("config field 'train_ratios': values must lie in (0, 1)");
    for (const auto& m : field<std::vector<std::string>>(cfg, "methods")) method_from_string(m);
    field<std::uint64_t>(cfg, "base_seed");
    field<unsigned>(cfg, "threads");
    return cfg;
}

fs::path output_dir(const json& cfg) {
    fs::path dir = field<std::string>(cfg, "output_dir");
    fs::create_directories(dir);
    return dir;
}

void write_resolved(const json& cfg, const std::string& command, const fs::path& dir) {
    json copy = cfg;
    copy["command"] = command;
    std::ofstream out(dir / "resolved_config.json");
    if (!out) throw InvalidInput("cannot write '" + (dir / "resolved_config.json").string() + "'");
    out << copy.dump(2) << '\n';
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    return out;
}

Dataset load_config_dataset(const json& cfg) {
    const auto manifest = optional_string(cfg, "manifest");
    if (!manifest) throw UsageError("a dataset manifest is required (--manifest or config field 'manifest')");
    Dataset ds = load_dataset(load_manifest(*manifest));
    if (ds.trajectories.empty()) throw EmptyInput("dataset '" + *manifest + "' holds no usable trajectories");
    return ds;
}

GridSpec grid_of(const json& cfg) {
    GridSpec g;
    g.resolution = field<double>(cfg, "resolution");
    return g;
}

FitParams fit_of(const json& cfg) {
    FitParams f;
    f.min_observations = field<std::size_t>(cfg, "min_observations");
    f.max_components = field<int>(cfg, "max_components");
    f.seed = field<std::uint64_t>(cfg, "base_seed");
    f.threads = field<unsigned>(cfg, "threads");
    return f;
}

BenchmarkParams benchmark_of(const json& cfg, double dt) {
    BenchmarkParams p;
    p.observed_steps = field<int>(cfg, "observed_steps");
    p.stride = field<int>(cfg, "stride");
    p.grid = grid_of(cfg);
    p.fit = fit_of(cfg);
    p.predictor.beta = field<double>(cfg, "beta");
    p.predictor.r_s = field<double>(cfg, "r_s");
    p.predictor.dt = dt;
    p.predictor.predicted_steps = field<int>(cfg, "predicted_steps");
    p.predictor.samples = field<int>(cfg, "samples");
    p.predictor.mode = prediction_mode_from_string(field<std::string>(cfg, "mode"));
    p.threads = field<unsigned>(cfg, "threads");
    return p;
}

SplitSpec split_of(const json& cfg) {
    SplitSpec s;
    s.iterations = field<int>(cfg, "iterations");
    s.base_seed = field<std::uint64_t>(cfg, "base_seed");
    return s;
}

std::optional<ExternalPredictions> external_of(const json& cfg, const std::vector<Method>& methods) {
    const bool wants = std::find(methods.begin(), methods.end(), Method::external) != methods.end();
    if (!wants) return std::nullopt;
    const auto path = optional_string(cfg, "predictions");
    if (!path) throw UsageError("method 'external' needs a prediction file (--predictions)");
    return read_predictions(fs::path(*path));
}

std::vector<Method> methods_of(const json& cfg) {
    std::vector<Method> out;
    for (const auto& m : field<std::vector<std::string>>(cfg, "methods")) out.push_back(method_from_string(m));
    if (out.empty()) throw InvalidInput("config field 'methods' is empty");
    return out;
}

void print_aggregate(const BenchmarkResult& r, std::ostream& out) {
    for (const auto& m : r.aggregate)
        out << m.method << ' ' << m.agent_class << (m.train_ratio ? " p=" + text::format_double(*m.train_ratio, 6) : "")
            << " ADE " << text::format_double(m.ade_mean, 4) << " +- " << text::format_double(m.ade_std, 3) << " FDE "
            << text::format_double(m.fde_mean, 4) << " +- " << text::format_double(m.fde_std, 3) << '\n';
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Flags& f, const std::vector<std::string>& inputs, const std::string& unit, double dt,
               const std::string& name, std::ostream& out) {
    json cfg = resolve_config(f);
    Manifest m;
    if (const auto path = optional_string(cfg, "manifest")) {
        m = load_manifest(*path);
    } else {
        if (inputs.empty()) throw UsageError("ingest needs --manifest or at least one --input file");
        m.name = name;
        m.unit = unit_from_string(unit);
        m.dt = dt;
        for (const auto& p : inputs) m.files.push_back(fs::absolute(p));
    }
    if (!(m.dt > 0.0)) throw InvalidInput("ingest: dt must be positive");
    const Dataset ds = load_dataset(m);
    if (ds.trajectories.empty()) throw EmptyInput("ingest: no usable trajectories");

    const fs::path dir = output_dir(cfg);
    write_trajectories(ds, dir / "trajectories.csv");
    Manifest prepared{m.name, m.unit, m.dt, {dir / "trajectories.csv"}};
    save_manifest(prepared, dir / "manifest.json");
    cfg["manifest"] = (dir / "manifest.json").string();
    write_resolved(cfg, "ingest", dir);

    out << ds.trajectories.size() << " trajectories, unit " << to_string(ds.unit) << ", dt "
        << text::format_double(ds.dt, 6) << '\n';
    for (const auto& [cls, share] : class_proportions(ds))
        out << "  " << cls.label << ' ' << text::format_double(100.0 * share, 4) << "%\n";
    return kExitOk;
}

int cmd_synth(const Flags& f, const std::string& scenario, std::ostream& out) {
    json cfg = resolve_config(f);
    const auto seed = field<std::uint64_t>(cfg, "base_seed");
    synth::ScenarioSpec spec;
    if (scenario == "crossing") spec = synth::crossing_scenario(seed);
    else if (scenario == "kl-contrast") spec = synth::kl_contrast_scenario(seed);
    else if (scenario == "line") spec = synth::line_scenario();
    else throw UsageError("unknown scenario '" + scenario + "' (expected crossing, kl-contrast or line)");
    spec.seed = seed;

    const Dataset ds = synth::generate(spec);
    const fs::path dir = output_dir(cfg);
    write_trajectories(ds, dir / "trajectories.csv");
    save_manifest({spec.name, spec.unit, spec.dt, {dir / "trajectories.csv"}}, dir / "manifest.json");
    cfg["manifest"] = (dir / "manifest.json").string();
    cfg["scenario"] = scenario;
    write_resolved(cfg, "synth", dir);
    out << "wrote " << ds.trajectories.size() << " trajectories to " << (dir / "trajectories.csv").string() << '\n';
    return kExitOk;
}

int cmd_build_map(const Flags& f, const std::string& map_path, std::ostream& out) {
    json cfg = resolve_config(f);
    const Dataset ds = load_config_dataset(cfg);
    const auto maps = build_conditioned(ds.trajectories, ds.classes, grid_of(cfg), ds.unit, fit_of(cfg));
    const fs::path dir = output_dir(cfg);
    const fs::path path = map_path.empty() ? dir / "cliffmap.txt" : fs::path(map_path);
    save_map(maps, path);
    write_resolved(cfg, "build-map", dir);

    auto summary = [&](const std::string& name, const CliffMap& m) {
        std::size_t total = 0, peak = 0;
        for (const auto& [cell, n] : intensity(m)) {
            total += n;
            peak = std::max(peak, n);
        }
        out << "  " << name << ": " << m.cells.size() << " cells, " << total << " observations, max " << peak
            << " per cell\n";
    };
    out << "map written to " << path.string() << '\n';
    summary("general", maps.general);
    for (const auto& [cls, m] : maps.per_class) summary(cls.label, m);
    return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
    json cfg = resolve_config(f);
    if (cfg["train_ratios"].is_null()) cfg["train_ratios"] = json::array({0.9});
    const auto methods = methods_of(cfg);
    const auto external = external_of(cfg, methods);
    const Dataset ds = load_config_dataset(cfg);
    const auto params = benchmark_of(cfg, ds.dt);
    SplitSpec split = split_of(cfg);
    split.train_ratio = field<std::vector<double>>(cfg, "train_ratios").front();

    BenchmarkResult all;
    for (Method m : methods) all.append(run_benchmark(ds, m, split, params, external ? &*external : nullptr));

    const fs::path dir = output_dir(cfg);
    auto long_out = open_output(dir / "results_long.csv");
    write_long_csv(all.per_iteration, long_out);
    auto agg_out = open_output(dir / "results_aggregate.csv");
    write_aggregate_csv(all.aggregate, agg_out);
    write_resolved(cfg, "evaluate", dir);
    print_aggregate(all, out);
    return kExitOk;
}

int cmd_sweep(const Flags& f, std::ostream& out) {
    json cfg = resolve_config(f);
    if (cfg["train_ratios"].is_null()) cfg["train_ratios"] = default_train_ratios();
    const auto ratios = field<std::vector<double>>(cfg, "train_ratios");

    const auto methods = methods_of(cfg);
    const auto external = external_of(cfg, methods);
    const Dataset ds = load_config_dataset(cfg);
    const auto params = benchmark_of(cfg, ds.dt);
    const SplitSpec split = split_of(cfg);

    BenchmarkResult all;
    for (Method m : methods)
        all.append(data_efficiency_sweep(ds, m, ratios, split, params, external ? &*external : nullptr));

    const fs::path dir = output_dir(cfg);
    auto long_out = open_output(dir / "sweep_long.csv");
    write_long_csv(all.per_iteration, long_out);
    auto agg_out = open_output(dir / "sweep_aggregate.csv");
    write_aggregate_csv(all.aggregate, agg_out);
    write_resolved(cfg, "sweep", dir);
    print_aggregate(all, out);
    return kExitOk;
}

int cmd_export(const Flags& f, const std::string& map_path, const std::string& what, const std::string& cls,
               int kl_samples, const std::string& output, std::ostream& out) {
    json cfg = resolve_config(f);
    if (map_path.empty()) throw UsageError("export needs --map");
    const ConditionedMapSet maps = load_map(fs::path(map_path));

    const CliffMap* chosen = &maps.general;
    if (cls != "general") {
        AgentClass probe{cls, 0};
        chosen = maps.for_class(probe);
        if (chosen == nullptr) throw InvalidInput("map '" + map_path + "' has no class '" + cls + "'");
    }

    const fs::path dir = output_dir(cfg);
    const fs::path path = output.empty() ? dir / (what + "_" + cls + ".csv") : fs::path(output);
    auto stream = open_output(path);
    if (what == "field") {
        export_field(*chosen, stream);
    } else if (what == "intensity") {
        export_intensity(*chosen, stream);
    } else if (what == "kl") {
        if (!(kl_samples > 0)) throw InvalidInput("export: --kl-samples must be positive");
        const auto heat =
            kl_heatmap(*chosen, maps.general, kl_samples, field<std::uint64_t>(cfg, "base_seed"), field<unsigned>(cfg, "threads"));
        export_kl(maps.general.grid, heat, stream);
    } else {
        throw UsageError("unknown export '" + what + "' (expected field, kl or intensity)");
    }
    cfg["map"] = map_path;
    cfg["what"] = what;
    cfg["class"] = cls;
    write_resolved(cfg, "export", dir);
    out << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_score_external(const Flags& f, std::ostream& out) {
    json cfg = resolve_config(f);
    const auto path = optional_string(cfg, "predictions");
    if (!path) throw UsageError("score-external needs --predictions");
    const auto preds = read_predictions(fs::path(*path));
    const Dataset ds = load_config_dataset(cfg);
    const auto instances = make_windows(ds, field<int>(cfg, "observed_steps"), field<int>(cfg, "predicted_steps"),
                                        field<int>(cfg, "stride"));
    const auto result = score_external(preds, instances, field<int>(cfg, "samples"));

    const fs::path dir = output_dir(cfg);
    auto long_out = open_output(dir / "external_long.csv");
    write_long_csv(result.per_iteration, long_out);
    auto agg_out = open_output(dir / "external_aggregate.csv");
    write_aggregate_csv(result.aggregate, agg_out);
    write_resolved(cfg, "score-external", dir);
    print_aggregate(result, out);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CLiFF-map building, map-biased prediction and Top-K benchmarking"};
    app.require_subcommand(1);

    Flags f_ingest, f_synth, f_build, f_eval, f_sweep, f_export, f_score;
    std::vector<std::string> inputs;
    std::string unit = "m", ds_name = "dataset", scenario = "crossing", map_path, what = "field", cls = "general",
                output;
    double dt = kDefaultDt;
    int kl_samples = 2000;

    auto* ingest = app.add_subcommand("ingest", "parse, resample and write trajectories");
    add_run_options(*ingest, f_ingest, false);
    ingest->add_option("--input,-i", inputs, "trajectory CSV files");
    ingest->add_option("--unit", unit, "m or px");
    ingest->add_option("--dt", dt, "target time step");
    ingest->add_option("--name", ds_name, "dataset name");

    auto* synth = app.add_subcommand("synth", "generate a synthetic scenario");
    add_run_options(*synth, f_synth, false);
    synth->add_option("--scenario", scenario, "crossing, kl-contrast or line");

    auto* build = app.add_subcommand("build-map", "fit general and per-class maps");
    add_run_options(*build, f_build, false);
    build->add_option("--map", map_path, "map file to write (default <output-dir>/cliffmap.txt)");

    auto* evaluate = app.add_subcommand("evaluate", "repeated sub-sampling benchmark");
    add_run_options(*evaluate, f_eval, true);

    auto* sweep = app.add_subcommand("sweep", "benchmark over train ratios");
    add_run_options(*sweep, f_sweep, true);

    auto* exp = app.add_subcommand("export", "per-cell CSVs from a map file");
    add_run_options(*exp, f_export, false);
    exp->add_option("--map", map_path, "map file")->required();
    exp->add_option("--what", what, "field, kl or intensity");
    exp->add_option("--class", cls, "class label or 'general'");
    exp->add_option("--kl-samples", kl_samples, "Monte Carlo draws per cell");
    exp->add_option("--output", output, "CSV to write");

    auto* score = app.add_subcommand("score-external", "score an external prediction file");
    add_run_options(*score, f_score, true);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(f_ingest, inputs, unit, dt, ds_name, out);
        if (synth->parsed()) return cmd_synth(f_synth, scenario, out);
        if (build->parsed()) return cmd_build_map(f_build, map_path, out);
        if (evaluate->parsed()) return cmd_evaluate(f_eval, out);
        if (sweep->parsed()) return cmd_sweep(f_sweep, out);
        if (exp->parsed()) return cmd_export(f_export, map_path, what, cls, kl_samples, output, out);
        if (score->parsed()) return cmd_score_external(f_score, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace cliff::cli
