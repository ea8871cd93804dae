#include "cliff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "cliff/error.hpp"
#include "cliff/parallel.hpp"
#include "cliff/text.hpp"

namespace cliff {

namespace {

void require_same_length(std::span<const PlanarVector> gt, std::span<const PlanarVector> pred, const char* what) {
    if (gt.empty()) throw InvalidInput(std::string(what) + ": empty sequence");
    if (gt.size() != pred.size())
        throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(gt.size()) + " vs " +
                           std::to_string(pred.size()) + ")");
}

}  // namespace

double ade(std::span<const PlanarVector> gt, std::span<const PlanarVector> pred) {
    require_same_length(gt, pred, "ade");
    double sum = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) sum += std::hypot(gt[t].x - pred[t].x, gt[t].y - pred[t].y);
    return sum / static_cast<double>(gt.size());
}

double fde(std::span<const PlanarVector> gt, std::span<const PlanarVector> pred) {
    require_same_length(gt, pred, "fde");
    return std::hypot(gt.back().x - pred.back().x, gt.back().y - pred.back().y);
}

TopK top_k(std::span<const PlanarVector> gt, std::span<const std::vector<PlanarVector>> samples) {
    if (samples.empty()) throw InvalidInput("top_k: no samples");
    TopK best{ade(gt, samples[0]), fde(gt, samples[0])};
    for (std::size_t k = 1; k < samples.size(); ++k) {
        best.ade = std::min(best.ade, ade(gt, samples[k]));
        best.fde = std::min(best.fde, fde(gt, samples[k]));
    }
    return best;
}

std::vector<PlanarVector> future_positions(const PredictionInstance& instance) {
    std::vector<PlanarVector> out;
    out.reserve(instance.future.size());
    for (const auto& s : instance.future) out.push_back(s.position);
    return out;
}

void SplitSpec::validate() const {
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw InvalidInput("split: train ratio must lie in (0, 1)");
    if (iterations < 1) throw InvalidInput("split: iterations must be >= 1");
}

std::vector<Split> make_splits(std::span<const PredictionInstance> instances, const SplitSpec& spec) {
    spec.validate();
    if (instances.size() < 2) throw DegenerateSplit("make_splits: need at least 2 instances");
    std::set<std::string> unique;
    for (const auto& inst : instances) unique.insert(inst.source_traj);
    const std::vector<std::string> ids(unique.begin(), unique.end());
    const std::size_t n = ids.size();
    const auto n_train = static_cast<std::size_t>(std::ceil(spec.train_ratio * static_cast<double>(n) - 1e-9));
    if (n_train == 0 || n_train >= n)
        throw DegenerateSplit("make_splits: " + std::to_string(n) + " trajectories at train ratio " +
                              text::format_double(spec.train_ratio, 6) + " leave one side empty");

    std::vector<Split> splits;
    splits.reserve(static_cast<std::size_t>(spec.iterations));
    for (int it = 0; it < spec.iterations; ++it) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(spec.base_seed + static_cast<std::uint64_t>(it));
        std::shuffle(order.begin(), order.end(), rng);

        Split s;
        std::set<std::string> train;
        for (std::size_t k = 0; k < n; ++k) {
            if (k < n_train) {
                train.insert(ids[order[k]]);
            }
        }
        for (const auto& id : ids) (train.count(id) ? s.train_trajs : s.test_trajs).push_back(id);
        for (std::size_t k = 0; k < instances.size(); ++k)
            (train.count(instances[k].source_traj) ? s.train_instances : s.test_instances).push_back(k);
        splits.push_back(std::move(s));
    }
    return splits;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::cvm: return "cvm";
        case Method::mod: return "mod";
        case Method::cmod: return "cmod";
        case Method::external: return "external";
    }
    return "unknown";
}

Method method_from_string(const std::string& s) {
    if (s == "cvm") return Method::cvm;
    if (s == "mod") return Method::mod;
    if (s == "cmod") return Method::cmod;
    if (s == "external") return Method::external;
    throw InvalidInput("unknown method '" + s + "' (expected cvm, mod, cmod or external)");
}

const MetricRecord* BenchmarkResult::find(const std::string& method, const std::string& agent_class,
                                          std::optional<double> train_ratio) const {
    for (const auto& r : aggregate) {
        if (r.method != method || r.agent_class != agent_class) continue;
        if (train_ratio && (!r.train_ratio || std::abs(*r.train_ratio - *train_ratio) > 1e-12)) continue;
        return &r;
    }
    return nullptr;
}

void BenchmarkResult::append(const BenchmarkResult& other) {
    per_iteration.insert(per_iteration.end(), other.per_iteration.begin(), other.per_iteration.end());
    aggregate.insert(aggregate.end(), other.aggregate.begin(), other.aggregate.end());
}

// ---------------------------------------------------------------------------
// Prediction interchange
// ---------------------------------------------------------------------------

ExternalPredictions read_predictions(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    int c_id = -1, c_sample = -1, c_t = -1, c_x = -1, c_y = -1;
    std::map<std::string, std::map<long long, std::map<long long, PlanarVector>>> raw;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split_csv(line);
        if (!header) {
            for (int k = 0; k < static_cast<int>(f.size()); ++k) {
                if (f[k] == "instance_id") c_id = k;
                else if (f[k] == "sample_idx") c_sample = k;
                else if (f[k] == "t") c_t = k;
                else if (f[k] == "x") c_x = k;
                else if (f[k] == "y") c_y = k;
            }
            if (c_id < 0 || c_sample < 0 || c_t < 0 || c_x < 0 || c_y < 0)
                throw ParseError(source, line_no, "header must contain instance_id,sample_idx,t,x,y");
            header = true;
            continue;
        }
        const int width = std::max({c_id, c_sample, c_t, c_x, c_y}) + 1;
        if (static_cast<int>(f.size()) < width) throw ParseError(source, line_no, "too few fields");
        long long sample = 0, t = 0;
        double x = 0, y = 0;
        if (!text::parse_int(f[c_sample], sample) || !text::parse_int(f[c_t], t) || !text::parse_double(f[c_x], x) ||
            !text::parse_double(f[c_y], y) || !std::isfinite(x) || !std::isfinite(y))
            throw ParseError(source, line_no, "bad numeric field");
        auto& slot = raw[f[c_id]][sample];
        if (!slot.emplace(t, PlanarVector{x, y}).second)
            throw ValidationError("instance '" + f[c_id] + "': duplicate sample " + std::to_string(sample) + " t " +
                                  std::to_string(t));
    }
    if (!header) throw ParseError(source, line_no, "missing header");

    ExternalPredictions out;
    for (auto& [id, samples] : raw) {
        std::vector<std::vector<PlanarVector>> seqs;
        long long expected_sample = 0;
        for (auto& [sidx, steps] : samples) {
            if (sidx != expected_sample++)
                throw ValidationError("instance '" + id + "': sample indices must run 0..K-1");
            std::vector<PlanarVector> seq;
            long long expected_t = 1;
            for (auto& [t, p] : steps) {
                if (t != expected_t++) throw ValidationError("instance '" + id + "': steps must run 1..T_p");
                seq.push_back(p);
            }
            seqs.push_back(std::move(seq));
        }
        out.by_instance.emplace(id, std::move(seqs));
    }
    return out;
}

ExternalPredictions read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open prediction file '" + path.string() + "'");
    return read_predictions(in, path.string());
}

void write_predictions(std::span<const PredictionSet> predictions, std::ostream& out) {
    out << "instance_id,sample_idx,t,x,y\n";
    for (const auto& p : predictions)
        for (std::size_t k = 0; k < p.samples.size(); ++k)
            for (std::size_t t = 0; t < p.samples[k].size(); ++t)
                out << p.instance_id << ',' << k << ',' << (t + 1) << ',' << text::format_double(p.samples[k][t].x)
                    << ',' << text::format_double(p.samples[k][t].y) << '\n';
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

namespace {

struct Scored {
    const PredictionInstance* instance;
    TopK metric;
};

// Group means in instance-id order so the floating-point sums are reproducible.
void summarize_iteration(std::vector<Scored> scored, const std::string& method, int k, std::optional<double> p,
                         int iteration, std::vector<IterationRecord>& out) {
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.instance->id < b.instance->id; });
    std::map<AgentClass, std::pair<TopK, std::size_t>> per_class;
    TopK global;
    for (const auto& s : scored) {
        auto& [sum, n] = per_class[s.instance->agent_class];
        sum.ade += s.metric.ade;
        sum.fde += s.metric.fde;
        ++n;
        global.ade += s.metric.ade;
        global.fde += s.metric.fde;
    }
    for (const auto& [cls, acc] : per_class) {
        const auto n = static_cast<double>(acc.second);
        out.push_back({method, cls.label, k, p, iteration, acc.first.ade / n, acc.first.fde / n, acc.second});
    }
    const auto n = static_cast<double>(scored.size());
    out.push_back({method, kGlobalClass, k, p, iteration, global.ade / n, global.fde / n, scored.size()});
}

std::vector<MetricRecord> aggregate(const std::vector<IterationRecord>& rows) {
    // Keep first-appearance order of (class) within the run.
    std::vector<std::string> order;
    std::map<std::string, std::vector<const IterationRecord*>> groups;
    for (const auto& r : rows) {
        if (!groups.count(r.agent_class)) order.push_back(r.agent_class);
        groups[r.agent_class].push_back(&r);
    }
    // GLOBAL last.
    std::stable_partition(order.begin(), order.end(), [](const std::string& c) { return c != kGlobalClass; });

    std::vector<MetricRecord> out;
    for (const auto& cls : order) {
        const auto& g = groups[cls];
        MetricRecord m;
        m.method = g.front()->method;
        m.agent_class = cls;
        m.k = g.front()->k;
        m.train_ratio = g.front()->train_ratio;
        m.iterations = g.size();
        const auto n = static_cast<double>(g.size());
        for (const auto* r : g) {
            m.ade_mean += r->ade;
            m.fde_mean += r->fde;
        }
        m.ade_mean /= n;
        m.fde_mean /= n;
        if (g.size() > 1) {
            double va = 0, vf = 0;
            for (const auto* r : g) {
                va += (r->ade - m.ade_mean) * (r->ade - m.ade_mean);
                vf += (r->fde - m.fde_mean) * (r->fde - m.fde_mean);
            }
            m.ade_std = std::sqrt(va / (n - 1.0));
            m.fde_std = std::sqrt(vf / (n - 1.0));
        }
        out.push_back(m);
    }
    return out;
}

const std::vector<std::vector<PlanarVector>>& external_samples(const ExternalPredictions& preds,
                                                               const PredictionInstance& inst, int k) {
    const auto it = preds.by_instance.find(inst.id);
    if (it == preds.by_instance.end()) throw ValidationError("instance '" + inst.id + "': missing from predictions");
    if (static_cast<int>(it->second.size()) != k)
        throw ValidationError("instance '" + inst.id + "': expected " + std::to_string(k) + " samples, found " +
                              std::to_string(it->second.size()));
    for (const auto& seq : it->second)
        if (seq.size() != inst.future.size())
            throw ValidationError("instance '" + inst.id + "': expected " + std::to_string(inst.future.size()) +
                                  " steps per sample, found " + std::to_string(seq.size()));
    return it->second;
}

}  // namespace

BenchmarkResult run_benchmark(const Dataset& dataset, Method method, const SplitSpec& spec,
                              const BenchmarkParams& params, const ExternalPredictions* external) {
    params.predictor.validate();
    if (method == Method::external && external == nullptr)
        throw InvalidInput("run_benchmark: method external needs a prediction file");

    const auto instances =
        make_windows(dataset, params.observed_steps, params.predictor.predicted_steps, params.stride);
    const auto splits = make_splits(instances, spec);
    const int k = params.predictor.effective_samples();
    const std::string name = to_string(method);

    std::map<std::string, const Trajectory*> by_id;
    for (const auto& t : dataset.trajectories) by_id.emplace(t.id, &t);

    BenchmarkResult result;
    for (std::size_t it = 0; it < splits.size(); ++it) {
        const auto& split = splits[it];
        std::vector<PredictionInstance> test;
        test.reserve(split.test_instances.size());
        for (auto idx : split.test_instances) test.push_back(instances[idx]);

        std::vector<std::vector<std::vector<PlanarVector>>> samples(test.size());
        if (method == Method::cvm) {
            for (std::size_t n = 0; n < test.size(); ++n)
                samples[n] = {cvm_predict(test[n], params.predictor.predicted_steps, params.predictor.dt)};
        } else if (method == Method::external) {
            for (std::size_t n = 0; n < test.size(); ++n) samples[n] = external_samples(*external, test[n], k);
        } else {
            std::vector<Trajectory> train;
            train.reserve(split.train_trajs.size());
            for (const auto& id : split.train_trajs) train.push_back(*by_id.at(id));
            FitParams fit = params.fit;
            fit.seed = derive_seed(spec.base_seed, {it, 1});
            fit.threads = params.threads;
            ConditionedMapSet maps;
            if (method == Method::mod) {
                maps.general = build_map(train, params.grid, dataset.unit, fit);
            } else {
                maps = build_conditioned(train, params.grid, dataset.unit, fit);
            }
            auto predictions = predict_all(test, maps, params.predictor, method == Method::cmod,
                                           derive_seed(spec.base_seed, {it, 2}), params.threads);
            for (std::size_t n = 0; n < test.size(); ++n) samples[n] = std::move(predictions[n].samples);
        }

        std::vector<Scored> scored(test.size());
        for (std::size_t n = 0; n < test.size(); ++n)
            scored[n] = {&test[n], top_k(future_positions(test[n]), samples[n])};
        summarize_iteration(std::move(scored), name, k, spec.train_ratio, static_cast<int>(it), result.per_iteration);
    }
    result.aggregate = aggregate(result.per_iteration);
    return result;
}

std::vector<double> default_train_ratios() {
    std::vector<double> out;
    for (int k = 1; k <= 9; ++k) out.push_back(k / 10.0);
    return out;
}

BenchmarkResult data_efficiency_sweep(const Dataset& dataset, Method method, std::span<const double> train_ratios,
                                      const SplitSpec& spec, const BenchmarkParams& params,
                                      const ExternalPredictions* external) {
    BenchmarkResult all;
    for (double p : train_ratios) {
        SplitSpec s = spec;
        s.train_ratio = p;
        all.append(run_benchmark(dataset, method, s, params, external));
    }
    return all;
}

BenchmarkResult score_external(const ExternalPredictions& predictions, std::span<const PredictionInstance> instances,
                               int k) {
    if (k < 1) throw InvalidInput("score_external: K must be >= 1");
    if (instances.empty()) throw EmptyInput("score_external: no instances");
    std::vector<Scored> scored;
    scored.reserve(instances.size());
    for (const auto& inst : instances)
        scored.push_back({&inst, top_k(future_positions(inst), external_samples(predictions, inst, k))});
    BenchmarkResult result;
    summarize_iteration(std::move(scored), to_string(Method::external), k, std::nullopt, 0, result.per_iteration);
    result.aggregate = aggregate(result.per_iteration);
    return result;
}

namespace {

std::string ratio_field(const std::optional<double>& p) { return p ? text::format_double(*p, 6) : std::string(); }

}  // namespace

void write_long_csv(std::span<const IterationRecord> records, std::ostream& out) {
    out << "method,class,K,p,iteration,ade,fde\n";
    for (const auto& r : records)
        out << r.method << ',' << r.agent_class << ',' << r.k << ',' << ratio_field(r.train_ratio) << ','
            << r.iteration << ',' << text::format_double(r.ade, 12) << ',' << text::format_double(r.fde, 12) << '\n';
}

void write_aggregate_csv(std::span<const MetricRecord> records, std::ostream& out) {
    out << "method,class,K,p,ade_mean,ade_std,fde_mean,fde_std\n";
    for (const auto& r : records)
        out << r.method << ',' << r.agent_class << ',' << r.k << ',' << ratio_field(r.train_ratio) << ','
            << text::format_double(r.ade_mean, 12) << ',' << text::format_double(r.ade_std, 12) << ','
            << text::format_double(r.fde_mean, 12) << ',' << text::format_double(r.fde_std, 12) << '\n';
}

}  // namespace cliff
