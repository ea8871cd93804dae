#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cliff/cliffmap.hpp"
#include "cliff/ingest.hpp"
#include "cliff/predictor.hpp"

namespace cliff {

double ade(std::span<const PlanarVector> gt, std::span<const PlanarVector> pred);
double fde(std::span<const PlanarVector> gt, std::span<const PlanarVector> pred);

struct TopK {
    double ade = 0.0;
    double fde = 0.0;
};

/// Best ADE and best FDE over the samples, minimised independently.
TopK top_k(std::span<const PlanarVector> gt, std::span<const std::vector<PlanarVector>> samples);

std::vector<PlanarVector> future_positions(const PredictionInstance& instance);

struct SplitSpec {
    double train_ratio = 0.9;
    int iterations = 10;
    std::uint64_t base_seed = 0;

    void validate() const;
};

/// One train/test partition. Trajectory ids are sorted; instance indices refer to
/// the span passed to make_splits.
struct Split {
    std::vector<std::string> train_trajs;
    std::vector<std::string> test_trajs;
    std::vector<std::size_t> train_instances;
    std::vector<std::size_t> test_instances;
};

/// Iteration i shuffles the source trajectory ids with seed base_seed + i and puts
/// ceil(p * n) of them in train. Throws DegenerateSplit if either side is empty.
std::vector<Split> make_splits(std::span<const PredictionInstance> instances, const SplitSpec& spec);

enum class Method { cvm, mod, cmod, external };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

inline const std::string kGlobalClass = "GLOBAL";

/// Mean Top-K error of one class (or GLOBAL) in one iteration.
struct IterationRecord {
    std::string method;
    std::string agent_class;
    int k = 1;
    std::optional<double> train_ratio;
    int iteration = 0;
    double ade = 0.0;
    double fde = 0.0;
    std::size_t instances = 0;
};

/// Mean and sample standard deviation across iterations.
struct MetricRecord {
    std::string method;
    std::string agent_class;
    int k = 1;
    std::optional<double> train_ratio;
    double ade_mean = 0.0;
    double ade_std = 0.0;
    double fde_mean = 0.0;
    double fde_std = 0.0;
    std::size_t iterations = 0;
};

struct BenchmarkResult {
    std::vector<IterationRecord> per_iteration;
    std::vector<MetricRecord> aggregate;

    const MetricRecord* find(const std::string& method, const std::string& agent_class,
                             std::optional<double> train_ratio = std::nullopt) const;
    void append(const BenchmarkResult& other);
};

/// Externally produced futures keyed by instance id: samples in sample_idx order,
/// positions in t order.
struct ExternalPredictions {
    std::map<std::string, std::vector<std::vector<PlanarVector>>> by_instance;
};

/// Reads `instance_id,sample_idx,t,x,y`. Sample indices must run 0..K-1 and t must
/// run 1..T_p per sample; violations raise ValidationError naming the instance.
ExternalPredictions read_predictions(std::istream& in, const std::string& source);
ExternalPredictions read_predictions(const std::filesystem::path& path);
void write_predictions(std::span<const PredictionSet> predictions, std::ostream& out);

struct BenchmarkParams {
    int observed_steps = 8;
    int stride = 1;
    GridSpec grid;
    FitParams fit;
    PredictorParams predictor;  // predicted_steps, K, mode, beta, r_s, dt
    unsigned threads = 1;
};

/// Repeated random sub-sampling: per iteration, fit maps on the train trajectories,
/// predict every test instance and score it. `external` is required for Method::external.
BenchmarkResult run_benchmark(const Dataset& dataset, Method method, const SplitSpec& spec,
                              const BenchmarkParams& params, const ExternalPredictions* external = nullptr);

/// One benchmark per train ratio, all sharing spec.base_seed.
BenchmarkResult data_efficiency_sweep(const Dataset& dataset, Method method, std::span<const double> train_ratios,
                                      const SplitSpec& spec, const BenchmarkParams& params,
                                      const ExternalPredictions* external = nullptr);

/// The default sweep 0.1, 0.2, ..., 0.9.
std::vector<double> default_train_ratios();

/// Scores predictions for every instance (one iteration, no train ratio).
BenchmarkResult score_external(const ExternalPredictions& predictions, std::span<const PredictionInstance> instances,
                               int k);

/// method,class,K,p,iteration,ade,fde
void write_long_csv(std::span<const IterationRecord> records, std::ostream& out);
/// method,class,K,p,ade_mean,ade_std,fde_mean,fde_std
void write_aggregate_csv(std::span<const MetricRecord> records, std::ostream& out);

}  // namespace cliff
