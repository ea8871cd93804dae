#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cliff/core.hpp"

namespace cliff {

/// Default time step: a 4.8 s horizon over 12 predicted steps.
inline constexpr double kDefaultDt = 4.8 / 12.0;

struct Dataset {
    std::string name;
    Unit unit = Unit::meter;
    double dt = kDefaultDt;
    std::vector<Trajectory> trajectories;
    std::vector<AgentClass> classes;

    const AgentClass* find_class(const std::string& label) const;
    const Trajectory* find_trajectory(const std::string& id) const;
};

/// One observation window plus its ground-truth future.
struct PredictionInstance {
    std::string id;  // "<traj_id>#<offset>"
    std::string source_traj;
    std::size_t offset = 0;
    AgentClass agent_class;
    std::vector<State> observed;
    std::vector<State> future;
};

struct FormatSpec {
    std::string name = "dataset";
    Unit unit = Unit::meter;
    double dt = kDefaultDt;
};

/// Reads the `traj_id,time,x,y,class` CSV (header required, any column order).
/// Rows of one id must have strictly increasing times. Ids with a single row are
/// dropped. Returned trajectories keep their raw timestamps and zero velocities,
/// ordered by start time then id; class ids are assigned by first appearance.
Dataset parse_trajectories(const std::filesystem::path& path, const FormatSpec& format);
Dataset parse_trajectories(std::istream& in, const std::string& source, const FormatSpec& format);

void write_trajectories(const Dataset& dataset, std::ostream& out);
void write_trajectories(const Dataset& dataset, const std::filesystem::path& path);

/// Linear interpolation of positions onto start_time + k * dt_target.
/// Throws EmptyInput if the track spans less than one target step.
Trajectory resample(const Trajectory& traj, double dt_target);

/// Central differences inside, one-sided differences at both ends.
Trajectory derive_velocities(const Trajectory& traj);

std::vector<PredictionInstance> make_windows(const Dataset& dataset, int observed_steps, int predicted_steps,
                                             int stride = 1);

/// Fraction of trajectories per class. Throws EmptyInput for an empty dataset.
std::map<AgentClass, double> class_proportions(const Dataset& dataset);
/// Fraction of prediction instances per class.
std::map<AgentClass, double> class_proportions(std::span<const PredictionInstance> instances);

/// Dataset manifest: a JSON object with name, unit, dt and trajectory CSV files.
struct Manifest {
    std::string name = "dataset";
    Unit unit = Unit::meter;
    double dt = kDefaultDt;
    std::vector<std::filesystem::path> files;  // resolved against the manifest directory
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Parses every file, merges classes by label, resamples to the manifest dt and
/// derives velocities. Tracks shorter than two resampled states are dropped.
Dataset load_dataset(const Manifest& manifest);

/// Resample + derive_velocities for every trajectory of a parsed dataset.
Dataset prepare(const Dataset& raw, double dt);

}  // namespace cliff
