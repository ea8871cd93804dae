#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cliff/core.hpp"
#include "cliff/swgmm.hpp"

namespace cliff {

struct GridSpec {
    double resolution = 0.2;
    PlanarVector origin;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct CellIndex {
    std::int64_t i = 0;
    std::int64_t j = 0;

    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Half-open cells: floor((p - origin) / resolution) on each axis.
CellIndex cell_of(const GridSpec& grid, PlanarVector p);
PlanarVector cell_center(const GridSpec& grid, CellIndex c);

/// Sparse grid of velocity mixtures. Only cells that met the observation threshold are stored.
struct CliffMap {
    GridSpec grid;
    Unit unit = Unit::meter;
    std::map<CellIndex, Swgmm> cells;

    const Swgmm* find(CellIndex c) const;
    bool empty() const { return cells.empty(); }
};

/// One general map plus one map per agent class, all on the same grid.
struct ConditionedMapSet {
    CliffMap general;
    std::map<AgentClass, CliffMap> per_class;

    /// Map of the class with this label, or nullptr.
    const CliffMap* for_class(const AgentClass& cls) const;
};

struct FitParams {
    std::size_t min_observations = 10;  // N_min
    int max_components = 5;             // J_max
    EmOptions em;
    std::uint64_t seed = 0;
    unsigned threads = 1;  // 0 = hardware concurrency
};

/// Bins every state's polar velocity by the cell containing its position and fits a
/// BIC-selected mixture in each cell with at least `min_observations` samples.
/// Per-cell samples are sorted before fitting and each cell has its own seed, so the
/// result does not depend on trajectory order or thread count.
CliffMap build_map(std::span<const Trajectory> trajs, const GridSpec& grid, Unit unit, const FitParams& fit);

ConditionedMapSet build_conditioned(std::span<const Trajectory> trajs, const GridSpec& grid, Unit unit,
                                    const FitParams& fit);

/// Same as above, but classes listed in `classes` that have no trajectories are
/// omitted from per_class with a warning on std::clog.
ConditionedMapSet build_conditioned(std::span<const Trajectory> trajs, std::span<const AgentClass> classes,
                                    const GridSpec& grid, Unit unit, const FitParams& fit);

/// Populated cell whose center is nearest to p and within r_s (ties: smallest index).
std::optional<CellIndex> nearest_cell(const CliffMap& map, PlanarVector p, double r_s);
const Swgmm* query(const CliffMap& map, PlanarVector p, double r_s);

std::map<CellIndex, std::size_t> intensity(const CliffMap& map);

/// KL(cond || general) per cell populated in both maps. Each cell draws from its own
/// stream derived from `seed`.
std::map<CellIndex, double> kl_heatmap(const CliffMap& cond, const CliffMap& general, int n, std::uint64_t seed,
                                       unsigned threads = 1);

inline constexpr int kMapFormatVersion = 1;

void save_map(const ConditionedMapSet& set, std::ostream& out);
void save_map(const ConditionedMapSet& set, const std::filesystem::path& path);
ConditionedMapSet load_map(std::istream& in);
ConditionedMapSet load_map(const std::filesystem::path& path);

/// CSV `i,j,cx,cy,comp_idx,weight,mu_theta,mu_rho,support`, one row per component.
void export_field(const CliffMap& map, std::ostream& out);
void export_field(const CliffMap& map, const std::filesystem::path& path);

/// CSV `i,j,cx,cy,count`.
void export_intensity(const CliffMap& map, std::ostream& out);
/// CSV `i,j,cx,cy,kl`.
void export_kl(const GridSpec& grid, const std::map<CellIndex, double>& heatmap, std::ostream& out);

}  // namespace cliff
