#include "cliff/cliffmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>

#include "cliff/error.hpp"
#include "cliff/parallel.hpp"
#include "cliff/text.hpp"

namespace cliff {

CellIndex cell_of(const GridSpec& grid, PlanarVector p) {
    return {static_cast<std::int64_t>(std::floor((p.x - grid.origin.x) / grid.resolution)),
            static_cast<std::int64_t>(std::floor((p.y - grid.origin.y) / grid.resolution))};
}

PlanarVector cell_center(const GridSpec& grid, CellIndex c) {
    return {grid.origin.x + (static_cast<double>(c.i) + 0.5) * grid.resolution,
            grid.origin.y + (static_cast<double>(c.j) + 0.5) * grid.resolution};
}

const Swgmm* CliffMap::find(CellIndex c) const {
    const auto it = cells.find(c);
    return it == cells.end() ? nullptr : &it->second;
}

const CliffMap* ConditionedMapSet::for_class(const AgentClass& cls) const {
    for (const auto& [key, map] : per_class)
        if (key.label == cls.label) return &map;
    return nullptr;
}

namespace {

std::uint64_t cell_seed(std::uint64_t seed, CellIndex c) {
    return derive_seed(seed, {static_cast<std::uint64_t>(c.i), static_cast<std::uint64_t>(c.j)});
}

}  // namespace

CliffMap build_map(std::span<const Trajectory> trajs, const GridSpec& grid, Unit unit, const FitParams& fit) {
    if (!(grid.resolution > 0.0)) throw InvalidInput("grid resolution must be positive");
    CliffMap map;
    map.grid = grid;
    map.unit = unit;

    std::map<CellIndex, std::vector<PolarVelocity>> bins;
    for (const auto& tr : trajs)
        for (const auto& s : tr.states) bins[cell_of(grid, s.position)].push_back(to_polar(s.velocity));

    std::vector<std::pair<CellIndex, std::vector<PolarVelocity>*>> work;
    for (auto& [idx, samples] : bins) {
        if (samples.size() < std::max<std::size_t>(fit.min_observations, 3)) continue;
        std::sort(samples.begin(), samples.end(), [](const PolarVelocity& a, const PolarVelocity& b) {
            if (a.heading != b.heading) return a.heading < b.heading;
            return a.speed < b.speed;
        });
        work.emplace_back(idx, &samples);
    }

    std::vector<Swgmm> fitted(work.size());
    parallel_for(work.size(), fit.threads, [&](std::size_t k) {
        const auto& [idx, samples] = work[k];
        fitted[k] = select_components(*samples, fit.max_components, cell_seed(fit.seed, idx), fit.em).model;
    });
    for (std::size_t k = 0; k < work.size(); ++k) map.cells.emplace(work[k].first, std::move(fitted[k]));
    return map;
}

ConditionedMapSet build_conditioned(std::span<const Trajectory> trajs, const GridSpec& grid, Unit unit,
                                    const FitParams& fit) {
    std::set<AgentClass> present;
    for (const auto& t : trajs) present.insert(t.agent_class);
    const std::vector<AgentClass> classes(present.begin(), present.end());
    return build_conditioned(trajs, classes, grid, unit, fit);
}

ConditionedMapSet build_conditioned(std::span<const Trajectory> trajs, std::span<const AgentClass> classes,
                                    const GridSpec& grid, Unit unit, const FitParams& fit) {
    ConditionedMapSet set;
    set.general = build_map(trajs, grid, unit, fit);
    for (const auto& cls : classes) {
        std::vector<Trajectory> own;
        for (const auto& t : trajs)
            if (t.agent_class.label == cls.label) own.push_back(t);
        if (own.empty()) {
            std::clog << "warning: class '" << cls.label << "' has no trajectories; no class map built\n";
            continue;
        }
        set.per_class.emplace(cls, build_map(own, grid, unit, fit));
    }
    return set;
}

std::optional<CellIndex> nearest_cell(const CliffMap& map, PlanarVector p, double r_s) {
    if (!(r_s >= 0.0)) throw InvalidInput("query: sampling radius must be non-negative");
    if (map.cells.empty()) return std::nullopt;
    const auto& g = map.grid;
    const double r2 = r_s * r_s;

    std::optional<CellIndex> best;
    double best_d2 = 0.0;
    auto consider = [&](CellIndex idx) {
        const auto c = cell_center(g, idx);
        const double dx = c.x - p.x, dy = c.y - p.y;
        const double d2 = dx * dx + dy * dy;
        if (d2 > r2) return;
        // Candidates arrive in ascending (i, j) order, so a strict < keeps the smallest index on ties.
        if (!best || d2 < best_d2) {
            best = idx;
            best_d2 = d2;
        }
    };

    const double lo_i = std::ceil((p.x - r_s - g.origin.x) / g.resolution - 0.5);
    const double hi_i = std::floor((p.x + r_s - g.origin.x) / g.resolution - 0.5);
    const double lo_j = std::ceil((p.y - r_s - g.origin.y) / g.resolution - 0.5);
    const double hi_j = std::floor((p.y + r_s - g.origin.y) / g.resolution - 0.5);
    const double window = (hi_i - lo_i + 1.0) * (hi_j - lo_j + 1.0);
    if (!(window > 0.0)) return std::nullopt;

    if (window > static_cast<double>(map.cells.size())) {
        for (const auto& [idx, _] : map.cells) consider(idx);
    } else {
        // One cell of slack on each side absorbs rounding in the bounds above.
        const auto i0 = static_cast<std::int64_t>(lo_i) - 1, i1 = static_cast<std::int64_t>(hi_i) + 1;
        const auto j0 = static_cast<std::int64_t>(lo_j) - 1, j1 = static_cast<std::int64_t>(hi_j) + 1;
        for (auto i = i0; i <= i1; ++i)
            for (auto it = map.cells.lower_bound({i, j0}); it != map.cells.end() && it->first.i == i && it->first.j <= j1;
                 ++it)
                consider(it->first);
    }
    return best;
}

const Swgmm* query(const CliffMap& map, PlanarVector p, double r_s) {
    const auto idx = nearest_cell(map, p, r_s);
    return idx ? map.find(*idx) : nullptr;
}

std::map<CellIndex, std::size_t> intensity(const CliffMap& map) {
    std::map<CellIndex, std::size_t> out;
    for (const auto& [idx, m] : map.cells) out.emplace(idx, m.support_count);
    return out;
}

std::map<CellIndex, double> kl_heatmap(const CliffMap& cond, const CliffMap& general, int n, std::uint64_t seed,
                                       unsigned threads) {
    if (!(cond.grid == general.grid)) throw InvalidInput("kl_heatmap: maps do not share a grid");
    std::vector<CellIndex> shared;
    for (const auto& [idx, _] : cond.cells)
        if (general.find(idx) != nullptr) shared.push_back(idx);
    std::vector<double> values(shared.size());
    parallel_for(shared.size(), threads, [&](std::size_t k) {
        Rng rng = make_rng(cell_seed(seed, shared[k]));
        values[k] = kl_mc(*cond.find(shared[k]), *general.find(shared[k]), n, rng);
    });
    std::map<CellIndex, double> out;
    for (std::size_t k = 0; k < shared.size(); ++k) out.emplace(shared[k], values[k]);
    return out;
}

// ---------------------------------------------------------------------------
// Map file
//
//   cliffmap <version>
//   unit <meter|pixel>
//   grid <resolution> <origin_x> <origin_y>
//   maps <count>
//   map general <cells>            | map class <id> <label> <cells>
//   cell <i> <j> <support> <J>
//   comp <weight> <mu_theta> <mu_rho> <c_tt> <c_tr> <c_rr>
//   checksum <fnv1a-64 of every preceding byte, hex>
//
// Reals are written with 17 significant digits. Labels are percent-encoded.
// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string encode_label(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (c <= 0x20 || c == '%' || c == 0x7f) {
            char buf[4];
            std::snprintf(buf, sizeof buf, "%%%02X", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::string decode_label(const std::string& s) {
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s[k] == '%') {
            if (k + 2 >= s.size()) throw MalformedFile("map file: bad label escape");
            out += static_cast<char>(std::stoi(s.substr(k + 1, 2), nullptr, 16));
            k += 2;
        } else {
            out += s[k];
        }
    }
    return out;
}

void write_cells(const CliffMap& map, std::ostream& out) {
    using text::format_double;
    for (const auto& [idx, m] : map.cells) {
        out << "cell " << idx.i << ' ' << idx.j << ' ' << m.support_count << ' ' << m.components.size() << '\n';
        for (const auto& c : m.components) {
            out << "comp " << format_double(c.weight) << ' ' << format_double(c.mean.heading) << ' '
                << format_double(c.mean.speed) << ' ' << format_double(c.cov.tt) << ' ' << format_double(c.cov.tr)
                << ' ' << format_double(c.cov.rr) << '\n';
        }
    }
}

class LineReader {
public:
    explicit LineReader(std::string_view body) : body_(body) {}

    std::vector<std::string> next(const char* expected) {
        if (pos_ >= body_.size()) throw MalformedFile(std::string("map file: unexpected end, expected '") + expected + "'");
        const auto end = body_.find('\n', pos_);
        if (end == std::string_view::npos) throw MalformedFile("map file: unterminated line");
        std::istringstream ss{std::string(body_.substr(pos_, end - pos_))};
        pos_ = end + 1;
        ++line_;
        std::vector<std::string> toks{std::istream_iterator<std::string>(ss), std::istream_iterator<std::string>()};
        if (toks.empty() || toks[0] != expected)
            throw MalformedFile("map file line " + std::to_string(line_) + ": expected '" + expected + "'");
        return toks;
    }

    bool done() const { return pos_ >= body_.size(); }
    std::size_t line() const { return line_; }

private:
    std::string_view body_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

double real_at(const std::vector<std::string>& toks, std::size_t k, std::size_t line) {
    double v = 0;
    if (k >= toks.size() || !text::parse_double(toks[k], v) || !std::isfinite(v))
        throw MalformedFile("map file line " + std::to_string(line) + ": bad number");
    return v;
}

long long int_at(const std::vector<std::string>& toks, std::size_t k, std::size_t line) {
    long long v = 0;
    if (k >= toks.size() || !text::parse_int(toks[k], v))
        throw MalformedFile("map file line " + std::to_string(line) + ": bad integer");
    return v;
}

void read_cells(LineReader& in, CliffMap& map, long long count) {
    for (long long c = 0; c < count; ++c) {
        const auto cell = in.next("cell");
        const CellIndex idx{int_at(cell, 1, in.line()), int_at(cell, 2, in.line())};
        Swgmm m;
        const long long support = int_at(cell, 3, in.line());
        const long long comps = int_at(cell, 4, in.line());
        if (support < 0 || comps < 1) throw MalformedFile("map file line " + std::to_string(in.line()) + ": bad cell");
        m.support_count = static_cast<std::size_t>(support);
        for (long long k = 0; k < comps; ++k) {
            const auto t = in.next("comp");
            SemiWrappedComponent comp;
            comp.weight = real_at(t, 1, in.line());
            comp.mean.heading = real_at(t, 2, in.line());
            comp.mean.speed = real_at(t, 3, in.line());
            comp.cov = {real_at(t, 4, in.line()), real_at(t, 5, in.line()), real_at(t, 6, in.line())};
            m.components.push_back(comp);
        }
        if (!map.cells.emplace(idx, std::move(m)).second)
            throw MalformedFile("map file line " + std::to_string(in.line()) + ": duplicate cell");
    }
}

}  // namespace

void save_map(const ConditionedMapSet& set, std::ostream& out) {
    using text::format_double;
    std::ostringstream body;
    const auto& g = set.general.grid;
    body << "cliffmap " << kMapFormatVersion << '\n';
    body << "unit " << to_string(set.general.unit) << '\n';
    body << "grid " << format_double(g.resolution) << ' ' << format_double(g.origin.x) << ' '
         << format_double(g.origin.y) << '\n';
    body << "maps " << (1 + set.per_class.size()) << '\n';
    body << "map general " << set.general.cells.size() << '\n';
    write_cells(set.general, body);
    for (const auto& [cls, map] : set.per_class) {
        if (!(map.grid == g) || map.unit != set.general.unit)
            throw InvalidInput("save_map: class map '" + cls.label + "' does not share the general grid");
        body << "map class " << cls.id << ' ' << encode_label(cls.label) << ' ' << map.cells.size() << '\n';
        write_cells(map, body);
    }
    const std::string payload = body.str();
    out << payload << "checksum " << hex64(fnv1a(payload)) << '\n';
}

void save_map(const ConditionedMapSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write map file '" + path.string() + "'");
    save_map(set, out);
    if (!out) throw InvalidInput("write failed for map file '" + path.string() + "'");
}

ConditionedMapSet load_map(std::istream& in) {
    const std::string all{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

    // Magic and version come first so an unknown version is reported as such.
    {
        std::istringstream head(all.substr(0, all.find('\n')));
        std::string magic;
        long long version = 0;
        if (!(head >> magic) || magic != "cliffmap") throw MalformedFile("not a cliffmap file");
        if (!(head >> version)) throw MalformedFile("map file: missing version");
        if (version != kMapFormatVersion)
            throw VersionMismatch("map file version " + std::to_string(version) + " is not supported (expected " +
                                  std::to_string(kMapFormatVersion) + ")");
    }

    const auto tag = all.rfind("checksum ");
    if (tag == std::string::npos || (tag != 0 && all[tag - 1] != '\n'))
        throw MalformedFile("map file: missing checksum (truncated?)");
    const std::string_view payload(all.data(), tag);
    const std::string stored = text::trim(std::string_view(all).substr(tag + 9));
    if (stored.size() != 16) throw MalformedFile("map file: malformed checksum");
    if (stored != hex64(fnv1a(payload))) throw ChecksumMismatch("map file: checksum mismatch");

    LineReader r(payload);
    r.next("cliffmap");
    const auto unit_line = r.next("unit");
    if (unit_line.size() != 2) throw MalformedFile("map file: bad unit line");
    Unit unit;
    try {
        unit = unit_from_string(unit_line[1]);
    } catch (const InvalidInput& e) {
        throw MalformedFile(std::string("map file: ") + e.what());
    }
    const auto grid_line = r.next("grid");
    GridSpec grid{real_at(grid_line, 1, r.line()), {real_at(grid_line, 2, r.line()), real_at(grid_line, 3, r.line())}};
    if (!(grid.resolution > 0.0)) throw MalformedFile("map file: non-positive resolution");
    const long long maps = int_at(r.next("maps"), 1, r.line());
    if (maps < 1) throw MalformedFile("map file: no general map");

    ConditionedMapSet set;
    for (long long m = 0; m < maps; ++m) {
        const auto head = r.next("map");
        CliffMap map;
        map.grid = grid;
        map.unit = unit;
        if (m == 0) {
            if (head.size() != 3 || head[1] != "general") throw MalformedFile("map file: first map must be general");
            read_cells(r, map, int_at(head, 2, r.line()));
            set.general = std::move(map);
        } else {
            if (head.size() != 5 || head[1] != "class") throw MalformedFile("map file: bad class map header");
            const AgentClass cls{decode_label(head[3]), static_cast<int>(int_at(head, 2, r.line()))};
            read_cells(r, map, int_at(head, 4, r.line()));
            if (!set.per_class.emplace(cls, std::move(map)).second)
                throw MalformedFile("map file: duplicate class '" + cls.label + "'");
        }
    }
    if (!r.done()) throw MalformedFile("map file: trailing content before checksum");
    return set;
}

ConditionedMapSet load_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open map file '" + path.string() + "'");
    try {
        return load_map(in);
    } catch (const VersionMismatch& e) {
        throw VersionMismatch(path.string() + ": " + e.what());
    } catch (const ChecksumMismatch& e) {
        throw ChecksumMismatch(path.string() + ": " + e.what());
    } catch (const MalformedFile& e) {
        throw MalformedFile(path.string() + ": " + e.what());
    }
}

void export_field(const CliffMap& map, std::ostream& out) {
    using text::format_double;
    out << "i,j,cx,cy,comp_idx,weight,mu_theta,mu_rho,support\n";
    for (const auto& [idx, m] : map.cells) {
        const auto c = cell_center(map.grid, idx);
        for (std::size_t k = 0; k < m.components.size(); ++k) {
            const auto& comp = m.components[k];
            out << idx.i << ',' << idx.j << ',' << format_double(c.x, 12) << ',' << format_double(c.y, 12) << ',' << k
                << ',' << format_double(comp.weight, 12) << ',' << format_double(comp.mean.heading, 12) << ','
                << format_double(comp.mean.speed, 12) << ',' << m.support_count << '\n';
        }
    }
}

void export_field(const CliffMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    export_field(map, out);
}

void export_intensity(const CliffMap& map, std::ostream& out) {
    out << "i,j,cx,cy,count\n";
    for (const auto& [idx, m] : map.cells) {
        const auto c = cell_center(map.grid, idx);
        out << idx.i << ',' << idx.j << ',' << text::format_double(c.x, 12) << ',' << text::format_double(c.y, 12)
            << ',' << m.support_count << '\n';
    }
}

void export_kl(const GridSpec& grid, const std::map<CellIndex, double>& heatmap, std::ostream& out) {
    out << "i,j,cx,cy,kl\n";
    for (const auto& [idx, v] : heatmap) {
        const auto c = cell_center(grid, idx);
        out << idx.i << ',' << idx.j << ',' << text::format_double(c.x, 12) << ',' << text::format_double(c.y, 12)
            << ',' << text::format_double(v, 12) << '\n';
    }
}

}  // namespace cliff
