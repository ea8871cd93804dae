#include "cliff/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cliff/error.hpp"
#include "cliff/text.hpp"

namespace cliff {

const AgentClass* Dataset::find_class(const std::string& label) const {
    for (const auto& c : classes)
        if (c.label == label) return &c;
    return nullptr;
}

const Trajectory* Dataset::find_trajectory(const std::string& id) const {
    for (const auto& t : trajectories)
        if (t.id == id) return &t;
    return nullptr;
}

namespace {

struct Columns {
    int id = -1, time = -1, x = -1, y = -1, cls = -1;
};

Columns read_header(const std::string& line, const std::string& source) {
    const auto fields = text::split_csv(line);
    Columns c;
    for (int k = 0; k < static_cast<int>(fields.size()); ++k) {
        const auto& f = fields[k];
        if (f == "traj_id") c.id = k;
        else if (f == "time") c.time = k;
        else if (f == "x") c.x = k;
        else if (f == "y") c.y = k;
        else if (f == "class") c.cls = k;
    }
    if (c.id < 0 || c.time < 0 || c.x < 0 || c.y < 0 || c.cls < 0)
        throw ParseError(source, 1, "header must contain traj_id,time,x,y,class");
    return c;
}

}  // namespace

Dataset parse_trajectories(std::istream& in, const std::string& source, const FormatSpec& format) {
    Dataset ds;
    ds.name = format.name;
    ds.unit = format.unit;
    ds.dt = format.dt;

    std::string line;
    std::size_t line_no = 0;
    // Skip a UTF-8 BOM and blank lines before the header.
    Columns cols;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (text::trim(line).empty()) continue;
        cols = read_header(line, source);
        have_header = true;
        break;
    }
    if (!have_header) throw ParseError(source, line_no, "missing header");

    const int width = std::max({cols.id, cols.time, cols.x, cols.y, cols.cls}) + 1;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<Trajectory> tracks;

    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto f = text::split_csv(line);
        if (static_cast<int>(f.size()) < width) throw ParseError(source, line_no, "too few fields");
        double t = 0, x = 0, y = 0;
        if (!text::parse_double(f[cols.time], t) || !std::isfinite(t))
            throw ParseError(source, line_no, "bad time '" + f[cols.time] + "'");
        if (!text::parse_double(f[cols.x], x) || !std::isfinite(x))
            throw ParseError(source, line_no, "bad x '" + f[cols.x] + "'");
        if (!text::parse_double(f[cols.y], y) || !std::isfinite(y))
            throw ParseError(source, line_no, "bad y '" + f[cols.y] + "'");
        const auto& id = f[cols.id];
        const auto& label = f[cols.cls];
        if (id.empty()) throw ParseError(source, line_no, "empty traj_id");
        if (label.empty()) throw ParseError(source, line_no, "empty class");

        const AgentClass* cls = ds.find_class(label);
        if (cls == nullptr) {
            ds.classes.push_back({label, static_cast<int>(ds.classes.size())});
            cls = &ds.classes.back();
        }

        auto [it, inserted] = index.try_emplace(id, tracks.size());
        if (inserted) {
            Trajectory tr;
            tr.id = id;
            tr.agent_class = *cls;
            tr.dt = format.dt;
            tracks.push_back(std::move(tr));
        }
        auto& tr = tracks[it->second];
        if (tr.agent_class.label != label)
            throw DataError(source + ":" + std::to_string(line_no) + ": trajectory '" + id + "' changes class");
        if (!tr.times.empty()) {
            if (t == tr.times.back())
                throw DataError(source + ":" + std::to_string(line_no) + ": duplicate time for trajectory '" + id +
                                "'");
            if (t < tr.times.back())
                throw DataError(source + ":" + std::to_string(line_no) +
                                ": non-monotone timestamps for trajectory '" + id + "'");
        }
        tr.times.push_back(t);
        tr.states.push_back({{x, y}, {0.0, 0.0}});
    }

    for (auto& tr : tracks) {
        if (tr.states.size() < 2) continue;
        tr.start_time = tr.times.front();
        ds.trajectories.push_back(std::move(tr));
    }
    std::stable_sort(ds.trajectories.begin(), ds.trajectories.end(), [](const Trajectory& a, const Trajectory& b) {
        if (a.start_time != b.start_time) return a.start_time < b.start_time;
        return a.id < b.id;
    });
    return ds;
}

Dataset parse_trajectories(const std::filesystem::path& path, const FormatSpec& format) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open trajectory file '" + path.string() + "'");
    return parse_trajectories(in, path.string(), format);
}

void write_trajectories(const Dataset& dataset, std::ostream& out) {
    out << "traj_id,time,x,y,class\n";
    for (const auto& tr : dataset.trajectories) {
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            const double t = k < tr.times.size() ? tr.times[k] : tr.start_time + static_cast<double>(k) * tr.dt;
            out << tr.id << ',' << text::format_double(t) << ',' << text::format_double(tr.states[k].position.x)
                << ',' << text::format_double(tr.states[k].position.y) << ',' << tr.agent_class.label << '\n';
        }
    }
}

void write_trajectories(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    write_trajectories(dataset, out);
}

Trajectory resample(const Trajectory& traj, double dt_target) {
    if (!(dt_target > 0.0)) throw InvalidInput("resample: dt must be positive");
    if (traj.states.empty() || traj.times.size() != traj.states.size())
        throw InvalidInput("resample: trajectory '" + traj.id + "' has no timestamps");

    const double t0 = traj.times.front();
    const double span = traj.times.back() - t0;
    const double slack = 1e-9 * dt_target;
    if (span + slack < dt_target)
        throw EmptyInput("resample: trajectory '" + traj.id + "' spans less than one target step");

    Trajectory out;
    out.id = traj.id;
    out.agent_class = traj.agent_class;
    out.dt = dt_target;
    out.start_time = t0;

    const auto steps = static_cast<std::size_t>(std::floor((span + slack) / dt_target));
    out.times.reserve(steps + 1);
    out.states.reserve(steps + 1);
    std::size_t seg = 0;
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = t0 + static_cast<double>(k) * dt_target;
        while (seg + 2 < traj.times.size() && traj.times[seg + 1] <= t) ++seg;
        const double ta = traj.times[seg];
        const double tb = traj.times[seg + 1];
        const auto& pa = traj.states[seg].position;
        const auto& pb = traj.states[seg + 1].position;
        double alpha = (t - ta) / (tb - ta);
        alpha = std::clamp(alpha, 0.0, 1.0);
        PlanarVector p = alpha == 0.0 ? pa : (alpha == 1.0 ? pb : pa + alpha * (pb - pa));
        out.times.push_back(t);
        out.states.push_back({p, {0.0, 0.0}});
    }
    return out;
}

Trajectory derive_velocities(const Trajectory& traj) {
    const std::size_t n = traj.states.size();
    if (n < 2) throw InvalidInput("derive_velocities: trajectory '" + traj.id + "' has fewer than 2 states");
    Trajectory out = traj;
    const double dt = traj.dt;
    const auto& s = traj.states;
    out.states[0].velocity = (1.0 / dt) * (s[1].position - s[0].position);
    out.states[n - 1].velocity = (1.0 / dt) * (s[n - 1].position - s[n - 2].position);
    for (std::size_t k = 1; k + 1 < n; ++k)
        out.states[k].velocity = (1.0 / (2.0 * dt)) * (s[k + 1].position - s[k - 1].position);
    return out;
}

std::vector<PredictionInstance> make_windows(const Dataset& dataset, int observed_steps, int predicted_steps,
                                             int stride) {
    if (observed_steps < 1 || predicted_steps < 1 || stride < 1)
        throw InvalidInput("make_windows: O_p, T_p and stride must be >= 1");
    const auto op = static_cast<std::size_t>(observed_steps);
    const auto tp = static_cast<std::size_t>(predicted_steps);
    std::vector<PredictionInstance> out;
    for (const auto& tr : dataset.trajectories) {
        const std::size_t len = tr.states.size();
        for (std::size_t off = 0; off + op + tp <= len; off += static_cast<std::size_t>(stride)) {
            PredictionInstance inst;
            inst.id = tr.id + "#" + std::to_string(off);
            inst.source_traj = tr.id;
            inst.offset = off;
            inst.agent_class = tr.agent_class;
            inst.observed.assign(tr.states.begin() + static_cast<std::ptrdiff_t>(off),
                                 tr.states.begin() + static_cast<std::ptrdiff_t>(off + op));
            inst.future.assign(tr.states.begin() + static_cast<std::ptrdiff_t>(off + op),
                               tr.states.begin() + static_cast<std::ptrdiff_t>(off + op + tp));
            out.push_back(std::move(inst));
        }
    }
    return out;
}

namespace {

template <typename Range, typename ClassOf>
std::map<AgentClass, double> proportions(const Range& items, ClassOf class_of) {
    if (items.empty()) throw EmptyInput("class_proportions: empty input");
    std::map<AgentClass, std::size_t> counts;
    for (const auto& item : items) ++counts[class_of(item)];
    std::map<AgentClass, double> out;
    const auto total = static_cast<double>(items.size());
    for (const auto& [cls, n] : counts) out[cls] = static_cast<double>(n) / total;
    return out;
}

}  // namespace

std::map<AgentClass, double> class_proportions(const Dataset& dataset) {
    return proportions(dataset.trajectories, [](const Trajectory& t) { return t.agent_class; });
}

std::map<AgentClass, double> class_proportions(std::span<const PredictionInstance> instances) {
    return proportions(instances, [](const PredictionInstance& p) { return p.agent_class; });
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("manifest '" + path.string() + "': " + e.what());
    }
    Manifest m;
    const auto field = [&](const char* key, auto fallback) {
        try {
            return j.value(key, fallback);
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput("manifest '" + path.string() + "': field '" + key + "': " + e.what());
        }
    };
    m.name = field("name", std::string("dataset"));
    m.unit = unit_from_string(field("unit", std::string("meter")));
    m.dt = field("dt", kDefaultDt);
    try {
        const auto base = path.parent_path();
        for (const auto& f : j.at("files")) {
            std::filesystem::path p = f.get<std::string>();
            m.files.push_back(p.is_absolute() ? p : base / p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("manifest '" + path.string() + "': field 'files': " + e.what());
    }
    if (!(m.dt > 0.0)) throw InvalidInput("manifest '" + path.string() + "': field 'dt' must be positive");
    if (m.files.empty()) throw InvalidInput("manifest '" + path.string() + "': field 'files' is empty");
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["name"] = manifest.name;
    j["unit"] = to_string(manifest.unit);
    j["dt"] = manifest.dt;
    auto files = nlohmann::ordered_json::array();
    const auto base = std::filesystem::absolute(path).parent_path();
    for (const auto& f : manifest.files) {
        const auto rel = std::filesystem::absolute(f).lexically_relative(base);
        files.push_back((rel.empty() ? f : rel).generic_string());
    }
    j["files"] = files;
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

Dataset prepare(const Dataset& raw, double dt) {
    Dataset out;
    out.name = raw.name;
    out.unit = raw.unit;
    out.dt = dt;
    out.classes = raw.classes;
    for (const auto& tr : raw.trajectories) {
        if (tr.times.empty() || tr.times.back() - tr.times.front() + 1e-9 * dt < dt) continue;
        auto rs = resample(tr, dt);
        if (rs.states.size() < 2) continue;
        out.trajectories.push_back(derive_velocities(rs));
    }
    return out;
}

Dataset load_dataset(const Manifest& manifest) {
    Dataset merged;
    merged.name = manifest.name;
    merged.unit = manifest.unit;
    merged.dt = manifest.dt;
    FormatSpec fmt{manifest.name, manifest.unit, manifest.dt};
    std::unordered_set<std::string> seen;
    for (const auto& file : manifest.files) {
        Dataset part = parse_trajectories(file, fmt);
        for (auto& tr : part.trajectories) {
            if (!seen.insert(tr.id).second)
                throw DataError("trajectory id '" + tr.id + "' appears in more than one file (" + file.string() + ")");
            const AgentClass* cls = merged.find_class(tr.agent_class.label);
            if (cls == nullptr) {
                merged.classes.push_back({tr.agent_class.label, static_cast<int>(merged.classes.size())});
                cls = &merged.classes.back();
            }
            tr.agent_class = *cls;
            merged.trajectories.push_back(std::move(tr));
        }
    }
    return prepare(merged, manifest.dt);
}

}  // namespace cliff
