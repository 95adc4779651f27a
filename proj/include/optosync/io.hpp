#pragma once

// CSV / JSON persistence. Column orders are fixed here and documented in
// docs/file-formats.md; tests/golden locks the header lines.

#include <json.hpp>

#include <array>
#include <charconv>
#include <limits>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "optosync/effective.hpp"
#include "optosync/mcwf.hpp"
#include "optosync/phase.hpp"
#include "optosync/sde.hpp"

namespace optosync::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& file, const std::string& what)
        : std::runtime_error(file + ": " + what) {}
};

/// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

/// Write to `<path>.tmp` then rename over `path`.
inline void atomic_write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path.string(), "cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- tables

/// A CSV table: optional '#'-prefixed comment lines, a header, string cells.
struct Table {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::out_of_range("no column '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
    double number(std::size_t row, const std::string& name) const { return parse_double(rows[row][column(name)]); }
    const std::string& text(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
    std::vector<double> numbers(const std::string& name) const {
        std::vector<double> v;
        auto c = column(name);
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(parse_double(r[c]));
        return v;
    }
};

namespace detail {
inline std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}
}  // namespace detail

inline std::string to_csv(const Table& t) {
    std::string out;
    for (const auto& c : t.comments) out += "# " + c + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += detail::escape(cells[i]);
        }
        out += '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) line(r);
    return out;
}

inline Table parse_csv(const std::string& text, const std::string& name = "<csv>") {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header && line[0] == '#') {
            t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        auto cells = detail::split_line(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() != t.header.size())
                throw FormatError(name, "row " + std::to_string(t.rows.size() + 1) + " has " +
                                            std::to_string(cells.size()) + " cells, header has " +
                                            std::to_string(t.header.size()));
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw FormatError(name, "no header line");
    return t;
}

inline Table read_csv(const fs::path& path) {
    Table t;
    try {
        t = parse_csv(read_text(path), path.string());
    } catch (const FormatError&) {
        throw;
    }
    return t;
}

// ---------------------------------------------------------- trajectory

inline const std::vector<std::string>& trajectory_columns() {
    static const std::vector<std::string> c{"t",          "re_alpha1", "im_alpha1", "re_beta1", "im_beta1",
                                            "re_alpha2", "im_alpha2", "re_beta2",  "im_beta2"};
    return c;
}

inline json to_json(const OmParams& p) {
    return {{"delta", p.delta}, {"omega", p.omega}, {"kappa", p.kappa}, {"gamma", p.gamma},
            {"g0", p.g0},       {"alpha_l", p.alpha_l}, {"n_th", p.n_th}};
}

inline json to_json(const DimerParams& d) {
    return {{"cell1", to_json(d.cell1)}, {"cell2", to_json(d.cell2)}, {"coupling_k", d.coupling_k},
            {"rwa", d.rwa_coupling}};
}

inline OmParams om_from_json(const json& j) {
    OmParams p;
    p.delta = j.at("delta").get<double>();
    p.omega = j.at("omega").get<double>();
    p.kappa = j.at("kappa").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.g0 = j.at("g0").get<double>();
    p.alpha_l = j.at("alpha_l").get<double>();
    p.n_th = j.at("n_th").get<double>();
    return p;
}

inline DimerParams dimer_from_json(const json& j) {
    DimerParams d;
    d.cell1 = om_from_json(j.at("cell1"));
    d.cell2 = om_from_json(j.at("cell2"));
    d.coupling_k = j.at("coupling_k").get<double>();
    d.rwa_coupling = j.at("rwa").get<bool>();
    d.identical = d.cell1 == d.cell2;
    return d;
}

/// Trajectory CSV. The comment line is a JSON snapshot of the parameters and
/// sampling; amplitudes are the integrated variables (rescaled if so noted).
inline std::string trajectory_csv(const Trajectory& tr, const json& extra = json::object()) {
    json meta = {{"params", to_json(tr.params)},
                 {"scaling", tr.scaling == Scaling::rescaled ? "rescaled" : "raw"},
                 {"g0", tr.g0},
                 {"dt", tr.dt},
                 {"sample_stride", tr.sample_stride}};
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
    std::string out = "# " + meta.dump() + "\n";
    const auto& cols = trajectory_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
    for (std::size_t i = 0; i < tr.states.size(); ++i) {
        const auto& s = tr.states[i];
        out += fmt(tr.times[i]);
        for (cplx z : {s.alpha1, s.beta1, s.alpha2, s.beta2}) {
            out += ',';
            out += fmt(z.real());
            out += ',';
            out += fmt(z.imag());
        }
        out += '\n';
    }
    return out;
}

struct LoadedTrajectory {
    Trajectory trajectory;
    json meta;
};

inline LoadedTrajectory read_trajectory(const fs::path& path) {
    Table t = read_csv(path);
    if (t.comments.empty()) throw FormatError(path.string(), "missing parameter snapshot comment");
    LoadedTrajectory out;
    try {
        out.meta = json::parse(t.comments.front());
        out.trajectory.params = dimer_from_json(out.meta.at("params"));
        out.trajectory.scaling = out.meta.at("scaling") == "rescaled" ? Scaling::rescaled : Scaling::raw;
        out.trajectory.g0 = out.meta.at("g0").get<double>();
        out.trajectory.dt = out.meta.at("dt").get<double>();
        out.trajectory.sample_stride = out.meta.at("sample_stride").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw FormatError(path.string(), std::string("bad parameter snapshot: ") + e.what());
    }
    if (t.header != trajectory_columns()) throw FormatError(path.string(), "unexpected trajectory columns");
    try {
        for (const auto& r : t.rows) {
            out.trajectory.times.push_back(parse_double(r[0]));
            std::array<double, 8> v{};
            for (std::size_t k = 0; k < 8; ++k) v[k] = parse_double(r[k + 1]);
            out.trajectory.states.push_back({{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {v[6], v[7]}});
        }
    } catch (const std::invalid_argument& e) {
        throw FormatError(path.string(), e.what());
    }
    if (out.trajectory.states.empty()) throw FormatError(path.string(), "no samples");
    return out;
}

// ------------------------------------------------------------ analysis

inline std::string histogram_csv(const PhaseHistogram& h) {
    Table t;
    t.header = {"bin_lo", "bin_hi", "density", "mass"};
    for (std::size_t i = 0; i < h.bins(); ++i)
        t.rows.push_back({fmt(h.edges[i]), fmt(h.edges[i + 1]), fmt(h.density[i]), fmt(h.density[i] * h.width())});
    return to_csv(t);
}

inline PhaseHistogram read_histogram(const fs::path& path) {
    Table t = read_csv(path);
    PhaseHistogram h;
    try {
        if (t.rows.empty()) throw FormatError(path.string(), "empty histogram");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            if (i == 0) h.edges.push_back(t.number(i, "bin_lo"));
            h.edges.push_back(t.number(i, "bin_hi"));
            h.density.push_back(t.number(i, "density"));
        }
    } catch (const std::out_of_range& e) {
        throw FormatError(path.string(), e.what());
    } catch (const std::invalid_argument& e) {
        throw FormatError(path.string(), e.what());
    }
    return h;
}

/// One row per debounced dwell; `series` is the trajectory index.
inline std::string residence_csv(const std::vector<std::pair<std::size_t, DwellInterval>>& dwells) {
    Table t;
    t.header = {"series", "state", "start", "end", "duration", "censored"};
    for (const auto& [k, iv] : dwells)
        t.rows.push_back({std::to_string(k), to_string(iv.state), fmt(iv.start), fmt(iv.end), fmt(iv.duration()),
                          iv.censored ? "1" : "0"});
    return to_csv(t);
}

inline std::string phase_trace_csv(const PhaseSeries& ps) {
    Table t;
    t.header = {"t", "delta_phi", "defined"};
    for (std::size_t i = 0; i < ps.size(); ++i)
        t.rows.push_back({fmt(ps.times[i]), fmt(ps.delta_phi[i]), ps.defined[i] ? "1" : "0"});
    return to_csv(t);
}

inline PhaseSeries read_phase_trace(const fs::path& path) {
    Table t = read_csv(path);
    PhaseSeries ps;
    try {
        ps.times = t.numbers("t");
        ps.delta_phi = t.numbers("delta_phi");
        for (double d : t.numbers("defined")) ps.defined.push_back(d != 0 ? 1 : 0);
    } catch (const std::exception& e) {
        throw FormatError(path.string(), e.what());
    }
    return ps;
}

// --------------------------------------------------------------- MCWF

inline const std::vector<std::string>& observable_columns() {
    static const std::vector<std::string> c{
        "t",        "n_a1",       "n_a1_se",    "n_a2",       "n_a2_se",  "n_b1",   "n_b1_se",
        "n_b2",     "n_b2_se",    "re_b1db2",   "re_b1db2_se", "im_b1db2", "im_b1db2_se", "re_c",
        "re_c_se",  "im_c",       "im_c_se"};
    return c;
}

inline std::string observables_csv(const mcwf::Ensemble& e) {
    Table t;
    t.header = observable_columns();
    for (std::size_t i = 0; i < e.times.size(); ++i) {
        std::vector<std::string> r{fmt(e.times[i])};
        for (const auto* s : {&e.n_a1, &e.n_a2, &e.n_b1, &e.n_b2, &e.re_b1b2, &e.im_b1b2, &e.re_c, &e.im_c}) {
            r.push_back(fmt(s->mean[i]));
            r.push_back(fmt(s->stderr_[i]));
        }
        t.rows.push_back(std::move(r));
    }
    return to_csv(t);
}

inline std::string jumps_csv(const std::vector<mcwf::TrajectoryRecord>& recs) {
    Table t;
    t.header = {"trajectory", "t", "channel"};
    for (const auto& r : recs)
        for (const auto& j : r.jumps) t.rows.push_back({std::to_string(r.index), fmt(j.time), mcwf::to_string(j.channel)});
    return to_csv(t);
}

// ------------------------------------------------------- phase models

inline std::string potential_csv(const effective::PotentialProfile& p) {
    Table t;
    t.header = {"phi", "u"};
    for (std::size_t i = 0; i < p.phi.size(); ++i) t.rows.push_back({fmt(p.phi[i]), fmt(p.u[i])});
    return to_csv(t);
}

inline std::string fixed_points_csv(const effective::Classification& c) {
    Table t;
    t.header = {"phi", "slope", "stable", "marginal"};
    for (const auto& f : c.fixed_points)
        t.rows.push_back({fmt(f.phi), fmt(f.slope), f.stable ? "1" : "0", f.marginal ? "1" : "0"});
    return to_csv(t);
}

}  // namespace optosync::io
