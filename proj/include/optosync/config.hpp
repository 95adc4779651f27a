#pragma once

// Run configuration: a single JSON document (schema in schema/run-config.schema.json).
// Unknown keys and wrong types are rejected; errors name the field by its dotted
// path and, when the field came from the file, its line and column.

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optosync/effective.hpp"
#include "optosync/params.hpp"
#include "optosync/sde.hpp"

namespace optosync::cli {

using json = nlohmann::ordered_json;

class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string field, const std::string& what, int line = 0, int column = 0)
        : std::runtime_error(format(field, what, line, column)), field_(std::move(field)), line_(line),
          column_(column) {}
    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    static std::string format(const std::string& field, const std::string& what, int line, int column) {
        std::string loc = line > 0 ? " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")" : "";
        return "config field '" + field + "'" + loc + ": " + what;
    }
    std::string field_;
    int line_;
    int column_;
};

namespace detail {

// Records the source position of every value in a JSON text, keyed by dotted path
// ("sweep.axes[0].name"). The text is assumed to be valid JSON.
class Locator {
public:
    explicit Locator(const std::string& text) : t_(text) {
        skip_ws();
        if (i_ < t_.size()) value("");
    }
    std::pair<int, int> find(const std::string& path) const {
        auto it = pos_.find(path);
        if (it == pos_.end()) return {0, 0};
        return it->second;
    }
    /// Position of the key naming `path`, falling back to its value.
    std::pair<int, int> find_key(const std::string& path) const {
        auto it = key_pos_.find(path);
        return it == key_pos_.end() ? find(path) : it->second;
    }

private:
    void skip_ws() {
        while (i_ < t_.size() && (t_[i_] == ' ' || t_[i_] == '\t' || t_[i_] == '\n' || t_[i_] == '\r')) advance();
    }
    void advance() {
        if (t_[i_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++i_;
    }
    std::string string_token() {
        std::string out;
        advance();  // opening quote
        while (i_ < t_.size() && t_[i_] != '"') {
            if (t_[i_] == '\\') {
                advance();
                if (i_ < t_.size()) out += t_[i_];
            } else {
                out += t_[i_];
            }
            advance();
        }
        if (i_ < t_.size()) advance();
        return out;
    }
    void value(const std::string& path) {
        pos_[path] = {line_, col_};
        char c = t_[i_];
        if (c == '{') {
            advance();
            skip_ws();
            while (i_ < t_.size() && t_[i_] != '}') {
                if (t_[i_] == ',') {
                    advance();
                    skip_ws();
                    continue;
                }
                int kl = line_, kc = col_;
                std::string key = string_token();
                std::string child = path.empty() ? key : path + "." + key;
                skip_ws();
                advance();  // colon
                skip_ws();
                value(child);
                key_pos_[child] = {kl, kc};
                skip_ws();
            }
            if (i_ < t_.size()) advance();
        } else if (c == '[') {
            advance();
            skip_ws();
            int k = 0;
            while (i_ < t_.size() && t_[i_] != ']') {
                if (t_[i_] == ',') {
                    advance();
                    skip_ws();
                    continue;
                }
                value(path + "[" + std::to_string(k++) + "]");
                skip_ws();
            }
            if (i_ < t_.size()) advance();
        } else if (c == '"') {
            string_token();
        } else {
            while (i_ < t_.size() && t_[i_] != ',' && t_[i_] != '}' && t_[i_] != ']' && t_[i_] != ' ' &&
                   t_[i_] != '\n' && t_[i_] != '\r' && t_[i_] != '\t')
                advance();
        }
    }

    const std::string& t_;
    std::size_t i_ = 0;
    int line_ = 1, col_ = 1;
    std::map<std::string, std::pair<int, int>> pos_;
    std::map<std::string, std::pair<int, int>> key_pos_;
};

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace detail

enum class Engine { langevin, mcwf, phase_model, noise_budget, threshold_scan };

inline const char* to_string(Engine e) {
    switch (e) {
        case Engine::langevin: return "langevin";
        case Engine::mcwf: return "mcwf";
        case Engine::phase_model: return "phase-model";
        case Engine::noise_budget: return "noise-budget";
        case Engine::threshold_scan: return "threshold-scan";
    }
    return "?";
}

struct AxisSpec {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    std::size_t points = 1;
    bool log = false;

    std::vector<double> values() const {
        std::vector<double> v(points);
        for (std::size_t i = 0; i < points; ++i) {
            double f = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
            v[i] = log ? std::exp(std::log(min) + f * (std::log(max) - std::log(min))) : min + f * (max - min);
            // 12 significant digits: 0.2 + 0.4 prints as 0.6 in file names and tables.
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.12g", v[i]);
            v[i] = std::strtod(buf, nullptr);
        }
        if (points > 1) v.back() = max;
        return v;
    }
};

struct McwfSettings {
    int n_opt = 8;
    int n_mech = 8;
    double leak_tol = 1e-3;
    double delta_offset = 0.0;
    std::size_t dimension_cap = 250000;
};

struct AnalysisSettings {
    std::size_t histogram_bins = 64;
    double hysteresis = std::numbers::pi / 8;
    double debounce_periods = 2.0;
    std::optional<double> tau_min_periods;  // absent: max(5 periods, 2/Gamma)
    double amplitude_floor = 1e-6;
};

struct ThresholdSettings {
    double t_settle = 2000.0 * kPeriod;
    double t_window = 200.0 * kPeriod;
    double energy_floor = 1e-6;
};

struct RunConfig {
    Engine engine = Engine::langevin;
    std::string output = "run";
    bool figures = true;
    bool full_output = true;  // per-trajectory files; defaults to false for sweeps

    OmParams cell;
    double delta_omega = 0.0;
    double coupling_k = 0.15;
    bool rwa = true;
    std::optional<QuantumScale> crossover;

    double dt = kPeriod / 200.0;
    double t_total = 4000.0 * kPeriod;
    double burn_in = 2000.0 * kPeriod;
    std::uint64_t sample_stride = 50;

    std::uint64_t seed = 1;
    std::uint64_t n_traj = 1;
    bool noise_enabled = true;

    AnalysisSettings analysis;
    McwfSettings mcwf;
    effective::HopfKuramotoParams phase_model;
    int phase_grid = effective::kDefaultGrid;
    std::optional<double> n_photons;  // noise budget; absent: measured from a noiseless run
    ThresholdSettings threshold;

    std::vector<AxisSpec> axes;

    json snapshot;  // normalized document with every default filled in

    /// Dimer described by the config with sweep coordinates applied.
    DimerParams dimer() const {
        OmParams c = cell;
        if (engine == Engine::mcwf) c.delta += mcwf.delta_offset;
        return make_detuned_dimer(c, delta_omega, coupling_k, rwa);
    }
};

/// Names that may appear as sweep axes, per engine.
inline const std::set<std::string>& sweepable(Engine e) {
    static const std::set<std::string> dynamics{"delta",   "omega",      "kappa",       "gamma",
                                                "g0",      "alpha_l",    "n_th",        "delta_omega",
                                                "coupling_k", "quantum_parameter", "rescaled_drive"};
    static const std::set<std::string> phase{"delta_omega", "s1", "s2"};
    static const std::set<std::string> budget{"delta", "kappa", "gamma", "g0", "alpha_l", "n_th", "n_photons"};
    static const std::set<std::string> threshold{"delta", "alpha_l", "kappa", "gamma", "g0"};
    switch (e) {
        case Engine::langevin:
        case Engine::mcwf: return dynamics;
        case Engine::phase_model: return phase;
        case Engine::noise_budget: return budget;
        case Engine::threshold_scan: return threshold;
    }
    return dynamics;
}

/// Applies one sweep coordinate.
inline void apply_axis(RunConfig& c, const std::string& name, double v) {
    if (name == "delta") c.cell.delta = v;
    else if (name == "omega") c.cell.omega = v;
    else if (name == "kappa") c.cell.kappa = v;
    else if (name == "gamma") c.cell.gamma = v;
    else if (name == "g0") c.cell.g0 = v;
    else if (name == "alpha_l") c.cell.alpha_l = v;
    else if (name == "n_th") c.cell.n_th = v;
    else if (name == "delta_omega") {
        c.delta_omega = v;
        c.phase_model.delta_omega = v;
    } else if (name == "coupling_k") c.coupling_k = v;
    else if (name == "quantum_parameter") c.crossover->quantum_parameter = v;
    else if (name == "rescaled_drive") c.crossover->rescaled_drive = v;
    else if (name == "s1") c.phase_model.s1 = v;
    else if (name == "s2") c.phase_model.s2 = v;
    else if (name == "n_photons") c.n_photons = v;
    else throw SchemaError("sweep.axes", "unknown parameter '" + name + "'");
}

namespace detail {

class Reader {
public:
    Reader(const Locator* loc, const std::set<std::string>& overridden) : loc_(loc), overridden_(overridden) {}

    [[noreturn]] void fail(const std::string& path, const std::string& what, bool at_key = false) const {
        for (const auto& o : overridden_)
            if (path == o || path.rfind(o + ".", 0) == 0 || path.rfind(o + "[", 0) == 0)
                throw SchemaError(path, what + " (set on the command line)");
        auto [l, c] = loc_ ? (at_key ? loc_->find_key(path) : loc_->find(path)) : std::pair{0, 0};
        throw SchemaError(path, what, l, c);
    }

    void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
        if (!obj.is_object()) fail(path, "must be an object");
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok |= it.key() == k;
            if (!ok) fail(join(path, it.key()), "unknown field", true);
        }
    }

    static std::string join(const std::string& path, const std::string& key) {
        return path.empty() ? key : path + "." + key;
    }

    void number(const json& obj, const std::string& path, const char* key, double& out) const {
        if (!obj.contains(key)) return;
        const auto& v = obj[key];
        if (!v.is_number()) fail(join(path, key), "must be a number");
        out = v.get<double>();
        if (!std::isfinite(out)) fail(join(path, key), "must be finite");
    }
    void positive(const json& obj, const std::string& path, const char* key, double& out) const {
        number(obj, path, key, out);
        if (obj.contains(key) && !(out > 0)) fail(join(path, key), "must be > 0");
    }
    template <class Int>
    void integer(const json& obj, const std::string& path, const char* key, Int& out, long long min) const {
        if (!obj.contains(key)) return;
        const auto& v = obj[key];
        if (!v.is_number_integer()) fail(join(path, key), "must be an integer");
        long long x = v.get<long long>();
        if (x < min) fail(join(path, key), "must be >= " + std::to_string(min));
        out = static_cast<Int>(x);
    }
    void boolean(const json& obj, const std::string& path, const char* key, bool& out) const {
        if (!obj.contains(key)) return;
        if (!obj[key].is_boolean()) fail(join(path, key), "must be true or false");
        out = obj[key].get<bool>();
    }
    void string(const json& obj, const std::string& path, const char* key, std::string& out) const {
        if (!obj.contains(key)) return;
        if (!obj[key].is_string()) fail(join(path, key), "must be a string");
        out = obj[key].get<std::string>();
    }

private:
    const Locator* loc_;
    const std::set<std::string>& overridden_;
};

inline Engine engine_from(const std::string& s, const Reader& r) {
    if (s == "langevin") return Engine::langevin;
    if (s == "mcwf") return Engine::mcwf;
    if (s == "phase-model") return Engine::phase_model;
    if (s == "noise-budget") return Engine::noise_budget;
    if (s == "threshold-scan") return Engine::threshold_scan;
    r.fail("engine", "must be one of langevin, mcwf, phase-model, noise-budget, threshold-scan");
}

}  // namespace detail

/// Normalized JSON of a config (all defaults explicit); the run snapshot. The
/// output directory is left out so that a run directory can be moved.
inline json to_json(const RunConfig& c) {
    json j;
    j["engine"] = to_string(c.engine);
    j["figures"] = c.figures;
    j["full_output"] = c.full_output;
    j["params"] = {{"delta", c.cell.delta},     {"omega", c.cell.omega},       {"kappa", c.cell.kappa},
                   {"gamma", c.cell.gamma},     {"g0", c.cell.g0},             {"alpha_l", c.cell.alpha_l},
                   {"delta_omega", c.delta_omega}, {"coupling_k", c.coupling_k},
                   {"rwa", c.rwa}};
    if (c.crossover)
        j["crossover"] = {{"quantum_parameter", c.crossover->quantum_parameter},
                          {"rescaled_drive", c.crossover->rescaled_drive}};
    j["integration"] = {{"dt", c.dt}, {"t_total", c.t_total}, {"burn_in", c.burn_in},
                        {"sample_stride", c.sample_stride}};
    j["noise"] = {{"seed", c.seed}, {"n_traj", c.n_traj}, {"n_th", c.cell.n_th}, {"enabled", c.noise_enabled}};
    json an = {{"histogram_bins", c.analysis.histogram_bins},
               {"hysteresis", c.analysis.hysteresis},
               {"debounce_periods", c.analysis.debounce_periods},
               {"amplitude_floor", c.analysis.amplitude_floor}};
    if (c.analysis.tau_min_periods) an["tau_min_periods"] = *c.analysis.tau_min_periods;
    j["analysis"] = an;
    if (c.engine == Engine::mcwf)
        j["mcwf"] = {{"n_opt", c.mcwf.n_opt},
                     {"n_mech", c.mcwf.n_mech},
                     {"leak_tol", c.mcwf.leak_tol},
                     {"delta_offset", c.mcwf.delta_offset},
                     {"dimension_cap", c.mcwf.dimension_cap}};
    if (c.engine == Engine::phase_model)
        j["phase_model"] = {{"delta_omega", c.phase_model.delta_omega},
                            {"s1", c.phase_model.s1},
                            {"s2", c.phase_model.s2},
                            {"grid", c.phase_grid}};
    if (c.engine == Engine::noise_budget) {
        json nb = json::object();
        if (c.n_photons) nb["n_photons"] = *c.n_photons;
        j["noise_budget"] = nb;
    }
    if (c.engine == Engine::threshold_scan)
        j["threshold_scan"] = {{"t_settle", c.threshold.t_settle},
                               {"t_window", c.threshold.t_window},
                               {"energy_floor", c.threshold.energy_floor}};
    json axes = json::array();
    for (const auto& a : c.axes)
        axes.push_back({{"name", a.name}, {"min", a.min}, {"max", a.max}, {"points", a.points},
                        {"scale", a.log ? "log" : "linear"}});
    j["sweep"] = {{"axes", axes}};
    return j;
}

/// Parses and validates a config document. `text` (the file the document came
/// from) supplies line/column positions; fields listed in `overridden` were
/// changed after reading and are reported without a position.
inline RunConfig parse_config(const json& doc, const std::string& text = "",
                              const std::set<std::string>& overridden = {}) {
    std::optional<detail::Locator> loc;
    if (!text.empty()) loc.emplace(text);
    detail::Reader r(loc ? &*loc : nullptr, overridden);
    r.only_keys(doc, "", {"engine", "output", "figures", "full_output", "params", "crossover", "integration",
                          "noise", "analysis", "mcwf", "phase_model", "noise_budget", "threshold_scan", "sweep"});
    RunConfig c;
    std::string engine = "langevin";
    r.string(doc, "", "engine", engine);
    c.engine = detail::engine_from(engine, r);
    r.string(doc, "", "output", c.output);
    if (c.output.empty()) r.fail("output", "must not be empty");
    r.boolean(doc, "", "figures", c.figures);

    if (c.engine == Engine::mcwf) {
        c.dt = 0.005;
        c.t_total = 200.0;
        c.burn_in = 50.0;
        c.sample_stride = 20;
        c.n_traj = 16;
    }

    if (doc.contains("params")) {
        const auto& p = doc["params"];
        r.only_keys(p, "params", {"delta", "omega", "kappa", "gamma", "g0", "alpha_l", "delta_omega", "coupling_k",
                                  "rwa"});
        r.number(p, "params", "delta", c.cell.delta);
        r.number(p, "params", "omega", c.cell.omega);
        r.number(p, "params", "kappa", c.cell.kappa);
        r.number(p, "params", "gamma", c.cell.gamma);
        r.number(p, "params", "g0", c.cell.g0);
        r.number(p, "params", "alpha_l", c.cell.alpha_l);
        r.number(p, "params", "delta_omega", c.delta_omega);
        r.number(p, "params", "coupling_k", c.coupling_k);
        r.boolean(p, "params", "rwa", c.rwa);
    }
    if (doc.contains("crossover")) {
        const auto& x = doc["crossover"];
        r.only_keys(x, "crossover", {"quantum_parameter", "rescaled_drive"});
        QuantumScale q;
        r.number(x, "crossover", "quantum_parameter", q.quantum_parameter);
        r.number(x, "crossover", "rescaled_drive", q.rescaled_drive);
        if (q.quantum_parameter < 0) r.fail("crossover.quantum_parameter", "must be >= 0");
        c.crossover = q;
    }
    if (doc.contains("integration")) {
        const auto& x = doc["integration"];
        r.only_keys(x, "integration", {"dt", "t_total", "burn_in", "sample_stride"});
        r.positive(x, "integration", "dt", c.dt);
        r.positive(x, "integration", "t_total", c.t_total);
        r.number(x, "integration", "burn_in", c.burn_in);
        r.integer(x, "integration", "sample_stride", c.sample_stride, 1);
    }
    if (c.burn_in < 0) r.fail("integration.burn_in", "must be >= 0");
    if (!(c.burn_in < c.t_total)) r.fail("integration.burn_in", "must be < t_total");
    if (doc.contains("noise")) {
        const auto& x = doc["noise"];
        r.only_keys(x, "noise", {"seed", "n_traj", "n_th", "enabled"});
        r.number(x, "noise", "n_th", c.cell.n_th);
        if (c.cell.n_th < 0) r.fail("noise.n_th", "must be >= 0");
        r.integer(x, "noise", "seed", c.seed, 0);
        r.integer(x, "noise", "n_traj", c.n_traj, 1);
        r.boolean(x, "noise", "enabled", c.noise_enabled);
    }
    if (doc.contains("analysis")) {
        const auto& x = doc["analysis"];
        r.only_keys(x, "analysis", {"histogram_bins", "hysteresis", "debounce_periods", "tau_min_periods",
                                    "amplitude_floor"});
        r.integer(x, "analysis", "histogram_bins", c.analysis.histogram_bins, 1);
        r.number(x, "analysis", "hysteresis", c.analysis.hysteresis);
        if (c.analysis.hysteresis < 0 || c.analysis.hysteresis >= std::numbers::pi / 2)
            r.fail("analysis.hysteresis", "must lie in [0, pi/2)");
        r.number(x, "analysis", "debounce_periods", c.analysis.debounce_periods);
        if (c.analysis.debounce_periods < 0) r.fail("analysis.debounce_periods", "must be >= 0");
        if (x.contains("tau_min_periods")) {
            double v = 0;
            r.number(x, "analysis", "tau_min_periods", v);
            if (v < 0) r.fail("analysis.tau_min_periods", "must be >= 0");
            c.analysis.tau_min_periods = v;
        }
        r.positive(x, "analysis", "amplitude_floor", c.analysis.amplitude_floor);
    }
    if (doc.contains("mcwf")) {
        if (c.engine != Engine::mcwf) r.fail("mcwf", "only allowed with engine mcwf");
        const auto& x = doc["mcwf"];
        r.only_keys(x, "mcwf", {"n_opt", "n_mech", "leak_tol", "delta_offset", "dimension_cap"});
        r.integer(x, "mcwf", "n_opt", c.mcwf.n_opt, 0);
        r.integer(x, "mcwf", "n_mech", c.mcwf.n_mech, 0);
        r.positive(x, "mcwf", "leak_tol", c.mcwf.leak_tol);
        r.number(x, "mcwf", "delta_offset", c.mcwf.delta_offset);
        r.integer(x, "mcwf", "dimension_cap", c.mcwf.dimension_cap, 1);
    }
    if (doc.contains("phase_model")) {
        if (c.engine != Engine::phase_model) r.fail("phase_model", "only allowed with engine phase-model");
        const auto& x = doc["phase_model"];
        r.only_keys(x, "phase_model", {"delta_omega", "s1", "s2", "grid"});
        r.number(x, "phase_model", "delta_omega", c.phase_model.delta_omega);
        r.number(x, "phase_model", "s1", c.phase_model.s1);
        r.number(x, "phase_model", "s2", c.phase_model.s2);
        r.integer(x, "phase_model", "grid", c.phase_grid, 16);
    }
    if (doc.contains("noise_budget")) {
        if (c.engine != Engine::noise_budget) r.fail("noise_budget", "only allowed with engine noise-budget");
        const auto& x = doc["noise_budget"];
        r.only_keys(x, "noise_budget", {"n_photons"});
        if (x.contains("n_photons")) {
            double v = 0;
            r.number(x, "noise_budget", "n_photons", v);
            if (v < 0) r.fail("noise_budget.n_photons", "must be >= 0");
            c.n_photons = v;
        }
    }
    if (doc.contains("threshold_scan")) {
        if (c.engine != Engine::threshold_scan) r.fail("threshold_scan", "only allowed with engine threshold-scan");
        const auto& x = doc["threshold_scan"];
        r.only_keys(x, "threshold_scan", {"t_settle", "t_window", "energy_floor"});
        r.positive(x, "threshold_scan", "t_settle", c.threshold.t_settle);
        r.positive(x, "threshold_scan", "t_window", c.threshold.t_window);
        r.positive(x, "threshold_scan", "energy_floor", c.threshold.energy_floor);
    }
    if (doc.contains("sweep")) {
        const auto& x = doc["sweep"];
        r.only_keys(x, "sweep", {"axes"});
        if (x.contains("axes")) {
            const auto& axes = x["axes"];
            if (!axes.is_array()) r.fail("sweep.axes", "must be an array");
            if (axes.size() > 2) r.fail("sweep.axes", "at most two axes");
            for (std::size_t i = 0; i < axes.size(); ++i) {
                std::string path = "sweep.axes[" + std::to_string(i) + "]";
                const auto& a = axes[i];
                r.only_keys(a, path, {"name", "min", "max", "points", "scale"});
                for (const char* k : {"name", "min", "max", "points"})
                    if (!a.contains(k)) r.fail(path + "." + k, "required");
                AxisSpec ax;
                r.string(a, path, "name", ax.name);
                r.number(a, path, "min", ax.min);
                r.number(a, path, "max", ax.max);
                r.integer(a, path, "points", ax.points, 1);
                std::string scale = "linear";
                r.string(a, path, "scale", scale);
                if (scale != "linear" && scale != "log") r.fail(path + ".scale", "must be linear or log");
                ax.log = scale == "log";
                if (!sweepable(c.engine).count(ax.name))
                    r.fail(path + ".name", "'" + ax.name + "' is not a sweepable parameter of engine " +
                                               to_string(c.engine));
                if ((ax.name == "quantum_parameter" || ax.name == "rescaled_drive") && !c.crossover)
                    r.fail(path + ".name", "sweeping '" + ax.name + "' requires a crossover section");
                if (ax.max < ax.min) r.fail(path + ".max", "must be >= min");
                if (ax.log && !(ax.min > 0)) r.fail(path + ".min", "log scale needs min > 0");
                for (const auto& prev : c.axes)
                    if (prev.name == ax.name) r.fail(path + ".name", "duplicate axis");
                c.axes.push_back(ax);
            }
        }
    }
    c.full_output = c.axes.empty();
    r.boolean(doc, "", "full_output", c.full_output);

    // Parameter ranges, checked on the base point with field names mapped to the file.
    try {
        DimerParams d = c.dimer();
        (void)d;
    } catch (const ParameterError& e) {
        std::string f = e.field();
        auto dot = f.find('.');
        std::string key = dot == std::string::npos ? f : f.substr(dot + 1);
        std::string section = key == "n_th" ? "noise." : "params.";
        if (f.rfind("cell2.omega", 0) == 0) key = "delta_omega";
        r.fail(section + key, std::string(e.what()).substr(e.field().size() + 2));
    }
    c.snapshot = to_json(c);
    return c;
}

/// Parses JSON text; syntax errors carry line and column.
inline RunConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [l, col] = detail::line_column(text, e.byte);
        throw SchemaError("<document>", std::string("invalid JSON: ") + e.what(), l, col);
    }
    if (!doc.is_object()) throw SchemaError("<document>", "must be a JSON object", 1, 1);
    return parse_config(doc, text);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Applies an "a.b.c=value" override (value parsed as JSON, else taken as a
/// string) and returns the dotted key.
inline std::string apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw SchemaError(assignment, "override must look like key=value");
    std::string key = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw SchemaError(key, "empty path component");
        json* next = nullptr;
        if (node->is_array()) {
            // Array elements are addressed by index, e.g. sweep.axes.0.points.
            std::size_t idx = 0;
            auto [end, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
            if (ec != std::errc{} || end != part.data() + part.size() || idx >= node->size())
                throw SchemaError(key, "'" + part + "' is not an index of a " + std::to_string(node->size()) +
                                           "-element array");
            next = &(*node)[idx];
        } else if (node->is_object() || node->is_null()) {
            if (dot != std::string::npos && !node->contains(part)) (*node)[part] = json::object();
            next = &(*node)[part];
        } else {
            throw SchemaError(key, "'" + part + "' is below a non-object value");
        }
        if (dot == std::string::npos) {
            *next = value;
            return key;
        }
        node = next;
        start = dot + 1;
    }
}

/// Command-line changes to a config document.
struct Overrides {
    std::optional<std::string> engine;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> n_traj;
    std::optional<bool> figures;
    std::optional<bool> full_output;
    std::vector<std::string> assignments;  // "a.b=value"
};

/// Reads a config file and applies overrides; errors in fields from the file
/// carry their line and column.
inline RunConfig load_config(const std::string& path, const Overrides& o = {}) {
    std::string text = read_file(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        auto [l, col] = detail::line_column(text, e.byte);
        throw SchemaError("<document>", std::string("invalid JSON: ") + e.what(), l, col);
    }
    if (!doc.is_object()) throw SchemaError("<document>", "must be a JSON object", 1, 1);
    std::set<std::string> changed;
    if (o.engine) {
        if (doc.contains("engine") && doc["engine"] != *o.engine)
            throw SchemaError("engine", "this subcommand runs engine " + *o.engine + ", the file selects " +
                                            doc["engine"].dump());
        doc["engine"] = *o.engine;
    }
    auto set = [&](const std::string& key, const json& v) {
        apply_override(doc, key + "=" + v.dump());
        changed.insert(key);
    };
    if (o.output) set("output", *o.output);
    if (o.seed) set("noise.seed", *o.seed);
    if (o.n_traj) set("noise.n_traj", *o.n_traj);
    if (o.figures) set("figures", *o.figures);
    if (o.full_output) set("full_output", *o.full_output);
    for (const auto& a : o.assignments) changed.insert(apply_override(doc, a));
    return parse_config(doc, text, changed);
}

}  // namespace optosync::cli
