#pragma once

// Sweep execution: grid cells x trajectories on a worker pool, one atomic file
// set per cell, resumable from the cell files already on disk.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "optosync/config.hpp"
#include "optosync/effective.hpp"
#include "optosync/io.hpp"
#include "optosync/mcwf.hpp"
#include "optosync/noise_budget.hpp"
#include "optosync/phase.hpp"
#include "optosync/sde.hpp"

namespace optosync::cli {

namespace fs = std::filesystem;

inline constexpr const char* kSoftwareName = "optosync";
inline constexpr const char* kSoftwareVersion = "1.0.0";
inline constexpr const char* kWorkersEnv = "OPTOSYNC_WORKERS";

/// Net phase slips per mechanical period above which a cell counts as drifting.
inline constexpr double kDriftSlipRate = 0.01;
/// Occupation fraction above which a cell counts as locked to one state.
inline constexpr double kLockedFraction = 0.9;

/// Worker count from OPTOSYNC_WORKERS, else the hardware concurrency.
inline unsigned worker_count() {
    const char* env = std::getenv(kWorkersEnv);
    if (env && *env) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 4096)
            throw std::invalid_argument(std::string(kWorkersEnv) + " must be a positive integer, got '" + env + "'");
        return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct CellSpec {
    std::size_t linear = 0;
    std::vector<std::size_t> index;
    std::vector<double> coords;
    std::string name;
    RunConfig config;  // base config with the coordinates applied
};

inline std::string cell_name(const std::vector<std::size_t>& index) {
    std::string n = "cell";
    for (auto i : index) {
        std::string s = std::to_string(i);
        n += "_" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
    }
    return n;
}

/// Row-major grid; the first axis is the slow index.
inline std::vector<CellSpec> grid_cells(const RunConfig& c) {
    std::vector<std::vector<double>> values;
    for (const auto& a : c.axes) values.push_back(a.values());
    std::size_t total = 1;
    for (const auto& v : values) total *= v.size();
    std::vector<CellSpec> cells(total);
    for (std::size_t lin = 0; lin < total; ++lin) {
        CellSpec& s = cells[lin];
        s.linear = lin;
        s.index.resize(values.size());
        std::size_t rem = lin;
        for (std::size_t k = values.size(); k-- > 0;) {
            s.index[k] = rem % values[k].size();
            rem /= values[k].size();
        }
        s.config = c;
        for (std::size_t k = 0; k < values.size(); ++k) {
            double v = values[k][s.index[k]];
            s.coords.push_back(v);
            apply_axis(s.config, c.axes[k].name, v);
        }
        s.name = cell_name(s.index);
    }
    return cells;
}

inline bool stochastic(Engine e) { return e == Engine::langevin || e == Engine::mcwf; }

/// Engine-specific scalar columns of the cell and summary tables.
inline std::vector<std::string> engine_columns(Engine e) {
    const std::vector<std::string> phase{"mean_cos",  "mean_sin",   "stderr_cos", "stderr_sin", "p0",
                                         "p_pi",      "switch_count", "tau0",     "tau0_se",    "tau_pi",
                                         "tau_pi_se", "tau0_tail",  "tau_pi_tail", "tau_min",   "slip_rate",
                                         "regime"};
    switch (e) {
        case Engine::langevin: return phase;
        case Engine::mcwf: {
            auto c = phase;
            for (const char* k : {"n_a1", "n_b1", "n_b2", "re_c", "im_c", "total_jumps", "max_leakage",
                                  "truncation_unsafe"})
                c.push_back(k);
            return c;
        }
        case Engine::phase_model:
            return {"delta_omega", "s1", "s2", "regime", "stable_phases", "marginal"};
        case Engine::noise_budget:
            return {"n_photons", "s_sn_norm", "s_th_norm", "n_th_star", "cooperativity", "half_cooperativity",
                    "resolved_sideband"};
        case Engine::threshold_scan:
            return {"delta", "alpha_l", "oscillation_energy", "mean_photons", "limit_cycle"};
    }
    return {};
}

inline std::vector<std::string> summary_columns(const RunConfig& c) {
    std::vector<std::string> h{"cell"};
    static const char* idx[] = {"i", "j"};
    for (std::size_t k = 0; k < c.axes.size(); ++k) h.push_back(idx[k]);
    for (const auto& a : c.axes) h.push_back(a.name);
    for (auto& e : engine_columns(c.engine))
        if (std::find(h.begin(), h.end(), e) == h.end()) h.push_back(e);
    for (const char* k : {"seed", "stream_first", "stream_count", "status", "error"}) h.push_back(k);
    return h;
}

/// Net winding of the relative phase over a set of series.
struct SlipStats {
    double turns = 0.0;          // signed net number of 2 pi slips
    std::size_t crossings = 0;   // passages through the branch cut at +-pi, either direction
    double periods = 0.0;        // sampled time in mechanical periods

    double rate() const { return periods > 0 ? std::abs(turns) / periods : 0.0; }
    /// Net winding beyond what unbiased random slipping would produce.
    bool drifting() const {
        return rate() > kDriftSlipRate &&
               std::abs(turns) > 3.0 * std::sqrt(static_cast<double>(std::max<std::size_t>(crossings, 1)));
    }
};

inline SlipStats slip_stats(const PhaseSeries& ps) {
    SlipStats s;
    double wind = 0.0, first = 0.0, last = 0.0, prev = 0.0;
    bool have = false;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!ps.defined[i]) continue;
        if (!have) {
            first = ps.times[i];
            have = true;
        } else {
            double step = ps.delta_phi[i] - prev;
            if (std::abs(step) > std::numbers::pi) ++s.crossings;
            wind += wrap_phase(step);
        }
        prev = ps.delta_phi[i];
        last = ps.times[i];
    }
    s.turns = wind / (2.0 * std::numbers::pi);
    s.periods = (last - first) / kPeriod;
    return s;
}

/// Label from slip and occupation statistics: drift, zero-sync, pi-sync, or mixed.
inline std::string dynamic_regime(const SlipStats& slips, double p0, double p_pi) {
    if (slips.drifting()) return "drift";
    if (p0 >= kLockedFraction) return "zero-sync";
    if (p_pi >= kLockedFraction) return "pi-sync";
    return "mixed";
}

/// Residence options for a cell, honoring the analysis section.
inline ResidenceOptions residence_options(const AnalysisSettings& a, const DimerParams& d) {
    ResidenceOptions o = ResidenceOptions::for_params(d);
    o.hysteresis = a.hysteresis;
    o.debounce_periods = a.debounce_periods;
    if (a.tau_min_periods) o.tau_min_periods = *a.tau_min_periods;
    return o;
}

using Row = std::map<std::string, std::string>;

/// Phase statistics shared by the Langevin and MCWF engines.
struct PhaseSummary {
    Row row;
    PhaseHistogram histogram;
    std::vector<std::pair<std::size_t, DwellInterval>> dwells;
};

inline PhaseSummary summarize_phases(const std::vector<PhaseSeries>& series, const AnalysisSettings& a,
                                     const DimerParams& d) {
    using io::fmt;
    PhaseSummary out;
    PhaseSeries pooled;
    for (const auto& ps : series) {
        pooled.times.insert(pooled.times.end(), ps.times.begin(), ps.times.end());
        pooled.delta_phi.insert(pooled.delta_phi.end(), ps.delta_phi.begin(), ps.delta_phi.end());
        pooled.defined.insert(pooled.defined.end(), ps.defined.begin(), ps.defined.end());
    }
    out.histogram = histogram(pooled, a.histogram_bins);

    double mc = 0, ms = 0, vc = 0, vs = 0;
    SlipStats slips;
    for (const auto& ps : series) {
        auto m = sync_measure(ps);
        mc += m.mean_cos;
        ms += m.mean_sin;
        vc += m.stderr_cos * m.stderr_cos;
        vs += m.stderr_sin * m.stderr_sin;
        auto st = slip_stats(ps);
        slips.turns += st.turns;
        slips.crossings += st.crossings;
        slips.periods += st.periods;
    }
    const double n = static_cast<double>(series.size());
    mc /= n;
    ms /= n;
    double sc = std::sqrt(vc) / n, ss = std::sqrt(vs) / n;
    if (series.size() > 1) {
        // Spread between trajectories, when larger than the within-series estimate.
        double var_c = 0, var_s = 0;
        for (const auto& ps : series) {
            auto m = sync_measure(ps);
            var_c += (m.mean_cos - mc) * (m.mean_cos - mc);
            var_s += (m.mean_sin - ms) * (m.mean_sin - ms);
        }
        sc = std::max(sc, std::sqrt(var_c / (n - 1) / n));
        ss = std::max(ss, std::sqrt(var_s / (n - 1) / n));
    }
    auto rec = residence_times(std::span<const PhaseSeries>(series), residence_options(a, d));
    std::size_t k = 0;
    // Intervals are stored series after series; a restart of time marks the next series.
    double last_end = -1.0;
    for (const auto& iv : rec.intervals) {
        if (iv.start < last_end) ++k;
        last_end = iv.end;
        out.dwells.push_back({k, iv});
    }
    Row& r = out.row;
    r["mean_cos"] = fmt(mc);
    r["mean_sin"] = fmt(ms);
    r["stderr_cos"] = fmt(sc);
    r["stderr_sin"] = fmt(ss);
    r["p0"] = fmt(rec.p0);
    r["p_pi"] = fmt(rec.p_pi);
    r["switch_count"] = std::to_string(rec.switch_count);
    r["tau0"] = fmt(rec.tau0_mean);
    r["tau0_se"] = fmt(rec.tau0_stderr);
    r["tau_pi"] = fmt(rec.tau_pi_mean);
    r["tau_pi_se"] = fmt(rec.tau_pi_stderr);
    r["tau0_tail"] = fmt(rec.tau0_tail);
    r["tau_pi_tail"] = fmt(rec.tau_pi_tail);
    r["tau_min"] = fmt(rec.tau_min);
    r["slip_rate"] = fmt(slips.rate());
    r["regime"] = dynamic_regime(slips, rec.p0, rec.p_pi);
    return out;
}

/// Langevin model of a cell: rescaled when a crossover section is present.
inline LangevinModel langevin_model(const RunConfig& c) {
    DimerParams d = c.dimer();
    if (c.crossover) return rescaled_model(crossover_point(*c.crossover, d));
    return raw_model(d);
}

inline SimulationSettings simulation_settings(const RunConfig& c) {
    SimulationSettings s;
    s.dt = c.dt;
    s.t_total = c.t_total;
    s.burn_in = c.burn_in;
    s.sample_stride = c.sample_stride;
    return s;
}

inline mcwf::RunSettings mcwf_settings(const RunConfig& c) {
    mcwf::RunSettings rs;
    rs.t_total = c.t_total;
    rs.dt = c.dt;
    rs.sample_stride = c.sample_stride;
    rs.leak_tol = c.mcwf.leak_tol;
    rs.keep_jumps = c.full_output;
    rs.workers = 1;
    return rs;
}

/// Relative phase arg<b1^dag b2> of one quantum trajectory after burn-in.
inline PhaseSeries mcwf_phase_series(const mcwf::TrajectoryRecord& r, const mcwf::RunSettings& rs, double burn_in) {
    PhaseSeries ps;
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        double t = static_cast<double>(i * rs.sample_stride) * rs.dt;
        if (t < burn_in) continue;
        const auto& o = r.samples[i];
        ps.times.push_back(t);
        ps.delta_phi.push_back(o.phase_defined ? wrap_phase(std::arg(o.b1dag_b2)) : 0.0);
        ps.defined.push_back(o.phase_defined ? 1 : 0);
    }
    return ps;
}

/// Files of one cell, written before its row file.
struct CellOutput {
    Row row;
    std::vector<std::pair<std::string, std::string>> files;  // suffix -> content
};

namespace detail {

// One (cell, trajectory) job's product.
struct JobProduct {
    PhaseSeries phases;
    std::optional<Trajectory> trajectory;
    std::optional<mcwf::TrajectoryRecord> quantum;
    std::string error;
};

struct CellWork {
    const CellSpec* spec = nullptr;
    std::vector<JobProduct> jobs;
    std::atomic<std::size_t> remaining{0};
    std::once_flag ops_once;
    std::shared_ptr<mcwf::OperatorSet> ops;
    std::string ops_error;
};

inline JobProduct langevin_job(const CellSpec& cell, std::uint64_t stream) {
    JobProduct p;
    const RunConfig& c = cell.config;
    LangevinModel m = langevin_model(c);
    NoiseSpec noise = c.noise_enabled ? noise_for(m, c.seed, stream) : noiseless(c.seed, stream);
    Trajectory tr = simulate(m, simulation_settings(c), noise);
    p.phases = relative_phase(tr, c.analysis.amplitude_floor);
    if (c.full_output) p.trajectory = std::move(tr);
    return p;
}

inline JobProduct mcwf_job(CellWork& w, std::uint64_t k, std::uint64_t stream) {
    const RunConfig& c = w.spec->config;
    std::call_once(w.ops_once, [&] {
        try {
            mcwf::FockSpace space{c.mcwf.n_opt, c.mcwf.n_mech};
            w.ops = std::make_shared<mcwf::OperatorSet>(mcwf::build_operators(space, c.dimer(), c.mcwf.dimension_cap));
        } catch (const std::exception& e) {
            w.ops_error = e.what();
        }
    });
    if (!w.ops) throw std::runtime_error(w.ops_error);
    JobProduct p;
    auto rs = mcwf_settings(c);
    auto rec = mcwf::run_trajectory(*w.ops, mcwf::vacuum(w.ops->space), rs, c.seed, stream);
    rec.index = k;
    p.phases = mcwf_phase_series(rec, rs, c.burn_in);
    p.quantum = std::move(rec);
    return p;
}

}  // namespace detail

/// Reduces the products of a cell into its row and files. Throws on engine errors.
inline CellOutput reduce_cell(const CellSpec& cell, std::vector<detail::JobProduct>& jobs) {
    using io::fmt;
    const RunConfig& c = cell.config;
    CellOutput out;
    for (const auto& j : jobs)
        if (!j.error.empty()) throw std::runtime_error(j.error);
    switch (c.engine) {
        case Engine::langevin: {
            std::vector<PhaseSeries> series;
            for (auto& j : jobs) series.push_back(std::move(j.phases));
            auto s = summarize_phases(series, c.analysis, c.dimer());
            out.row = std::move(s.row);
            out.files.push_back({"histogram.csv", io::histogram_csv(s.histogram)});
            out.files.push_back({"residence.csv", io::residence_csv(s.dwells)});
            for (std::size_t k = 0; k < jobs.size(); ++k) {
                if (!jobs[k].trajectory) continue;
                std::string idx = std::to_string(k);
                idx = std::string(idx.size() < 3 ? 3 - idx.size() : 0, '0') + idx;
                json extra = {{"seed", c.seed}, {"stream", cell.linear * c.n_traj + k}};
                out.files.push_back({"trajectory_" + idx + ".csv", io::trajectory_csv(*jobs[k].trajectory, extra)});
            }
            break;
        }
        case Engine::mcwf: {
            std::vector<PhaseSeries> series;
            std::vector<mcwf::TrajectoryRecord> recs;
            for (auto& j : jobs) {
                series.push_back(std::move(j.phases));
                recs.push_back(std::move(*j.quantum));
            }
            auto rs = mcwf_settings(c);
            std::string jumps = c.full_output ? io::jumps_csv(recs) : "";
            auto e = mcwf::reduce_ensemble(std::move(recs), rs);
            auto s = summarize_phases(series, c.analysis, c.dimer());
            out.row = std::move(s.row);
            double na1 = 0, nb1 = 0, nb2 = 0, rc = 0, ic = 0;
            std::size_t used = 0;
            for (std::size_t i = 0; i < e.times.size(); ++i) {
                if (e.times[i] < c.burn_in) continue;
                na1 += e.n_a1.mean[i];
                nb1 += e.n_b1.mean[i];
                nb2 += e.n_b2.mean[i];
                rc += e.re_c.mean[i];
                ic += e.im_c.mean[i];
                ++used;
            }
            double u = used ? static_cast<double>(used) : 1.0;
            out.row["n_a1"] = fmt(na1 / u);
            out.row["n_b1"] = fmt(nb1 / u);
            out.row["n_b2"] = fmt(nb2 / u);
            out.row["re_c"] = fmt(rc / u);
            out.row["im_c"] = fmt(ic / u);
            out.row["total_jumps"] = std::to_string(e.total_jumps);
            out.row["max_leakage"] = fmt(e.max_leakage);
            out.row["truncation_unsafe"] = e.truncation_unsafe ? "1" : "0";
            out.files.push_back({"observables.csv", io::observables_csv(e)});
            out.files.push_back({"histogram.csv", io::histogram_csv(s.histogram)});
            out.files.push_back({"residence.csv", io::residence_csv(s.dwells)});
            if (c.full_output) out.files.push_back({"jumps.csv", jumps});
            break;
        }
        case Engine::phase_model: {
            const auto& p = c.phase_model;
            auto cls = effective::classify_regime(p, c.phase_grid);
            std::string stable;
            for (const auto& f : cls.fixed_points)
                if (f.stable) stable += (stable.empty() ? "" : ";") + fmt(f.phi);
            out.row["delta_omega"] = fmt(p.delta_omega);
            out.row["s1"] = fmt(p.s1);
            out.row["s2"] = fmt(p.s2);
            out.row["regime"] = effective::to_string(cls.regime);
            out.row["stable_phases"] = stable;
            out.row["marginal"] = cls.marginal ? "1" : "0";
            if (!(p.delta_omega == 0 && p.s1 == 0 && p.s2 == 0))
                out.files.push_back({"potential.csv", io::potential_csv(effective::effective_potential(p, c.phase_grid))});
            out.files.push_back({"fixed_points.csv", io::fixed_points_csv(cls)});
            break;
        }
        case Engine::noise_budget: {
            double n = c.n_photons ? *c.n_photons : noise::noiseless_photons(c.cell);
            auto b = noise::budget(c.cell, n);
            out.row["n_photons"] = fmt(n);
            out.row["s_sn_norm"] = fmt(b.s_sn_norm);
            out.row["s_th_norm"] = fmt(b.s_th_norm);
            out.row["n_th_star"] = fmt(b.n_th_star);
            out.row["cooperativity"] = fmt(b.cooperativity);
            out.row["half_cooperativity"] = fmt(0.5 * b.cooperativity);
            out.row["resolved_sideband"] = b.resolved_sideband ? "1" : "0";
            out.files.push_back({"budget.json", io::dump(noise::to_json(b))});
            break;
        }
        case Engine::threshold_scan: {
            auto probe = probe_limit_cycle(c.cell, c.threshold.t_settle, c.threshold.t_window, c.dt,
                                           c.threshold.energy_floor);
            out.row["delta"] = fmt(c.cell.delta);
            out.row["alpha_l"] = fmt(c.cell.alpha_l);
            out.row["oscillation_energy"] = fmt(probe.oscillation_energy);
            out.row["mean_photons"] = fmt(probe.mean_photons);
            out.row["limit_cycle"] = probe.limit_cycle ? "1" : "0";
            break;
        }
    }
    return out;
}

/// Summary row with grid and provenance columns filled in.
inline std::vector<std::string> full_row(const RunConfig& base, const CellSpec& cell, const Row& engine_row,
                                         const std::string& status, const std::string& error) {
    Row r = engine_row;
    r["cell"] = cell.name;
    static const char* idx[] = {"i", "j"};
    for (std::size_t k = 0; k < cell.index.size(); ++k) {
        r[idx[k]] = std::to_string(cell.index[k]);
        r[base.axes[k].name] = io::fmt(cell.coords[k]);
    }
    bool st = stochastic(base.engine);
    r["seed"] = std::to_string(base.seed);
    r["stream_first"] = std::to_string(st ? cell.linear * base.n_traj : 0);
    r["stream_count"] = std::to_string(st ? base.n_traj : 0);
    r["status"] = status;
    r["error"] = error;
    std::vector<std::string> out;
    for (const auto& h : summary_columns(base)) {
        auto it = r.find(h);
        out.push_back(it == r.end() ? "" : it->second);
    }
    return out;
}

struct RunOptions {
    unsigned workers = 0;             // 0: worker_count()
    std::size_t max_cells = 0;        // stop after this many new cells (0: all); models an interruption
    std::ostream* log = nullptr;
};

struct RunReport {
    fs::path output;
    std::size_t cells = 0;
    std::size_t computed = 0;
    std::size_t resumed = 0;
    std::size_t failed = 0;
    bool complete = false;
    io::Table summary;
};

inline fs::path cell_file(const fs::path& out, const CellSpec& cell, const std::string& suffix = "csv") {
    return out / "cells" / (cell.name + "." + suffix);
}

/// A cell counts as done when its row file exists, parses, and reports status ok.
inline std::optional<std::vector<std::string>> load_done_cell(const fs::path& out, const RunConfig& c,
                                                              const CellSpec& cell) {
    fs::path f = cell_file(out, cell);
    if (!fs::exists(f)) return std::nullopt;
    try {
        io::Table t = io::read_csv(f);
        if (t.header != summary_columns(c) || t.rows.size() != 1) return std::nullopt;
        if (t.text(0, "status") != "ok") return std::nullopt;
        return t.rows[0];
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline json manifest_json(const RunConfig& c, const std::vector<CellSpec>& cells,
                          const std::vector<std::optional<std::vector<std::string>>>& rows, bool complete) {
    json m;
    m["software"] = kSoftwareName;
    m["version"] = kSoftwareVersion;
    m["engine"] = to_string(c.engine);
    m["seed"] = c.seed;
    m["n_traj"] = stochastic(c.engine) ? c.n_traj : 0;
    m["rng"] = "philox4x32-10, key = (seed, stream)";
    json axes = json::array();
    for (const auto& a : c.axes)
        axes.push_back({{"name", a.name}, {"points", a.points}, {"scale", a.log ? "log" : "linear"}});
    m["axes"] = axes;
    m["complete"] = complete;
    auto cols = summary_columns(c);
    auto col = [&](const char* name) { return std::find(cols.begin(), cols.end(), name) - cols.begin(); };
    json list = json::array();
    std::size_t failed = 0, missing = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        json e;
        e["cell"] = cells[i].name;
        e["index"] = cells[i].index;
        json coords = json::object();
        for (std::size_t k = 0; k < c.axes.size(); ++k) coords[c.axes[k].name] = cells[i].coords[k];
        e["coords"] = coords;
        bool st = stochastic(c.engine);
        e["seed"] = c.seed;
        e["stream_first"] = st ? cells[i].linear * c.n_traj : 0;
        e["stream_count"] = st ? c.n_traj : 0;
        if (rows[i]) {
            e["status"] = (*rows[i])[static_cast<std::size_t>(col("status"))];
            const auto& err = (*rows[i])[static_cast<std::size_t>(col("error"))];
            if (!err.empty()) e["error"] = err;
            if (e["status"] != "ok") ++failed;
        } else {
            e["status"] = "pending";
            ++missing;
        }
        list.push_back(e);
    }
    m["failed_cells"] = failed;
    m["pending_cells"] = missing;
    m["cells"] = list;
    return m;
}

/// Runs every cell of `c` not already on disk, then writes summary.csv and
/// manifest.json. An output directory holding a different config is refused.
inline RunReport run(const RunConfig& c, const RunOptions& opt = {}) {
    RunReport rep;
    rep.output = c.output;
    const fs::path out = c.output;
    fs::create_directories(out / "cells");
    const std::string snap = io::dump(c.snapshot);
    const fs::path snap_file = out / "config-snapshot.json";
    if (fs::exists(snap_file)) {
        if (io::read_text(snap_file) != snap)
            throw std::runtime_error("output directory " + out.string() +
                                     " holds a run with a different configuration");
    } else {
        io::atomic_write(snap_file, snap);
    }

    auto cells = grid_cells(c);
    rep.cells = cells.size();
    std::vector<std::optional<std::vector<std::string>>> rows(cells.size());
    std::vector<const CellSpec*> todo;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        rows[i] = load_done_cell(out, c, cells[i]);
        if (rows[i])
            ++rep.resumed;
        else
            todo.push_back(&cells[i]);
    }
    if (opt.max_cells && todo.size() > opt.max_cells) todo.resize(opt.max_cells);

    const std::uint64_t per_cell = stochastic(c.engine) ? c.n_traj : 1;
    std::vector<std::unique_ptr<detail::CellWork>> work;
    for (const auto* s : todo) {
        auto w = std::make_unique<detail::CellWork>();
        w->spec = s;
        w->jobs.resize(per_cell);
        w->remaining = per_cell;
        work.push_back(std::move(w));
    }

    std::mutex log_mutex;
    auto finish_cell = [&](detail::CellWork& w) {
        const CellSpec& cell = *w.spec;
        std::vector<std::string> row;
        try {
            CellOutput co = reduce_cell(cell, w.jobs);
            for (const auto& [suffix, content] : co.files) io::atomic_write(cell_file(out, cell, suffix), content);
            row = full_row(c, cell, co.row, "ok", "");
        } catch (const std::exception& e) {
            row = full_row(c, cell, {}, "failed", e.what());
        }
        io::Table t;
        t.header = summary_columns(c);
        t.rows.push_back(row);
        io::atomic_write(cell_file(out, cell), io::to_csv(t));
        rows[cell.linear] = row;
        w.jobs.clear();
        w.jobs.shrink_to_fit();
        w.ops.reset();
        if (opt.log) {
            std::lock_guard lock(log_mutex);
            *opt.log << cell.name << ": " << row[summary_columns(c).size() - 2] << "\n";
        }
    };

    const std::size_t n_jobs = work.size() * per_cell;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t j = next.fetch_add(1);
            if (j >= n_jobs) return;
            auto& w = *work[j / per_cell];
            std::uint64_t k = j % per_cell;
            std::uint64_t stream = w.spec->linear * per_cell + k;
            auto& prod = w.jobs[k];
            try {
                switch (c.engine) {
                    case Engine::langevin: prod = detail::langevin_job(*w.spec, stream); break;
                    case Engine::mcwf: prod = detail::mcwf_job(w, k, stream); break;
                    default: break;  // single-job engines compute in reduce_cell
                }
            } catch (const std::exception& e) {
                prod.error = e.what();
            }
            if (w.remaining.fetch_sub(1) == 1) finish_cell(w);
        }
    };
    unsigned workers = opt.workers ? opt.workers : worker_count();
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n_jobs, 1)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    rep.computed = todo.size();

    rep.summary.header = summary_columns(c);
    bool complete = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!rows[i]) {
            complete = false;
            continue;
        }
        rep.summary.rows.push_back(*rows[i]);
        if ((*rows[i])[rep.summary.column("status")] != "ok") ++rep.failed;
    }
    rep.complete = complete;
    io::atomic_write(out / "summary.csv", io::to_csv(rep.summary));
    io::atomic_write(out / "manifest.json", io::dump(manifest_json(c, cells, rows, complete)));
    return rep;
}

// ------------------------------------------------------------- analyze

/// Histogram, residence statistics and a one-row summary for trajectory CSVs
/// produced by the Langevin engine (all files must share one parameter set).
inline io::Table analyze_trajectories(const std::vector<fs::path>& files, const AnalysisSettings& a,
                                      const fs::path& out) {
    if (files.empty()) throw std::invalid_argument("no trajectory files given");
    std::vector<PhaseSeries> series;
    std::optional<DimerParams> params;
    for (const auto& f : files) {
        auto lt = io::read_trajectory(f);
        if (params && !(*params == lt.trajectory.params))
            throw io::FormatError(f.string(), "parameters differ from " + files.front().string());
        params = lt.trajectory.params;
        series.push_back(relative_phase(lt.trajectory, a.amplitude_floor));
    }
    auto s = summarize_phases(series, a, *params);
    io::atomic_write(out / "histogram.csv", io::histogram_csv(s.histogram));
    io::atomic_write(out / "residence.csv", io::residence_csv(s.dwells));
    io::Table t;
    t.header = engine_columns(Engine::langevin);
    t.header.insert(t.header.begin(), "files");
    std::vector<std::string> row{std::to_string(files.size())};
    for (std::size_t i = 1; i < t.header.size(); ++i) row.push_back(s.row[t.header[i]]);
    t.rows.push_back(row);
    io::atomic_write(out / "analysis.csv", io::to_csv(t));
    if (series.size() == 1) io::atomic_write(out / "phase.csv", io::phase_trace_csv(series.front()));
    return t;
}

}  // namespace optosync::cli
