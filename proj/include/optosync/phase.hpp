#pragma once

// Relative-phase analysis: extraction, distribution, synchronization measure and
// residence times of the 0- and pi-locked states.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optosync/sde.hpp"
#include "optosync/stats.hpp"

namespace optosync {

/// Raised when a series cannot support the requested analysis.
class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Maps any angle onto (-pi, pi].
inline double wrap_phase(double x) noexcept {
    double y = std::remainder(x, 2.0 * std::numbers::pi);
    return y <= -std::numbers::pi ? y + 2.0 * std::numbers::pi : y;
}

struct PhaseSeries {
    std::vector<double> times;
    std::vector<double> delta_phi;   // wrapped to (-pi, pi]
    std::vector<std::uint8_t> defined;

    std::size_t size() const noexcept { return times.size(); }
    std::size_t defined_count() const noexcept {
        return static_cast<std::size_t>(std::count(defined.begin(), defined.end(), std::uint8_t{1}));
    }
    /// Defined samples only.
    std::vector<double> defined_values() const {
        std::vector<double> out;
        out.reserve(size());
        for (std::size_t i = 0; i < size(); ++i)
            if (defined[i]) out.push_back(delta_phi[i]);
        return out;
    }
};

/// Builds a series from raw (unwrapped) phases; every sample is defined.
inline PhaseSeries make_phase_series(std::vector<double> times, std::span<const double> raw) {
    if (times.size() != raw.size()) throw AnalysisError("times and phases differ in length");
    PhaseSeries ps;
    ps.times = std::move(times);
    ps.delta_phi.reserve(raw.size());
    for (double x : raw) ps.delta_phi.push_back(wrap_phase(x));
    ps.defined.assign(raw.size(), 1);
    return ps;
}

/// delta_phi = arg(beta_2 beta_1*). Samples where either |beta_j| is below
/// `amplitude_floor` are flagged undefined; more than half undefined is an error.
inline PhaseSeries relative_phase(const Trajectory& traj, double amplitude_floor = 1e-6) {
    PhaseSeries ps;
    ps.times = traj.times;
    ps.delta_phi.resize(traj.states.size());
    ps.defined.resize(traj.states.size());
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const auto& s = traj.states[i];
        bool ok = std::abs(s.beta1) > amplitude_floor && std::abs(s.beta2) > amplitude_floor;
        ps.defined[i] = ok ? 1 : 0;
        ps.delta_phi[i] = ok ? wrap_phase(std::arg(s.beta2 * std::conj(s.beta1))) : 0.0;
    }
    if (2 * ps.defined_count() < ps.size())
        throw AnalysisError("relative phase undefined for more than half of the samples");
    return ps;
}

struct PhaseHistogram {
    std::vector<double> edges;    // n_bins + 1 values from -pi to pi
    std::vector<double> density;  // integrates to 1
    std::size_t samples = 0;

    std::size_t bins() const noexcept { return density.size(); }
    double width() const noexcept { return edges[1] - edges[0]; }
    double center(std::size_t i) const noexcept { return 0.5 * (edges[i] + edges[i + 1]); }
    /// Probability mass in bins whose centers lie within `radius` of `phi` (circularly).
    double mass_near(double phi, double radius) const {
        double m = 0.0;
        for (std::size_t i = 0; i < bins(); ++i)
            if (std::abs(wrap_phase(center(i) - phi)) <= radius) m += density[i] * width();
        return m;
    }
};

/// Index of the (-pi, pi] bin holding x; bins are (e_k, e_{k+1}].
inline std::size_t phase_bin(double x, std::size_t n_bins) {
    double w = 2.0 * std::numbers::pi / static_cast<double>(n_bins);
    auto k = static_cast<long long>(std::ceil((x + std::numbers::pi) / w)) - 1;
    return static_cast<std::size_t>(std::clamp<long long>(k, 0, static_cast<long long>(n_bins) - 1));
}

inline PhaseHistogram histogram(const PhaseSeries& ps, std::size_t n_bins = 64) {
    if (n_bins < 1) throw AnalysisError("n_bins must be >= 1");
    const std::size_t n = ps.defined_count();
    if (n < 10 * n_bins)
        throw AnalysisError("histogram needs at least " + std::to_string(10 * n_bins) +
                            " defined samples, got " + std::to_string(n));
    PhaseHistogram h;
    h.samples = n;
    h.edges.resize(n_bins + 1);
    for (std::size_t i = 0; i <= n_bins; ++i)
        h.edges[i] = -std::numbers::pi + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_bins);
    h.edges.back() = std::numbers::pi;
    std::vector<std::size_t> counts(n_bins, 0);
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (ps.defined[i]) ++counts[phase_bin(ps.delta_phi[i], n_bins)];
    h.density.resize(n_bins);
    const double w = h.width();
    for (std::size_t i = 0; i < n_bins; ++i)
        h.density[i] = static_cast<double>(counts[i]) / (static_cast<double>(n) * w);
    return h;
}

/// Local maxima of a circular histogram (strictly above the left neighbor,
/// at least the right one), returned as bin indices.
inline std::vector<std::size_t> local_maxima(const PhaseHistogram& h) {
    std::vector<std::size_t> out;
    const std::size_t n = h.bins();
    for (std::size_t i = 0; i < n; ++i) {
        double l = h.density[(i + n - 1) % n];
        double r = h.density[(i + 1) % n];
        if (h.density[i] > l && h.density[i] >= r) out.push_back(i);
    }
    return out;
}

struct SyncMeasure {
    double mean_cos = 0.0;
    double mean_sin = 0.0;
    double stderr_cos = 0.0;  // batch-means estimate
    double stderr_sin = 0.0;
    std::size_t samples = 0;
};

/// Time averages of cos(delta_phi) and sin(delta_phi) over defined samples.
inline SyncMeasure sync_measure(const PhaseSeries& ps) {
    std::vector<double> c, s;
    c.reserve(ps.size());
    s.reserve(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i)
        if (ps.defined[i]) {
            c.push_back(std::cos(ps.delta_phi[i]));
            s.push_back(std::sin(ps.delta_phi[i]));
        }
    if (c.empty()) throw AnalysisError("no defined samples");
    auto ec = stats::batch_mean_error(c);
    auto es = stats::batch_mean_error(s);
    return {ec.mean, es.mean, ec.stderr_, es.stderr_, c.size()};
}

/// The same measure reconstructed from a histogram (bin centers).
inline SyncMeasure sync_measure(const PhaseHistogram& h) {
    SyncMeasure m;
    for (std::size_t i = 0; i < h.bins(); ++i) {
        double p = h.density[i] * h.width();
        m.mean_cos += p * std::cos(h.center(i));
        m.mean_sin += p * std::sin(h.center(i));
    }
    m.samples = h.samples;
    return m;
}

// ---------------------------------------------------------------------------
// Residence times
// ---------------------------------------------------------------------------

enum class SyncState : std::uint8_t { zero = 0, pi = 1 };

inline const char* to_string(SyncState s) { return s == SyncState::zero ? "zero" : "pi"; }

struct ResidenceOptions {
    double period = 2.0 * std::numbers::pi;    // mechanical period 2 pi / Omega
    double hysteresis = std::numbers::pi / 8;  // half-width of the band around pi/2
    double debounce_periods = 2.0;             // shorter dwells are merged away
    double tau_min_periods = 5.0;              // cutoff of the exponential tail fit
    std::size_t min_switches = 20;

    /// Options for series produced from `d`. Below the mechanical amplitude
    /// relaxation time 2/Gamma dwell statistics still contain quick re-crossings,
    /// so the tail-fit cutoff is raised to at least that time.
    static ResidenceOptions for_params(const DimerParams& d) {
        ResidenceOptions o;
        double relax = 2.0 / std::min(d.cell1.gamma, d.cell2.gamma);
        o.tau_min_periods = std::max(o.tau_min_periods, relax / o.period);
        return o;
    }
};

struct DwellInterval {
    SyncState state;
    double start;
    double end;
    bool censored;  // touches either end of the series
    double duration() const noexcept { return end - start; }
};

struct ResidenceRecord {
    std::vector<DwellInterval> intervals;  // per series: disjoint, ordered, alternating
    std::size_t switch_count = 0;

    /// Mean residence times with the debounce dead time removed.
    double tau0_mean = std::numeric_limits<double>::quiet_NaN();
    double tau_pi_mean = std::numeric_limits<double>::quiet_NaN();
    double tau0_stderr = std::numeric_limits<double>::quiet_NaN();
    double tau_pi_stderr = std::numeric_limits<double>::quiet_NaN();
    bool dead_time_converged = false;

    /// Exponential tail fit of the observed (debounced) dwells above tau_min.
    double tau0_tail = std::numeric_limits<double>::quiet_NaN();
    double tau_pi_tail = std::numeric_limits<double>::quiet_NaN();
    std::size_t tail_count0 = 0;
    std::size_t tail_count_pi = 0;
    double tau_min = 0.0;

    /// Fraction of labeled time in each state (hysteresis labels, before debounce).
    double p0 = 0.0;
    double p_pi = 0.0;

    bool low_count = false;
    std::optional<SyncState> trapped_in;  // set when no switch occurred

    /// Durations of uncensored dwells in `s`.
    std::vector<double> dwell_times(SyncState s) const {
        std::vector<double> out;
        for (const auto& iv : intervals)
            if (iv.state == s && !iv.censored) out.push_back(iv.duration());
        return out;
    }
};

/// Hysteresis labels: 0-state below pi/2 - h, pi-state above pi/2 + h, otherwise
/// (and on undefined samples) the previous label persists. Leading samples before
/// the first decisive one take its label.
inline std::vector<SyncState> hysteresis_labels(const PhaseSeries& ps, double h) {
    const double lo = std::numbers::pi / 2 - h;
    const double hi = std::numbers::pi / 2 + h;
    std::vector<SyncState> out(ps.size(), SyncState::zero);
    std::optional<SyncState> cur;
    std::size_t first = ps.size();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (ps.defined[i]) {
            double a = std::abs(ps.delta_phi[i]);
            if (a < lo) cur = SyncState::zero;
            else if (a > hi) cur = SyncState::pi;
        }
        if (cur) {
            if (first == ps.size()) first = i;
            out[i] = *cur;
        }
    }
    if (first == ps.size()) throw AnalysisError("no sample outside the hysteresis band");
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(first), out[first]);
    return out;
}

namespace detail {

inline std::vector<DwellInterval> runs_of(const std::vector<double>& t, const std::vector<SyncState>& lab) {
    std::vector<DwellInterval> out;
    if (t.empty()) return out;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= t.size(); ++i) {
        if (i == t.size() || lab[i] != lab[start]) {
            double end = i == t.size() ? t.back() : t[i];
            out.push_back({lab[start], t[start], end, false});
            start = i;
        }
    }
    return out;
}

// Forward dead-time filter: dwells shorter than `dead` are absorbed into the
// preceding resolved dwell; leading short dwells join the first resolved one.
inline std::vector<DwellInterval> debounce(const std::vector<DwellInterval>& raw, double dead) {
    if (raw.size() <= 1) return raw;
    std::size_t first = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw[i].duration() >= dead) {
            first = i;
            break;
        }
    if (first == raw.size()) {
        auto longest = std::max_element(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
            return a.duration() < b.duration();
        });
        return {{longest->state, raw.front().start, raw.back().end, false}};
    }
    std::vector<DwellInterval> out;
    DwellInterval cur{raw[first].state, raw.front().start, raw[first].end, false};
    for (std::size_t i = first + 1; i < raw.size(); ++i) {
        if (raw[i].state == cur.state || raw[i].duration() < dead) {
            cur.end = raw[i].end;
        } else {
            out.push_back(cur);
            cur = raw[i];
        }
    }
    out.push_back(cur);
    return out;
}

// Mean observed dwells of a two-state process with exponential dwells (t0, tp)
// after a forward dead-time filter of length d:
//   E[A0]  = t0 e^{d/tp} + tp (e^{d/tp} - 1)
//   E[Api] = tp e^{d/t0} + t0 (e^{d/t0} - 1)
// Solved for (t0, tp) by damped Newton iteration.
struct DeadTimeSolution {
    double t0, tp, se0, sep;
    bool converged;
};

inline DeadTimeSolution invert_dead_time(double m0, double mp, double se_m0, double se_mp, double d) {
    double t0 = m0, tp = mp;
    auto residual = [&](double a, double b) {
        double ea = std::exp(d / b), eb = std::exp(d / a);
        return std::pair{a * ea + b * (ea - 1) - m0, b * eb + a * (eb - 1) - mp};
    };
    bool ok = false;
    double j11 = 1, j12 = 0, j21 = 0, j22 = 1;
    for (int it = 0; it < 200; ++it) {
        auto [f1, f2] = residual(t0, tp);
        double e1 = std::exp(d / tp), e2 = std::exp(d / t0);
        double de1 = -e1 * d / (tp * tp), de2 = -e2 * d / (t0 * t0);
        j11 = e1;
        j12 = (t0 + tp) * de1 + (e1 - 1);
        j21 = (t0 + tp) * de2 + (e2 - 1);
        j22 = e2;
        double det = j11 * j22 - j12 * j21;
        if (!std::isfinite(det) || det == 0) break;
        double s0 = (j22 * f1 - j12 * f2) / det;
        double s1 = (-j21 * f1 + j11 * f2) / det;
        double lam = 1.0;
        while (lam > 1e-6 && (t0 - lam * s0 <= 0 || tp - lam * s1 <= 0)) lam *= 0.5;
        t0 -= lam * s0;
        tp -= lam * s1;
        if (std::abs(s0) < 1e-12 * t0 && std::abs(s1) < 1e-12 * tp) {
            ok = true;
            break;
        }
    }
    auto [f1, f2] = residual(t0, tp);
    ok = ok || (std::abs(f1) < 1e-9 * m0 && std::abs(f2) < 1e-9 * mp);
    if (!ok) return {m0, mp, se_m0, se_mp, false};
    // Propagate the errors of the observed means through J^{-1}.
    double det = j11 * j22 - j12 * j21;
    double i11 = j22 / det, i12 = -j12 / det, i21 = -j21 / det, i22 = j11 / det;
    double se0 = std::sqrt(i11 * i11 * se_m0 * se_m0 + i12 * i12 * se_mp * se_mp);
    double sep = std::sqrt(i21 * i21 * se_m0 * se_m0 + i22 * i22 * se_mp * se_mp);
    return {t0, tp, se0, sep, true};
}

}  // namespace detail

/// Per-sample labels after hysteresis and debounce.
inline std::vector<SyncState> classify_states(const PhaseSeries& ps, const ResidenceOptions& opt = {}) {
    auto lab = hysteresis_labels(ps, opt.hysteresis);
    auto runs = detail::debounce(detail::runs_of(ps.times, lab), opt.debounce_periods * opt.period);
    std::size_t r = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        while (r + 1 < runs.size() && ps.times[i] >= runs[r + 1].start) ++r;
        lab[i] = runs[r].state;
    }
    return lab;
}

/// Dwell intervals and mean residence times of the 0- and pi-states, pooled over
/// independent series (trajectories). Each series contributes its own censored
/// first and last dwell.
inline ResidenceRecord residence_times(std::span<const PhaseSeries> series, const ResidenceOptions& opt = {}) {
    if (series.empty()) throw AnalysisError("no series to analyze");
    ResidenceRecord rec;
    const double dead = opt.debounce_periods * opt.period;
    std::size_t n0 = 0, npi = 0;
    std::optional<SyncState> only;
    bool mixed_trapping = false;
    for (const auto& ps : series) {
        if (ps.size() < 2) throw AnalysisError("series too short for residence analysis");
        auto lab = hysteresis_labels(ps, opt.hysteresis);
        for (std::size_t i = 0; i < ps.size(); ++i)
            if (ps.defined[i]) (lab[i] == SyncState::zero ? n0 : npi)++;
        auto iv = detail::debounce(detail::runs_of(ps.times, lab), dead);
        iv.front().censored = true;
        iv.back().censored = true;
        rec.switch_count += iv.size() - 1;
        if (iv.size() == 1) {
            if (only && *only != iv.front().state) mixed_trapping = true;
            only = iv.front().state;
        }
        rec.intervals.insert(rec.intervals.end(), iv.begin(), iv.end());
    }
    rec.p0 = static_cast<double>(n0) / static_cast<double>(n0 + npi);
    rec.p_pi = static_cast<double>(npi) / static_cast<double>(n0 + npi);
    rec.low_count = rec.switch_count < opt.min_switches;
    rec.tau_min = opt.tau_min_periods * opt.period;

    if (rec.switch_count == 0) {
        if (!mixed_trapping) {
            rec.trapped_in = only;
            double inf = std::numeric_limits<double>::infinity();
            (*only == SyncState::zero ? rec.tau0_mean : rec.tau_pi_mean) = inf;
        }
        return rec;
    }

    auto tail = [&](SyncState s, double& tau, std::size_t& count) {
        double sum = 0.0;
        count = 0;
        for (double d : rec.dwell_times(s))
            if (d > rec.tau_min) {
                sum += d - rec.tau_min;
                ++count;
            }
        if (count > 0) tau = sum / static_cast<double>(count);
    };
    tail(SyncState::zero, rec.tau0_tail, rec.tail_count0);
    tail(SyncState::pi, rec.tau_pi_tail, rec.tail_count_pi);

    auto d0 = rec.dwell_times(SyncState::zero);
    auto dp = rec.dwell_times(SyncState::pi);
    if (d0.empty() || dp.empty()) {
        rec.low_count = true;
        return rec;
    }
    auto m0 = stats::mean_error(d0);
    auto mp = stats::mean_error(dp);
    // A single uncensored dwell carries no spread; fall back to the mean itself.
    double se0 = d0.size() > 1 ? m0.stderr_ : m0.mean;
    double sep = dp.size() > 1 ? mp.stderr_ : mp.mean;
    auto sol = detail::invert_dead_time(m0.mean, mp.mean, se0, sep, dead);
    rec.tau0_mean = sol.t0;
    rec.tau_pi_mean = sol.tp;
    rec.tau0_stderr = sol.se0;
    rec.tau_pi_stderr = sol.sep;
    rec.dead_time_converged = sol.converged;
    return rec;
}

inline ResidenceRecord residence_times(const PhaseSeries& ps, const ResidenceOptions& opt = {}) {
    return residence_times(std::span<const PhaseSeries>(&ps, 1), opt);
}

}  // namespace optosync
