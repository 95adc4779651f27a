#pragma once

// Semi-classical Langevin dynamics of the optomechanical dimer.
//
//   d alpha_j = [(i Delta - kappa/2) alpha_j + i g alpha_j (beta_j + beta_j*) - i alpha_L] dt
//               - sqrt(kappa) dW_opt,j
//   d beta_j  = [-(i Omega_j + Gamma/2) beta_j + i g |alpha_j|^2 + coupling_j] dt
//               - sqrt(Gamma) dW_mech,j
//
// with coupling_1 = i K beta_2 (rotating-wave form) or i K (beta_2 + beta_2*).
// In the rescaled picture (alpha~ = g0 alpha, beta~ = g0 beta) g = 1 and the drive
// is g0*alpha_L; g0 then only sets the noise strength.
//
// The noise is additive, so Ito and Stratonovich readings coincide. Each step is a
// stochastic Heun step: Euler predictor including the noise increment, trapezoidal
// corrector for the drift, and the same increment added once to the result.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "optosync/params.hpp"
#include "optosync/rng.hpp"

namespace optosync {

using cplx = std::complex<double>;

/// Thrown when the integrator produces a non-finite amplitude.
class StiffnessError : public std::runtime_error {
public:
    explicit StiffnessError(std::uint64_t step)
        : std::runtime_error("non-finite amplitude at step " + std::to_string(step) +
                             " (dt too large or parameters stiff)"),
          step_(step) {}
    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t step_;
};

/// Invalid integration settings (time step, durations, strides).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SemiclassicalState {
    cplx alpha1{}, beta1{}, alpha2{}, beta2{};

    bool finite() const noexcept {
        auto ok = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
        return ok(alpha1) && ok(beta1) && ok(alpha2) && ok(beta2);
    }

    friend bool operator==(const SemiclassicalState&, const SemiclassicalState&) = default;
};

inline SemiclassicalState operator+(const SemiclassicalState& a, const SemiclassicalState& b) {
    return {a.alpha1 + b.alpha1, a.beta1 + b.beta1, a.alpha2 + b.alpha2, a.beta2 + b.beta2};
}

inline SemiclassicalState operator*(double s, const SemiclassicalState& a) {
    return {s * a.alpha1, s * a.beta1, s * a.alpha2, s * a.beta2};
}

enum class Scaling { raw, rescaled };

/// The dimer reduced to the numbers the Langevin right-hand side needs.
struct LangevinModel {
    struct Cell {
        double delta;
        double omega;
        double kappa;
        double gamma;
        double coupling;  // g0 (raw) or 1 (rescaled)
        double drive;     // alpha_L (raw) or g0*alpha_L (rescaled)
    };
    Cell cell1;
    Cell cell2;
    double k = 0.0;
    bool rwa = true;
    Scaling scaling = Scaling::raw;
    double g0 = 0.0;         // physical g0; sets the rescaled noise strength
    double n_th = 0.0;
    DimerParams snapshot;    // parameters the model was built from
};

inline LangevinModel raw_model(const DimerParams& d) {
    validate(d);
    auto cell = [](const OmParams& c) {
        return LangevinModel::Cell{c.delta, c.omega, c.kappa, c.gamma, c.g0, c.alpha_l};
    };
    if (d.cell1.n_th != d.cell2.n_th)
        throw ParameterError("cell2.n_th", "both mechanical baths must share one occupancy");
    return {cell(d.cell1), cell(d.cell2), d.coupling_k, d.rwa_coupling, Scaling::raw, d.cell1.g0,
            d.cell1.n_th, d};
}

/// Rescaled equations at a point of the classical-to-quantum crossover.
inline LangevinModel rescaled_model(const CrossoverPoint& cp) {
    const DimerParams& d = cp.params;
    validate(d);
    if (d.cell1.n_th != d.cell2.n_th)
        throw ParameterError("cell2.n_th", "both mechanical baths must share one occupancy");
    auto cell = [&](const OmParams& c) {
        return LangevinModel::Cell{c.delta, c.omega, c.kappa, c.gamma, 1.0, cp.rescaled_drive};
    };
    return {cell(d.cell1), cell(d.cell2), d.coupling_k, d.rwa_coupling, Scaling::rescaled,
            cp.noiseless ? 0.0 : d.cell1.g0, d.cell1.n_th, d};
}

namespace detail {
inline cplx times_i(cplx z) noexcept { return {-z.imag(), z.real()}; }
inline double abs2(cplx z) noexcept { return z.real() * z.real() + z.imag() * z.imag(); }
// (a + i b) z without the NaN-recovery path of the generic complex product.
inline cplx mul(double a, double b, cplx z) noexcept {
    return {a * z.real() - b * z.imag(), a * z.imag() + b * z.real()};
}
}  // namespace detail

/// Deterministic right-hand side.
inline SemiclassicalState drift(const SemiclassicalState& s, const LangevinModel& m) noexcept {
    using detail::abs2;
    using detail::mul;
    using detail::times_i;
    auto optical = [](const LangevinModel::Cell& c, cplx a, cplx b) {
        double x = 2.0 * b.real();  // beta + beta*
        return mul(-0.5 * c.kappa, c.delta + c.coupling * x, a) - cplx{0.0, c.drive};
    };
    auto mechanical = [&](const LangevinModel::Cell& c, cplx a, cplx b, cplx other) {
        cplx partner = m.rwa ? other : cplx{2.0 * other.real(), 0.0};
        return mul(-0.5 * c.gamma, -c.omega, b) + cplx{0.0, c.coupling * abs2(a)} +
               times_i(m.k * partner);
    };
    return {optical(m.cell1, s.alpha1, s.beta1), mechanical(m.cell1, s.alpha1, s.beta1, s.beta2),
            optical(m.cell2, s.alpha2, s.beta2), mechanical(m.cell2, s.alpha2, s.beta2, s.beta1)};
}

inline SemiclassicalState drift(const SemiclassicalState& s, const DimerParams& p) {
    return drift(s, raw_model(p));
}

/// Noise strengths are the delta-correlator weights: <a_in(t) a_in*(t')> = strength * delta(t-t').
struct NoiseSpec {
    double optical_strength = 0.5;
    double mechanical_strength = 0.5;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
};

/// Quantum (and thermal) noise appropriate for `m`: 1/2 and n_th + 1/2, times g0^2
/// in the rescaled picture.
inline NoiseSpec noise_for(const LangevinModel& m, std::uint64_t seed, std::uint64_t stream_id) {
    double scale = m.scaling == Scaling::rescaled ? m.g0 * m.g0 : 1.0;
    return {0.5 * scale, (m.n_th + 0.5) * scale, seed, stream_id};
}

inline NoiseSpec noiseless(std::uint64_t seed = 0, std::uint64_t stream_id = 0) {
    return {0.0, 0.0, seed, stream_id};
}

/// Noise increments for one step, already multiplied by -sqrt(rate).
inline SemiclassicalState draw_increment(const LangevinModel& m, const NoiseSpec& noise, double dt,
                                         Philox4x32& rng) noexcept {
    double var_opt = 0.5 * noise.optical_strength * dt;  // per quadrature
    double var_mech = 0.5 * noise.mechanical_strength * dt;
    if (var_opt == 0.0 && var_mech == 0.0) return {};
    cplx w_a1 = rng.complex_normal(var_opt);
    cplx w_b1 = rng.complex_normal(var_mech);
    cplx w_a2 = rng.complex_normal(var_opt);
    cplx w_b2 = rng.complex_normal(var_mech);
    return {-std::sqrt(m.cell1.kappa) * w_a1, -std::sqrt(m.cell1.gamma) * w_b1,
            -std::sqrt(m.cell2.kappa) * w_a2, -std::sqrt(m.cell2.gamma) * w_b2};
}

/// One Heun step with a pre-drawn noise increment.
inline SemiclassicalState heun_step(const SemiclassicalState& s, const LangevinModel& m, double dt,
                                    const SemiclassicalState& kick) noexcept {
    SemiclassicalState f0 = drift(s, m);
    SemiclassicalState pred = s + dt * f0 + kick;
    SemiclassicalState f1 = drift(pred, m);
    return s + (0.5 * dt) * (f0 + f1) + kick;
}

/// One stochastic Heun step. `step_index` only labels a StiffnessError.
inline SemiclassicalState step(const SemiclassicalState& s, const LangevinModel& m, double dt,
                               const NoiseSpec& noise, Philox4x32& rng,
                               std::uint64_t step_index = 0) {
    if (!(dt > 0)) throw ConfigError("dt must be > 0");
    SemiclassicalState out = heun_step(s, m, dt, draw_increment(m, noise, dt, rng));
    if (!out.finite()) throw StiffnessError(step_index);
    return out;
}

/// Largest admissible time step for `m`: 2 pi / (40 max(Omega, |Delta| + kappa)).
inline double max_time_step(const LangevinModel& m) {
    double fastest = 0.0;
    for (const auto* c : {&m.cell1, &m.cell2})
        fastest = std::max({fastest, c->omega, std::abs(c->delta) + c->kappa});
    return 2.0 * std::numbers::pi / (40.0 * fastest);
}

inline constexpr double kPeriod = 2.0 * std::numbers::pi;

struct InitialCondition {
    /// Magnitude of the initial mechanical amplitudes; negative selects the
    /// default (0.1 raw, 0.01 rescaled).
    double beta_magnitude = -1.0;
    /// If set, initial phases are these values instead of random draws.
    bool fixed_phases = false;
    double phase1 = 0.0;
    double phase2 = 0.0;
};

struct SimulationSettings {
    double t_total = 4000.0 * kPeriod;
    double dt = kPeriod / 200.0;
    double burn_in = 2000.0 * kPeriod;
    std::uint64_t sample_stride = 50;  // integration steps between stored samples
    InitialCondition initial{};
};

struct Trajectory {
    std::vector<double> times;
    std::vector<SemiclassicalState> states;
    std::uint64_t sample_stride = 1;
    double dt = 0.0;
    Scaling scaling = Scaling::raw;
    double g0 = 0.0;
    DimerParams params;
};

inline void check_settings(const LangevinModel& m, const SimulationSettings& s) {
    if (!(s.dt > 0)) throw ConfigError("dt must be > 0");
    if (!(s.burn_in >= 0)) throw ConfigError("burn_in must be >= 0");
    if (!(s.burn_in < s.t_total)) throw ConfigError("burn_in must be < t_total");
    if (s.sample_stride < 1) throw ConfigError("sample_stride must be >= 1");
    double limit = max_time_step(m);
    if (s.dt > limit * (1.0 + 1e-12))
        throw ConfigError("dt = " + std::to_string(s.dt) + " does not resolve the fastest scale (max " +
                          std::to_string(limit) + ")");
}

/// Initial state: optical amplitudes zero, mechanical amplitudes small with
/// (by default) uniformly random phases drawn from the trajectory's stream.
inline SemiclassicalState initial_state(const LangevinModel& m, const InitialCondition& ic,
                                        Philox4x32& rng) {
    double mag = ic.beta_magnitude >= 0 ? ic.beta_magnitude
                                        : (m.scaling == Scaling::rescaled ? 0.01 : 0.1);
    double p1 = ic.phase1, p2 = ic.phase2;
    if (!ic.fixed_phases) {
        p1 = 2.0 * std::numbers::pi * rng.uniform();
        p2 = 2.0 * std::numbers::pi * rng.uniform();
    }
    return {{}, std::polar(mag, p1), {}, std::polar(mag, p2)};
}

/// Integrates from t = 0 to t_total and stores every `sample_stride`-th state with
/// t >= burn_in. Deterministic in (model, settings, noise).
inline Trajectory simulate(const LangevinModel& m, const SimulationSettings& settings,
                           const NoiseSpec& noise) {
    check_settings(m, settings);
    Philox4x32 rng(noise.seed, noise.stream_id);
    SemiclassicalState s = initial_state(m, settings.initial, rng);

    const auto n_steps = static_cast<std::uint64_t>(std::llround(settings.t_total / settings.dt));
    const auto first_sample = static_cast<std::uint64_t>(std::ceil(settings.burn_in / settings.dt - 1e-9));

    Trajectory traj;
    traj.sample_stride = settings.sample_stride;
    traj.dt = settings.dt;
    traj.scaling = m.scaling;
    traj.g0 = m.g0;
    traj.params = m.snapshot;
    traj.times.reserve((n_steps - first_sample) / settings.sample_stride + 1);
    traj.states.reserve(traj.times.capacity());

    for (std::uint64_t n = 0;; ++n) {
        if (n >= first_sample && (n - first_sample) % settings.sample_stride == 0) {
            traj.times.push_back(static_cast<double>(n) * settings.dt);
            traj.states.push_back(s);
        }
        if (n == n_steps) break;
        s = heun_step(s, m, settings.dt, draw_increment(m, noise, settings.dt, rng));
        if (!s.finite()) throw StiffnessError(n + 1);
    }
    return traj;
}

/// Converts a rescaled trajectory back to physical amplitudes (divides by g0).
inline Trajectory untilde(Trajectory t, double g0) {
    if (t.scaling != Scaling::rescaled) return t;
    if (!(g0 > 0)) throw ParameterError("g0", "must be > 0 to undo the rescaling");
    for (auto& s : t.states) s = (1.0 / g0) * s;
    t.scaling = Scaling::raw;
    t.g0 = g0;
    return t;
}

/// Result of a noiseless single-cell integration.
struct LimitCycleProbe {
    double oscillation_energy = 0.0;  // time-averaged |beta - <beta>|^2 over the last window
    double mean_photons = 0.0;        // time-averaged |alpha|^2 over the same window
    bool limit_cycle = false;
};

/// Integrates one noiseless cell (K = 0) and reports whether it settles on a limit
/// cycle: the oscillatory part of the mechanical energy stays above `energy_floor`.
inline LimitCycleProbe probe_limit_cycle(const OmParams& cell, double t_settle = 2000.0 * kPeriod,
                                         double t_window = 200.0 * kPeriod, double dt = kPeriod / 200.0,
                                         double energy_floor = 1e-6) {
    DimerParams d = make_identical_dimer(cell, 0.0, true);
    LangevinModel m = raw_model(d);
    SimulationSettings st;
    st.dt = std::min(dt, max_time_step(m));
    st.burn_in = t_settle;
    st.t_total = t_settle + t_window;
    st.sample_stride = 1;
    st.initial.fixed_phases = true;
    Trajectory tr = simulate(m, st, noiseless());

    cplx mean_b{};
    double photons = 0.0;
    for (const auto& s : tr.states) {
        mean_b += s.beta1;
        photons += detail::abs2(s.alpha1);
    }
    const double n = static_cast<double>(tr.states.size());
    mean_b /= n;
    double energy = 0.0;
    for (const auto& s : tr.states) energy += detail::abs2(s.beta1 - mean_b);
    LimitCycleProbe out;
    out.oscillation_energy = energy / n;
    out.mean_photons = photons / n;
    out.limit_cycle = out.oscillation_energy > energy_floor;
    return out;
}

/// Self-oscillation map over a grid of (alpha_L, Delta); row index follows
/// `deltas`, column index follows `drives`. Other parameters come from `base`.
inline std::vector<std::vector<bool>> selfosc_threshold_scan(const OmParams& base,
                                                             const std::vector<double>& drives,
                                                             const std::vector<double>& deltas,
                                                             double t_settle = 2000.0 * kPeriod) {
    std::vector<std::vector<bool>> grid(deltas.size(), std::vector<bool>(drives.size(), false));
    for (std::size_t i = 0; i < deltas.size(); ++i)
        for (std::size_t j = 0; j < drives.size(); ++j) {
            OmParams c = base;
            c.delta = deltas[i];
            c.alpha_l = drives[j];
            grid[i][j] = probe_limit_cycle(c, t_settle).limit_cycle;
        }
    return grid;
}

}  // namespace optosync
