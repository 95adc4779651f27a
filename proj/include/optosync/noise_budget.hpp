#pragma once

// Comparison of optical shot noise and thermal noise acting on one mechanical mode.
//
// Force spectra are divided by (hbar g0 / x_zpf)^2, so with frequencies in units
// of Omega_1:
//   s_sn(w) = n/2 [kappa / ((kappa/2)^2 + (w + Delta)^2) + kappa / ((kappa/2)^2 + (w - Delta)^2)]
//   s_th    = Gamma n_th / g0^2
// See docs/noise-budget.md for the normalization of the thermal term.

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

#include "optosync/params.hpp"
#include "optosync/sde.hpp"

namespace optosync::noise {

inline double shot_noise_spectrum(double omega_eval, const OmParams& p, double n_photons) {
    if (n_photons < 0) throw ParameterError("n_photons", "must be >= 0");
    const double hk = 0.5 * p.kappa;
    const double plus = omega_eval + p.delta;
    const double minus = omega_eval - p.delta;
    return 0.5 * n_photons * (p.kappa / (hk * hk + plus * plus) + p.kappa / (hk * hk + minus * minus));
}

inline double thermal_spectrum(double gamma, double n_th, double g0) {
    if (n_th < 0) throw ParameterError("n_th", "must be >= 0");
    if (!(g0 > 0)) throw ParameterError("g0", "must be > 0");
    return gamma * n_th / (g0 * g0);
}

inline double cooperativity(const OmParams& p, double n_photons) {
    if (!(p.kappa > 0)) throw ParameterError("kappa", "must be > 0");
    if (!(p.gamma > 0)) throw ParameterError("gamma", "must be > 0");
    return 4.0 * p.g0 * p.g0 * n_photons / (p.kappa * p.gamma);
}

/// Thermal occupancy at which s_th equals s_sn evaluated at the mechanical
/// frequency, found by bracketing and bisection in n_th.
inline double equate_spectra(const OmParams& p, double n_photons) {
    const double target = shot_noise_spectrum(p.omega, p, n_photons);
    if (target == 0.0) return 0.0;
    auto excess = [&](double n) { return thermal_spectrum(p.gamma, n, p.g0) - target; };
    double lo = 0.0, hi = 1.0;
    while (excess(hi) < 0) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw std::runtime_error("equate_spectra: no bracket");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        if (excess(mid) < 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// kappa well below Omega and the laser on the blue sideband.
inline bool resolved_sideband(const OmParams& p) {
    return p.kappa <= 0.1 * p.omega && std::abs(p.delta - p.omega) <= p.kappa;
}

struct NoiseBudget {
    OmParams params;
    double n_photons = 0.0;
    double s_sn_norm = 0.0;
    double s_th_norm = 0.0;
    double n_th_star = 0.0;
    double cooperativity = 0.0;
    bool resolved_sideband = false;
};

inline NoiseBudget budget(const OmParams& p, double n_photons) {
    NoiseBudget b;
    b.params = p;
    b.n_photons = n_photons;
    b.s_sn_norm = shot_noise_spectrum(p.omega, p, n_photons);
    b.s_th_norm = thermal_spectrum(p.gamma, p.n_th, p.g0);
    b.n_th_star = equate_spectra(p, n_photons);
    b.cooperativity = optosync::noise::cooperativity(p, n_photons);
    b.resolved_sideband = resolved_sideband(p);
    return b;
}

/// Photon number of the noiseless limit cycle (time average of |alpha|^2).
inline double noiseless_photons(const OmParams& p, double t_settle = 2000.0 * kPeriod,
                                double t_window = 200.0 * kPeriod, double dt = kPeriod / 200.0) {
    return probe_limit_cycle(p, t_settle, t_window, dt).mean_photons;
}

inline nlohmann::ordered_json to_json(const NoiseBudget& b) {
    nlohmann::ordered_json j;
    j["inputs"] = {{"delta", b.params.delta}, {"omega", b.params.omega}, {"kappa", b.params.kappa},
                   {"gamma", b.params.gamma}, {"g0", b.params.g0},       {"n_th", b.params.n_th},
                   {"n_photons", b.n_photons}};
    j["s_sn_norm"] = b.s_sn_norm;
    j["s_th_norm"] = b.s_th_norm;
    j["n_th_star"] = b.n_th_star;
    j["cooperativity"] = b.cooperativity;
    j["half_cooperativity"] = 0.5 * b.cooperativity;
    j["resolved_sideband"] = b.resolved_sideband;
    return j;
}

}  // namespace optosync::noise
