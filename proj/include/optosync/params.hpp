#pragma once

// Physical parameters of two mechanically coupled optomechanical cells.
//
// Units: every frequency is measured in units of the first mechanical
// frequency Omega_1, time in units of 1/Omega_1, and hbar = 1.

#include <cmath>
#include <stdexcept>
#include <string>

namespace optosync {

/// Raised when a parameter lies outside its admissible range.
/// `field()` names the offending parameter.
class ParameterError : public std::invalid_argument {
public:
    ParameterError(std::string field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// One optomechanical cell: a driven cavity mode coupled to a mechanical mode.
struct OmParams {
    double delta = 0.0;    // laser detuning omega_L - omega_c
    double omega = 1.0;    // mechanical frequency
    double kappa = 0.3;    // optical damping
    double gamma = 0.015;  // mechanical damping
    double g0 = 0.3;       // single-photon coupling
    double alpha_l = 0.3;  // laser drive amplitude
    double n_th = 0.0;     // thermal occupancy of the mechanical bath

    friend bool operator==(const OmParams&, const OmParams&) = default;
};

inline void validate(const OmParams& p, const std::string& prefix = "") {
    auto finite = [&](double v, const char* name) {
        if (!std::isfinite(v)) throw ParameterError(prefix + name, "must be finite");
    };
    finite(p.delta, "delta");
    finite(p.omega, "omega");
    finite(p.kappa, "kappa");
    finite(p.gamma, "gamma");
    finite(p.g0, "g0");
    finite(p.alpha_l, "alpha_l");
    finite(p.n_th, "n_th");
    if (!(p.kappa > 0)) throw ParameterError(prefix + "kappa", "must be > 0");
    if (!(p.gamma > 0)) throw ParameterError(prefix + "gamma", "must be > 0");
    if (p.g0 < 0) throw ParameterError(prefix + "g0", "must be >= 0");
    if (p.n_th < 0) throw ParameterError(prefix + "n_th", "must be >= 0");
    if (!(p.omega > 0)) throw ParameterError(prefix + "omega", "must be > 0");
}

/// Two cells coupled through their mechanical modes with strength K.
struct DimerParams {
    OmParams cell1;
    OmParams cell2;
    double coupling_k = 0.0;
    bool rwa_coupling = true;
    bool identical = false;  // set only by make_identical_dimer

    friend bool operator==(const DimerParams&, const DimerParams&) = default;
};

inline void validate(const DimerParams& d) {
    validate(d.cell1, "cell1.");
    validate(d.cell2, "cell2.");
    if (d.cell1.omega != 1.0)
        throw ParameterError("cell1.omega", "must be exactly 1 (frequencies are in units of Omega_1)");
    if (!std::isfinite(d.coupling_k)) throw ParameterError("coupling_k", "must be finite");
    if (d.identical && !(d.cell1 == d.cell2))
        throw ParameterError("cell2", "cells declared identical but differ");
}

/// Both cells equal `p`. Throws ParameterError naming the bad field.
inline DimerParams make_identical_dimer(const OmParams& p, double k, bool rwa) {
    DimerParams d{p, p, k, rwa, true};
    validate(d);
    return d;
}

/// Two cells that share every parameter except the mechanical frequency of
/// the second one, which is 1 + delta_omega.
inline DimerParams make_detuned_dimer(const OmParams& p, double delta_omega, double k, bool rwa) {
    OmParams second = p;
    second.omega = p.omega + delta_omega;
    DimerParams d{p, second, k, rwa, delta_omega == 0.0};
    validate(d);
    return d;
}

/// Position along the classical-to-quantum crossover.
/// quantum_parameter = g0/kappa; rescaled_drive = g0*alpha_L (held fixed).
struct QuantumScale {
    double quantum_parameter = 1.0;
    double rescaled_drive = 0.09;
};

/// Result of placing a dimer on the crossover. When `noiseless` is set the
/// quantum parameter is zero, g0 and alpha_l are not meaningful, and only the
/// rescaled equations can be integrated.
struct CrossoverPoint {
    DimerParams params;
    double rescaled_drive = 0.0;
    bool noiseless = false;
};

/// Keep kappa, Gamma, Delta, Omega, K and g0*alpha_L fixed and set
/// g0 = quantum_parameter * kappa.
inline CrossoverPoint crossover_point(const QuantumScale& scale, const DimerParams& base) {
    if (!std::isfinite(scale.quantum_parameter) || scale.quantum_parameter < 0)
        throw ParameterError("quantum_parameter", "must be >= 0");
    if (!std::isfinite(scale.rescaled_drive))
        throw ParameterError("rescaled_drive", "must be finite");
    CrossoverPoint out{base, scale.rescaled_drive, scale.quantum_parameter == 0.0};
    for (OmParams* c : {&out.params.cell1, &out.params.cell2}) {
        if (out.noiseless) {
            c->g0 = 0.0;
            c->alpha_l = 0.0;
        } else {
            c->g0 = scale.quantum_parameter * c->kappa;
            c->alpha_l = scale.rescaled_drive / c->g0;
        }
    }
    return out;
}

/// Reads (g0/kappa, g0*alpha_L) back off a materialized dimer (cell 1).
inline QuantumScale quantum_scale_of(const DimerParams& d) {
    return {d.cell1.g0 / d.cell1.kappa, d.cell1.g0 * d.cell1.alpha_l};
}

}  // namespace optosync
