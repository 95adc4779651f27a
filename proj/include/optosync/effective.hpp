#pragma once

// Phase-only models for the relative phase of two coupled oscillators:
//   Kuramoto:        dphi/dt = dw - k sin(dphi)
//   Hopf-Kuramoto:   dphi/dt = dw - 2 S1 sin(dphi) - 4 S2 sin(2 dphi)
// and the effective potential U with dphi/dt = -U'(dphi).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace optosync::effective {

inline constexpr double kPi = std::numbers::pi;

inline double kuramoto_rhs(double dphi, double delta_omega, double k) {
    return delta_omega - k * std::sin(dphi);
}

struct HopfKuramotoParams {
    double delta_omega = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
};

/// The Kuramoto model is the case s1 = k/2, s2 = 0.
inline HopfKuramotoParams from_kuramoto(double delta_omega, double k) { return {delta_omega, 0.5 * k, 0.0}; }

inline double hopf_kuramoto_rhs(double dphi, const HopfKuramotoParams& p) {
    return p.delta_omega - 2.0 * p.s1 * std::sin(dphi) - 4.0 * p.s2 * std::sin(2.0 * dphi);
}

/// d(rhs)/d(dphi) = -U''.
inline double hopf_kuramoto_slope(double dphi, const HopfKuramotoParams& p) {
    return -2.0 * p.s1 * std::cos(dphi) - 8.0 * p.s2 * std::cos(2.0 * dphi);
}

/// Closed form U = -dw dphi - 2 S1 cos(dphi) + S2 (2 - 2 cos(2 dphi)), up to a constant.
inline double potential_closed_form(double dphi, const HopfKuramotoParams& p) {
    return -p.delta_omega * dphi - 2.0 * p.s1 * std::cos(dphi) + p.s2 * (2.0 - 2.0 * std::cos(2.0 * dphi));
}

inline constexpr double kRootTolerance = 1e-8;
inline constexpr double kMarginalCurvature = 1e-10;
inline constexpr int kDefaultGrid = 4096;

struct FixedPoint {
    double phi = 0.0;
    double slope = 0.0;  // rhs'(phi) = -U''(phi)
    bool stable = false;
    bool marginal = false;
};

namespace detail {

inline double bisect(double lo, double hi, const HopfKuramotoParams& p) {
    double flo = hopf_kuramoto_rhs(lo, p);
    while (hi - lo > kRootTolerance) {
        double mid = 0.5 * (lo + hi);
        double fm = hopf_kuramoto_rhs(mid, p);
        if (fm == 0.0) return mid;
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline double wrap(double x) {
    double r = std::remainder(x, 2.0 * kPi);
    return r <= -kPi ? r + 2.0 * kPi : r;
}

// Simpson integral of -rhs over [a, b].
inline double integrate_neg_rhs(double a, double b, const HopfKuramotoParams& p, int n = 16) {
    double h = (b - a) / n;
    double s = hopf_kuramoto_rhs(a, p) + hopf_kuramoto_rhs(b, p);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * hopf_kuramoto_rhs(a + i * h, p);
    return -s * h / 3.0;
}

}  // namespace detail

/// Zeros of the Hopf-Kuramoto rhs on (-pi, pi], from sign changes on a uniform
/// grid refined by bisection. Tangential zeros without a sign change are only
/// found if they fall on a grid node.
inline std::vector<FixedPoint> fixed_points(const HopfKuramotoParams& p, int grid = kDefaultGrid) {
    std::vector<FixedPoint> out;
    const double h = 2.0 * kPi / grid;
    auto node = [&](int i) { return -kPi + (i + 1) * h; };  // node grid-1 is pi
    auto add = [&](double x) {
        FixedPoint fp;
        fp.phi = detail::wrap(x);
        fp.slope = hopf_kuramoto_slope(fp.phi, p);
        fp.marginal = std::abs(fp.slope) < kMarginalCurvature;
        fp.stable = !fp.marginal && fp.slope < 0;
        out.push_back(fp);
    };
    for (int i = 0; i < grid; ++i) {
        double x0 = node(i);
        double x1 = x0 + h;  // the last interval wraps onto node 0
        double f0 = hopf_kuramoto_rhs(x0, p);
        double f1 = hopf_kuramoto_rhs(x1, p);
        if (f0 == 0.0)
            add(x0);
        else if (f1 != 0.0 && (f0 < 0) != (f1 < 0))
            add(detail::bisect(x0, x1, p));
    }
    std::sort(out.begin(), out.end(), [](const FixedPoint& a, const FixedPoint& b) { return a.phi < b.phi; });
    return out;
}

struct Minimum {
    double phi = 0.0;
    double depth = 0.0;  // lower adjacent barrier minus U(phi)
};

struct PotentialProfile {
    std::vector<double> phi;  // -pi .. pi inclusive, grid+1 nodes
    std::vector<double> u;    // u[0] = 0 at -pi
    std::vector<Minimum> minima;
    HopfKuramotoParams params;

    /// U at any phi, continued with U(x + 2 pi) = U(x) - 2 pi dw.
    double value(double x) const {
        const double period = 2.0 * kPi;
        double k = std::floor((x + kPi) / period);
        double y = x - k * period;
        double h = phi[1] - phi[0];
        auto i = static_cast<std::size_t>(std::clamp((y + kPi) / h, 0.0, static_cast<double>(phi.size() - 2)));
        return u[i] + detail::integrate_neg_rhs(phi[i], y, params, 4) - k * period * params.delta_omega;
    }
};

/// Integrates -rhs on a uniform grid (Simpson per cell) and locates the minima.
inline PotentialProfile effective_potential(const HopfKuramotoParams& p, int grid = kDefaultGrid) {
    PotentialProfile prof;
    prof.params = p;
    const double h = 2.0 * kPi / grid;
    prof.phi.resize(static_cast<std::size_t>(grid) + 1);
    prof.u.resize(prof.phi.size());
    prof.phi[0] = -kPi;
    prof.u[0] = 0.0;
    for (int i = 1; i <= grid; ++i) {
        auto k = static_cast<std::size_t>(i);
        prof.phi[k] = -kPi + i * h;
        prof.u[k] = prof.u[k - 1] + detail::integrate_neg_rhs(prof.phi[k - 1], prof.phi[k], p, 2);
    }
    auto fps = fixed_points(p, grid);
    std::vector<double> maxima;
    for (const auto& fp : fps)
        if (!fp.stable && !fp.marginal) maxima.push_back(fp.phi);
    for (const auto& fp : fps) {
        if (!fp.stable) continue;
        Minimum m{fp.phi, 0.0};
        double um = prof.value(fp.phi);
        if (maxima.empty()) {
            m.depth = 0.0;
        } else {
            // Nearest maxima to the left and right on the unrolled circle.
            double left = -1e300, right = 1e300;
            for (double x : maxima) {
                for (double shift : {-2.0 * kPi, 0.0, 2.0 * kPi}) {
                    double y = x + shift;
                    if (y < fp.phi) left = std::max(left, y);
                    if (y > fp.phi) right = std::min(right, y);
                }
            }
            m.depth = std::min(prof.value(left), prof.value(right)) - um;
        }
        prof.minima.push_back(m);
    }
    return prof;
}

enum class Regime { zero_sync, pi_sync, bistable, drift };

inline const char* to_string(Regime r) {
    switch (r) {
        case Regime::zero_sync: return "zero-sync";
        case Regime::pi_sync: return "pi-sync";
        case Regime::bistable: return "bistable";
        case Regime::drift: return "drift";
    }
    return "?";
}

struct Classification {
    Regime regime = Regime::drift;
    std::vector<FixedPoint> fixed_points;
    /// Set when a zero is degenerate, the rhs vanishes identically, or a stable
    /// zero sits on the boundary |dphi| = pi/2 between the two labels.
    bool marginal = false;
};

/// Stable zeros with cos(dphi) > 0 count as 0-locking, cos(dphi) < 0 as pi-locking.
inline Classification classify_regime(const HopfKuramotoParams& p, int grid = kDefaultGrid) {
    Classification c;
    if (p.delta_omega == 0.0 && p.s1 == 0.0 && p.s2 == 0.0) {
        c.marginal = true;  // every phase is a fixed point
        return c;
    }
    c.fixed_points = fixed_points(p, grid);
    bool zero = false, pi = false;
    for (const auto& fp : c.fixed_points) {
        if (fp.marginal) c.marginal = true;
        if (!fp.stable) continue;
        double cs = std::cos(fp.phi);
        if (std::abs(cs) <= 2.0 * kRootTolerance) c.marginal = true;  // within root accuracy of pi/2
        if (cs > 0)
            zero = true;
        else
            pi = true;
    }
    if (zero && pi)
        c.regime = Regime::bistable;
    else if (zero)
        c.regime = Regime::zero_sync;
    else if (pi)
        c.regime = Regime::pi_sync;
    else
        c.regime = Regime::drift;
    return c;
}

}  // namespace optosync::effective
