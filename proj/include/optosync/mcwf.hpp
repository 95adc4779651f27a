#pragma once

// Quantum-jump (Monte-Carlo wave-function) trajectories of the optomechanical dimer
// on a truncated Fock space ordered (cavity 1, mechanics 1, cavity 2, mechanics 2).
//
// Each step of length dt either applies one collapse operator c, with probability
// p_c = dt <c^dag c>, or propagates with the non-Hermitian Hamiltonian
// H_eff = H - (i/2) sum_c c^dag c to first order, psi -> (1 - i H_eff dt) psi.
// The state is renormalized in both branches. Channels at zero temperature:
// sqrt(kappa) a_1, sqrt(kappa) a_2, sqrt(Gamma) b_1, sqrt(Gamma) b_2.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "optosync/params.hpp"
#include "optosync/rng.hpp"

namespace optosync::mcwf {

using cplx = std::complex<double>;
using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using StateVector = Eigen::VectorXcd;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The jump probabilities of one step exceed the budget; dt must shrink.
class TimeStepError : public std::runtime_error {
public:
    TimeStepError(double total, std::uint64_t step)
        : std::runtime_error("jump probability " + std::to_string(total) + " per step at step " +
                             std::to_string(step) + " exceeds the budget; reduce dt"),
          total_(total) {}
    double total_probability() const noexcept { return total_; }

private:
    double total_;
};

struct FockSpace {
    int n_opt = 8;   // photon levels 0..n_opt per cavity
    int n_mech = 8;  // phonon levels 0..n_mech per oscillator

    int opt_levels() const noexcept { return n_opt + 1; }
    int mech_levels() const noexcept { return n_mech + 1; }
    std::size_t dim() const noexcept {
        auto o = static_cast<std::size_t>(opt_levels());
        auto m = static_cast<std::size_t>(mech_levels());
        return o * o * m * m;
    }
    /// Basis index of |n1, m1, n2, m2>.
    std::size_t index(int n1, int m1, int n2, int m2) const noexcept {
        auto o = static_cast<std::size_t>(opt_levels());
        auto m = static_cast<std::size_t>(mech_levels());
        return ((static_cast<std::size_t>(n1) * m + static_cast<std::size_t>(m1)) * o +
                static_cast<std::size_t>(n2)) * m + static_cast<std::size_t>(m2);
    }
    std::array<int, 4> occupations(std::size_t i) const noexcept {
        auto o = static_cast<std::size_t>(opt_levels());
        auto m = static_cast<std::size_t>(mech_levels());
        int m2 = static_cast<int>(i % m);
        i /= m;
        int n2 = static_cast<int>(i % o);
        i /= o;
        int m1 = static_cast<int>(i % m);
        int n1 = static_cast<int>(i / m);
        return {n1, m1, n2, m2};
    }
};

inline constexpr std::size_t kDefaultDimensionCap = 250000;

inline void validate(const FockSpace& s, const DimerParams& p, std::size_t cap = kDefaultDimensionCap) {
    if (s.n_opt < 0 || s.n_mech < 0) throw DimensionError("cutoffs must be >= 0");
    bool driven = p.cell1.alpha_l != 0 || p.cell2.alpha_l != 0;
    bool mech_active = p.cell1.g0 != 0 || p.cell2.g0 != 0 || p.coupling_k != 0;
    if (driven && s.n_opt < 1) throw DimensionError("n_opt must be >= 1 for a driven cavity");
    if (mech_active && s.n_mech < 1) throw DimensionError("n_mech must be >= 1 with coupling present");
    if (s.dim() > cap)
        throw DimensionError("Hilbert-space dimension " + std::to_string(s.dim()) + " exceeds cap " +
                             std::to_string(cap));
}

struct OperatorSet {
    FockSpace space;
    SparseOp a1, a2, b1, b2;
    // Occupation numbers on the diagonal, stored as vectors.
    Eigen::VectorXd n_a1, n_a2, n_b1, n_b2;
    SparseOp hamiltonian;   // Hermitian part
    SparseOp h_eff;         // hamiltonian - (i/2) sum_c rate_c c^dag c
    std::array<double, 4> rates{};  // kappa1, kappa2, gamma1, gamma2
};

namespace detail {

// Lowering operator on one of the four modes (0: a1, 1: b1, 2: a2, 3: b2).
inline SparseOp lowering(const FockSpace& s, int mode) {
    const std::size_t d = s.dim();
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
        auto occ = s.occupations(i);
        if (occ[static_cast<std::size_t>(mode)] == 0) continue;
        double amp = std::sqrt(static_cast<double>(occ[static_cast<std::size_t>(mode)]));
        occ[static_cast<std::size_t>(mode)] -= 1;
        std::size_t j = s.index(occ[0], occ[1], occ[2], occ[3]);
        t.emplace_back(static_cast<int>(j), static_cast<int>(i), amp);
    }
    SparseOp op(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    op.setFromTriplets(t.begin(), t.end());
    return op;
}

inline Eigen::VectorXd occupation(const FockSpace& s, int mode) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(s.dim()));
    for (std::size_t i = 0; i < s.dim(); ++i)
        v[static_cast<Eigen::Index>(i)] = s.occupations(i)[static_cast<std::size_t>(mode)];
    return v;
}

inline SparseOp diagonal(const Eigen::VectorXcd& v) {
    SparseOp op(v.size(), v.size());
    std::vector<Eigen::Triplet<cplx>> t;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (v[i] != cplx{}) t.emplace_back(static_cast<int>(i), static_cast<int>(i), v[i]);
    op.setFromTriplets(t.begin(), t.end());
    return op;
}

}  // namespace detail

/// Assembles the operators and Hamiltonian
///   H = sum_j [-Delta_j a_j^dag a_j + Omega_j b_j^dag b_j - g0_j a_j^dag a_j (b_j + b_j^dag)
///              + alpha_L,j (a_j^dag + a_j)] - K (b_1 + b_1^dag)(b_2 + b_2^dag)
/// with the coupling -K (b_1^dag b_2 + b_1 b_2^dag) in rotating-wave form.
inline OperatorSet build_operators(const FockSpace& space, const DimerParams& p,
                                   std::size_t dimension_cap = kDefaultDimensionCap) {
    optosync::validate(p);
    validate(space, p, dimension_cap);
    OperatorSet ops;
    ops.space = space;
    ops.a1 = detail::lowering(space, 0);
    ops.b1 = detail::lowering(space, 1);
    ops.a2 = detail::lowering(space, 2);
    ops.b2 = detail::lowering(space, 3);
    ops.n_a1 = detail::occupation(space, 0);
    ops.n_b1 = detail::occupation(space, 1);
    ops.n_a2 = detail::occupation(space, 2);
    ops.n_b2 = detail::occupation(space, 3);

    const OmParams& c1 = p.cell1;
    const OmParams& c2 = p.cell2;
    Eigen::VectorXcd diag = (-c1.delta * ops.n_a1 + c1.omega * ops.n_b1 - c2.delta * ops.n_a2 +
                             c2.omega * ops.n_b2).cast<cplx>();
    SparseOp h = detail::diagonal(diag);

    SparseOp x1 = ops.b1 + SparseOp(ops.b1.adjoint());
    SparseOp x2 = ops.b2 + SparseOp(ops.b2.adjoint());
    SparseOp na1 = detail::diagonal(ops.n_a1.cast<cplx>());
    SparseOp na2 = detail::diagonal(ops.n_a2.cast<cplx>());
    // a^dag a commutes with b + b^dag, so the product is already Hermitian.
    h -= c1.g0 * SparseOp(na1 * x1);
    h -= c2.g0 * SparseOp(na2 * x2);
    h += c1.alpha_l * SparseOp(ops.a1 + SparseOp(ops.a1.adjoint()));
    h += c2.alpha_l * SparseOp(ops.a2 + SparseOp(ops.a2.adjoint()));
    if (p.coupling_k != 0) {
        if (p.rwa_coupling) {
            SparseOp hop = SparseOp(ops.b1.adjoint()) * ops.b2;
            h -= p.coupling_k * SparseOp(hop + SparseOp(hop.adjoint()));
        } else {
            h -= p.coupling_k * SparseOp(x1 * x2);
        }
    }
    h.prune(cplx{0.0, 0.0});
    ops.hamiltonian = h;

    ops.rates = {c1.kappa, c2.kappa, c1.gamma, c2.gamma};
    Eigen::VectorXd decay = c1.kappa * ops.n_a1 + c2.kappa * ops.n_a2 + c1.gamma * ops.n_b1 +
                            c2.gamma * ops.n_b2;
    ops.h_eff = h + detail::diagonal((cplx{0.0, -0.5} * decay.cast<cplx>()).eval());
    ops.h_eff.makeCompressed();
    ops.hamiltonian.makeCompressed();
    return ops;
}

enum class Channel : std::uint8_t { cavity1 = 0, cavity2 = 1, mechanics1 = 2, mechanics2 = 3 };

inline const char* to_string(Channel c) {
    switch (c) {
        case Channel::cavity1: return "a1";
        case Channel::cavity2: return "a2";
        case Channel::mechanics1: return "b1";
        case Channel::mechanics2: return "b2";
    }
    return "?";
}

struct FockState {
    StateVector amplitudes;
    double norm = 1.0;

    void normalize() {
        double n = amplitudes.norm();
        if (!(n > 0) || !std::isfinite(n)) throw std::runtime_error("state vector vanished or diverged");
        amplitudes /= n;
        norm = amplitudes.norm();
    }
};

inline FockState basis_state(const FockSpace& s, int n1, int m1, int n2, int m2) {
    FockState st;
    st.amplitudes = StateVector::Zero(static_cast<Eigen::Index>(s.dim()));
    st.amplitudes[static_cast<Eigen::Index>(s.index(n1, m1, n2, m2))] = 1.0;
    st.norm = 1.0;
    return st;
}

inline FockState vacuum(const FockSpace& s) { return basis_state(s, 0, 0, 0, 0); }

/// Truncated coherent amplitudes on `levels` Fock levels (normalized).
inline Eigen::VectorXcd coherent_amplitudes(int levels, cplx alpha) {
    Eigen::VectorXcd c(levels);
    c[0] = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < levels; ++n) c[n] = c[n - 1] * alpha / std::sqrt(static_cast<double>(n));
    return c / c.norm();
}

/// Product of truncated coherent states in all four modes.
inline FockState product_coherent(const FockSpace& s, cplx a1, cplx b1, cplx a2, cplx b2) {
    auto ca1 = coherent_amplitudes(s.opt_levels(), a1);
    auto cb1 = coherent_amplitudes(s.mech_levels(), b1);
    auto ca2 = coherent_amplitudes(s.opt_levels(), a2);
    auto cb2 = coherent_amplitudes(s.mech_levels(), b2);
    FockState st;
    st.amplitudes.resize(static_cast<Eigen::Index>(s.dim()));
    for (std::size_t i = 0; i < s.dim(); ++i) {
        auto o = s.occupations(i);
        st.amplitudes[static_cast<Eigen::Index>(i)] = ca1[o[0]] * cb1[o[1]] * ca2[o[2]] * cb2[o[3]];
    }
    st.normalize();
    return st;
}

struct Observables {
    double n_a1 = 0, n_a2 = 0, n_b1 = 0, n_b2 = 0;
    cplx b1dag_b2{};         // <b1^dag b2>
    cplx correlator{};       // <b1^dag b2> / sqrt(<n_b1><n_b2>)
    bool phase_defined = false;
};

inline double expect_diag(const StateVector& psi, const Eigen::VectorXd& diag) {
    return (psi.cwiseAbs2().array() * diag.array()).sum();
}

inline Observables observables(const FockState& psi, const OperatorSet& ops) {
    Observables o;
    o.n_a1 = expect_diag(psi.amplitudes, ops.n_a1);
    o.n_a2 = expect_diag(psi.amplitudes, ops.n_a2);
    o.n_b1 = expect_diag(psi.amplitudes, ops.n_b1);
    o.n_b2 = expect_diag(psi.amplitudes, ops.n_b2);
    StateVector v1 = ops.b1 * psi.amplitudes;
    StateVector v2 = ops.b2 * psi.amplitudes;
    o.b1dag_b2 = v1.dot(v2);  // conjugates the first argument
    if (o.n_b1 >= 1e-12 && o.n_b2 >= 1e-12) {
        o.correlator = o.b1dag_b2 / std::sqrt(o.n_b1 * o.n_b2);
        o.phase_defined = true;
    }
    return o;
}

/// Largest population in the top Fock level of any mode.
inline double top_level_population(const FockState& psi, const OperatorSet& ops) {
    const auto& s = ops.space;
    auto top = [&](const Eigen::VectorXd& occ, int level) {
        double p = 0.0;
        for (Eigen::Index i = 0; i < occ.size(); ++i)
            if (static_cast<int>(occ[i]) == level) p += std::norm(psi.amplitudes[i]);
        return p;
    };
    double worst = 0.0;
    if (s.n_opt > 0) worst = std::max({worst, top(ops.n_a1, s.n_opt), top(ops.n_a2, s.n_opt)});
    if (s.n_mech > 0) worst = std::max({worst, top(ops.n_b1, s.n_mech), top(ops.n_b2, s.n_mech)});
    return worst;
}

struct JumpRecord {
    double time;
    Channel channel;
};

inline constexpr double kProbabilityBudget = 0.1;

/// One quantum-jump step in place; returns the channel if a jump occurred.
inline std::optional<Channel> jump_step(FockState& psi, const OperatorSet& ops, double dt, Philox4x32& rng,
                                        std::uint64_t step_index = 0) {
    const auto& amp = psi.amplitudes;
    std::array<double, 4> p{ops.rates[0] * expect_diag(amp, ops.n_a1), ops.rates[1] * expect_diag(amp, ops.n_a2),
                            ops.rates[2] * expect_diag(amp, ops.n_b1), ops.rates[3] * expect_diag(amp, ops.n_b2)};
    double total = 0.0;
    for (double& x : p) {
        x *= dt;
        total += x;
    }
    if (total >= kProbabilityBudget) throw TimeStepError(total, step_index);

    double u = rng.uniform();
    if (u < total) {
        std::size_t c = 0;
        double acc = p[0];
        while (u >= acc && c < 3) acc += p[++c];
        const SparseOp* op[4] = {&ops.a1, &ops.a2, &ops.b1, &ops.b2};
        psi.amplitudes = (*op[c]) * psi.amplitudes;
        psi.normalize();
        return static_cast<Channel>(c);
    }
    StateVector next = psi.amplitudes - cplx{0.0, dt} * (ops.h_eff * psi.amplitudes);
    psi.amplitudes.swap(next);
    psi.normalize();
    return std::nullopt;
}

struct RunSettings {
    double t_total = 100.0;
    double dt = 1e-3;
    std::uint64_t sample_stride = 100;   // steps between recorded samples (t = 0 included)
    double leak_tol = 1e-3;
    bool keep_trajectories = false;      // store per-trajectory observable streams
    bool keep_jumps = false;
    unsigned workers = 0;                // 0: hardware concurrency
};

struct TrajectoryRecord {
    std::uint64_t index = 0;
    std::vector<Observables> samples;
    std::vector<JumpRecord> jumps;  // only with keep_jumps
    std::uint64_t jump_count = 0;
    double max_leakage = 0.0;
};

/// Mean and standard error across trajectories at each sample time.
struct EnsembleSeries {
    std::vector<double> mean;
    std::vector<double> stderr_;
};

struct Ensemble {
    std::vector<double> times;
    EnsembleSeries n_a1, n_a2, n_b1, n_b2, re_b1b2, im_b1b2, re_c, im_c;
    std::vector<TrajectoryRecord> trajectories;  // only when keep_trajectories / keep_jumps
    std::uint64_t n_traj = 0;
    std::uint64_t total_jumps = 0;
    double max_leakage = 0.0;
    bool truncation_unsafe = false;
};

/// Single trajectory from `initial`; RNG stream = (seed, index).
inline TrajectoryRecord run_trajectory(const OperatorSet& ops, const FockState& initial, const RunSettings& rs,
                                       std::uint64_t seed, std::uint64_t index) {
    if (!(rs.dt > 0)) throw std::invalid_argument("dt must be > 0");
    if (rs.sample_stride < 1) throw std::invalid_argument("sample_stride must be >= 1");
    Philox4x32 rng(seed, index);
    FockState psi = initial;
    psi.normalize();
    TrajectoryRecord rec;
    rec.index = index;
    const auto n_steps = static_cast<std::uint64_t>(std::llround(rs.t_total / rs.dt));
    rec.samples.reserve(n_steps / rs.sample_stride + 1);
    for (std::uint64_t n = 0;; ++n) {
        if (n % rs.sample_stride == 0) {
            rec.samples.push_back(observables(psi, ops));
            rec.max_leakage = std::max(rec.max_leakage, top_level_population(psi, ops));
        }
        if (n == n_steps) break;
        auto jump = jump_step(psi, ops, rs.dt, rng, n);
        if (jump) ++rec.jump_count;
        if (jump && rs.keep_jumps) rec.jumps.push_back({static_cast<double>(n + 1) * rs.dt, *jump});
    }
    return rec;
}

/// Mean and standard error over trajectory records that share one sample grid.
inline Ensemble reduce_ensemble(std::vector<TrajectoryRecord> recs, const RunSettings& rs) {
    if (recs.empty()) throw std::invalid_argument("no trajectories to reduce");
    const std::uint64_t n_traj = recs.size();
    Ensemble e;
    e.n_traj = n_traj;
    const std::size_t n_samples = recs.front().samples.size();
    e.times.resize(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i)
        e.times[i] = static_cast<double>(i * rs.sample_stride) * rs.dt;

    auto reduce = [&](auto getter) {
        EnsembleSeries s;
        s.mean.assign(n_samples, 0.0);
        s.stderr_.assign(n_samples, 0.0);
        const double n = static_cast<double>(n_traj);
        for (std::size_t i = 0; i < n_samples; ++i) {
            double sum = 0.0, sum2 = 0.0;
            for (const auto& r : recs) {
                double v = getter(r.samples[i]);
                sum += v;
                sum2 += v * v;
            }
            double mean = sum / n;
            s.mean[i] = mean;
            if (n_traj > 1) {
                double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
                s.stderr_[i] = std::sqrt(var / n);
            }
        }
        return s;
    };
    e.n_a1 = reduce([](const Observables& o) { return o.n_a1; });
    e.n_a2 = reduce([](const Observables& o) { return o.n_a2; });
    e.n_b1 = reduce([](const Observables& o) { return o.n_b1; });
    e.n_b2 = reduce([](const Observables& o) { return o.n_b2; });
    e.re_b1b2 = reduce([](const Observables& o) { return o.b1dag_b2.real(); });
    e.im_b1b2 = reduce([](const Observables& o) { return o.b1dag_b2.imag(); });
    e.re_c = reduce([](const Observables& o) { return o.correlator.real(); });
    e.im_c = reduce([](const Observables& o) { return o.correlator.imag(); });
    for (const auto& r : recs) {
        e.max_leakage = std::max(e.max_leakage, r.max_leakage);
        e.total_jumps += r.jump_count;
    }
    e.truncation_unsafe = e.max_leakage >= rs.leak_tol;
    if (rs.keep_trajectories || rs.keep_jumps) {
        e.trajectories = std::move(recs);
        if (!rs.keep_trajectories)
            for (auto& r : e.trajectories) r.samples.clear();
    }
    return e;
}

/// Runs trajectories 0..n_traj-1 concurrently; results are independent of the
/// number of workers.
inline Ensemble run_trajectories(const OperatorSet& ops, const FockState& initial, std::uint64_t n_traj,
                                 const RunSettings& rs, std::uint64_t seed, std::uint64_t first_index = 0) {
    if (n_traj == 0) throw std::invalid_argument("n_traj must be >= 1");
    std::vector<TrajectoryRecord> recs(n_traj);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    unsigned workers = rs.workers ? rs.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, n_traj));
    auto work = [&] {
        for (;;) {
            std::uint64_t k = next.fetch_add(1);
            if (k >= n_traj) return;
            try {
                recs[k] = run_trajectory(ops, initial, rs, seed, first_index + k);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_traj;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
    return reduce_ensemble(std::move(recs), rs);
}

}  // namespace optosync::mcwf
