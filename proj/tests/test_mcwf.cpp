#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "optosync/mcwf.hpp"
#include "optosync/stats.hpp"

using namespace optosync;
using namespace optosync::mcwf;
using Dense = Eigen::MatrixXcd;

namespace {

// ---- dense oracle, built only from single-mode matrices and Kronecker products ----

Dense destroy(int levels) {
    Dense a = Dense::Zero(levels, levels);
    for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

Dense kron(const Dense& a, const Dense& b) {
    Dense out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

struct DenseOps {
    Dense a1, b1, a2, b2, h;
    std::vector<Dense> jumps;
};

DenseOps dense_ops(const FockSpace& s, const DimerParams& p) {
    int o = s.opt_levels(), m = s.mech_levels();
    Dense Io = Dense::Identity(o, o), Im = Dense::Identity(m, m);
    Dense a = destroy(o), b = destroy(m);
    DenseOps d;
    d.a1 = kron(kron(kron(a, Im), Io), Im);
    d.b1 = kron(kron(kron(Io, b), Io), Im);
    d.a2 = kron(kron(kron(Io, Im), a), Im);
    d.b2 = kron(kron(kron(Io, Im), Io), b);
    auto cell = [](const OmParams& c, const Dense& A, const Dense& B) {
        Dense n = A.adjoint() * A;
        return Dense(-c.delta * n + c.omega * B.adjoint() * B - c.g0 * n * (B + B.adjoint()) +
                     c.alpha_l * (A + A.adjoint()));
    };
    d.h = cell(p.cell1, d.a1, d.b1) + cell(p.cell2, d.a2, d.b2);
    if (p.rwa_coupling)
        d.h -= p.coupling_k * (d.b1.adjoint() * d.b2 + d.b1 * d.b2.adjoint());
    else
        d.h -= p.coupling_k * (d.b1 + d.b1.adjoint()) * (d.b2 + d.b2.adjoint());
    d.jumps = {std::sqrt(p.cell1.kappa) * d.a1, std::sqrt(p.cell2.kappa) * d.a2, std::sqrt(p.cell1.gamma) * d.b1,
               std::sqrt(p.cell2.gamma) * d.b2};
    return d;
}

Dense lindblad(const Dense& rho, const DenseOps& d) {
    const cplx I{0, 1};
    Dense heff = d.h;
    for (const auto& L : d.jumps) heff -= 0.5 * I * (L.adjoint() * L);
    Dense hr = heff * rho;
    Dense out = -I * hr + I * hr.adjoint();  // rho is Hermitian
    for (const auto& L : d.jumps) out += L * rho * L.adjoint();
    return out;
}

// RK4 integration of the master equation; returns Tr(rho X) for each X at each checkpoint.
std::vector<std::vector<double>> master_equation(const DenseOps& d, Dense rho, const std::vector<Dense>& xs,
                                                 double dt, int steps_per_sample, int samples) {
    std::vector<std::vector<double>> out(xs.size());
    for (int k = 0; k <= samples; ++k) {
        for (std::size_t j = 0; j < xs.size(); ++j) out[j].push_back((rho * xs[j]).trace().real());
        for (int i = 0; i < steps_per_sample && k < samples; ++i) {
            Dense k1 = lindblad(rho, d);
            Dense k2 = lindblad(rho + 0.5 * dt * k1, d);
            Dense k3 = lindblad(rho + 0.5 * dt * k2, d);
            Dense k4 = lindblad(rho + dt * k3, d);
            rho += dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        }
    }
    return out;
}

Dense to_dense(const SparseOp& s) { return Dense(s); }

OmParams cell(double delta, double g0, double alpha_l, double kappa = 0.3, double gamma = 0.015) {
    OmParams p;
    p.delta = delta;
    p.g0 = g0;
    p.alpha_l = alpha_l;
    p.kappa = kappa;
    p.gamma = gamma;
    return p;
}

}  // namespace

TEST(Operators, DecoupledSpectrumIsDiagonal) {
    FockSpace s{3, 2};
    auto p = make_identical_dimer(cell(0.4, 0.0, 0.0), 0.0, true);
    auto ops = build_operators(s, p);
    Dense h = to_dense(ops.hamiltonian);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        auto o = s.occupations(i);
        for (std::size_t j = 0; j < s.dim(); ++j) {
            cplx expect = i == j ? cplx{-0.4 * (o[0] + o[2]) + (o[1] + o[3]), 0} : cplx{};
            EXPECT_NEAR(std::abs(h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - expect), 0.0, 1e-15);
        }
    }
}

TEST(Operators, HermitianForRandomParameters) {
    Philox4x32 g(1, 1);
    for (int trial = 0; trial < 6; ++trial) {
        auto c1 = cell(g.uniform() - 0.5, g.uniform(), g.uniform(), 0.1 + g.uniform(), 0.01 + g.uniform());
        auto c2 = c1;
        c2.omega = 0.5 + g.uniform();
        c2.alpha_l = g.uniform();
        DimerParams p{c1, c2, g.uniform() - 0.5, trial % 2 == 0, false};
        auto ops = build_operators({2, 3}, p);
        Dense h = to_dense(ops.hamiltonian);
        EXPECT_LT((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Operators, MatchDenseKroneckerConstruction) {
    FockSpace s{2, 2};
    auto c1 = cell(0.15, 0.3, 0.3);
    auto c2 = c1;
    c2.omega = 1.05;
    for (bool rwa : {false, true}) {
        DimerParams p{c1, c2, 0.2, rwa, false};
        auto ops = build_operators(s, p);
        auto d = dense_ops(s, p);
        EXPECT_LT((to_dense(ops.a1) - d.a1).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((to_dense(ops.b1) - d.b1).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((to_dense(ops.a2) - d.a2).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((to_dense(ops.b2) - d.b2).cwiseAbs().maxCoeff(), 1e-15);
        EXPECT_LT((to_dense(ops.hamiltonian) - d.h).cwiseAbs().maxCoeff(), 1e-14);
        // The coupling term on its own.
        Dense x1 = d.b1 + d.b1.adjoint(), x2 = d.b2 + d.b2.adjoint();
        Dense coupling = rwa ? Dense(d.b1.adjoint() * d.b2 + d.b1 * d.b2.adjoint()) : Dense(x1 * x2);
        DimerParams q = p;
        q.coupling_k = 0;
        Dense diff = to_dense(build_operators(s, q).hamiltonian) - to_dense(ops.hamiltonian);
        EXPECT_LT((diff - 0.2 * coupling).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Operators, DimensionGuards) {
    auto p = make_identical_dimer(cell(0.1, 0.3, 0.3), 0.1, true);
    EXPECT_THROW(build_operators({30, 30}, p), DimensionError);
    EXPECT_THROW(build_operators({0, 2}, p), DimensionError);
    EXPECT_THROW(build_operators({2, 0}, p), DimensionError);
    EXPECT_NO_THROW(build_operators({4, 4}, p, 1000000));
}

TEST(JumpStep, VacuumIsDark) {
    FockSpace s{2, 2};
    auto ops = build_operators(s, make_identical_dimer(cell(0.1, 0.3, 0.0), 0.1, true));
    auto psi = vacuum(s);
    Philox4x32 rng(0, 0);
    for (int i = 0; i < 1000; ++i) ASSERT_FALSE(jump_step(psi, ops, 0.01, rng).has_value());
    EXPECT_NEAR(std::abs(psi.amplitudes[0]), 1.0, 1e-12);
    EXPECT_NEAR(psi.amplitudes.norm(), 1.0, 1e-12);
}

TEST(JumpStep, NormPreserved) {
    FockSpace s{3, 3};
    auto ops = build_operators(s, make_identical_dimer(cell(0.15, 0.3, 0.3), 0.15, true));
    auto psi = product_coherent(s, {0.5, 0.2}, {1.0, 0}, {0.1, -0.3}, {0, 0.8});
    Philox4x32 rng(4, 4);
    for (int i = 0; i < 2000; ++i) {
        jump_step(psi, ops, 0.01, rng, static_cast<std::uint64_t>(i));
        ASSERT_LT(std::abs(psi.amplitudes.norm() - 1.0), 1e-12);
    }
}

TEST(JumpStep, BudgetViolation) {
    FockSpace s{3, 1};
    auto ops = build_operators(s, make_identical_dimer(cell(0.1, 0.0, 0.0, 1.0), 0.0, true));
    auto psi = basis_state(s, 3, 0, 3, 0);
    Philox4x32 rng(0, 0);
    EXPECT_THROW(jump_step(psi, ops, 0.05, rng), TimeStepError);
}

TEST(JumpStep, SinglePhotonDecayIsExponential) {
    // One cavity holding one photon; kappa dt = 1e-3.
    FockSpace s{1, 1};
    auto p = make_identical_dimer(cell(0.0, 0.0, 0.0, 1.0), 0.0, true);
    auto ops = build_operators(s, p);
    const double dt = 1e-3;
    std::vector<double> waits;
    for (std::uint64_t k = 0; k < 10000; ++k) {
        auto psi = basis_state(s, 1, 0, 0, 0);
        Philox4x32 rng(77, k);
        for (std::uint64_t n = 0;; ++n) {
            auto c = jump_step(psi, ops, dt, rng, n);
            if (c) {
                EXPECT_EQ(*c, Channel::cavity1);
                waits.push_back(static_cast<double>(n + 1) * dt);
                break;
            }
        }
        // After the jump the state is dark.
        EXPECT_NEAR(std::abs(psi.amplitudes[0]), 1.0, 1e-12);
    }
    auto m = stats::mean_error(waits);
    EXPECT_NEAR(m.mean, 1.0, 0.05);
    EXPECT_GT(stats::ks_exponential(waits, m.mean, 0.0).p_value, 0.01);
}

TEST(Observables, CoherentCorrelator) {
    FockSpace s{1, 24};
    auto same = product_coherent(s, 0, {1.2, 0.5}, 0, {1.2, 0.5});
    auto ops = build_operators(s, make_identical_dimer(cell(0.1, 0.0, 0.0), 0.0, true));
    auto o = observables(same, ops);
    ASSERT_TRUE(o.phase_defined);
    EXPECT_NEAR(o.correlator.real(), 1.0, 1e-10);
    EXPECT_NEAR(o.correlator.imag(), 0.0, 1e-10);
    auto flipped = product_coherent(s, 0, {1.2, 0.5}, 0, {-1.2, -0.5});
    auto f = observables(flipped, ops);
    EXPECT_NEAR(f.correlator.real(), -1.0, 1e-10);
    auto vac = observables(vacuum(s), ops);
    EXPECT_FALSE(vac.phase_defined);
}

TEST(Trajectories, DrivenCavityMatchesMasterEquation) {
    FockSpace s{4, 0};
    DimerParams p = make_identical_dimer(cell(0.15, 0.0, 0.15), 0.0, true);
    p.cell2.alpha_l = 0.0;
    p.identical = false;
    auto ops = build_operators(s, p);
    RunSettings rs;
    rs.dt = 0.005;
    rs.t_total = 10.0;
    rs.sample_stride = 200;
    auto e = run_trajectories(ops, vacuum(s), 600, rs, 3);
    auto d = dense_ops(s, p);
    Dense rho0 = Dense::Zero(static_cast<Eigen::Index>(s.dim()), static_cast<Eigen::Index>(s.dim()));
    rho0(0, 0) = 1;
    auto exact = master_equation(d, rho0, {d.a1.adjoint() * d.a1}, 0.005, 200, 10)[0];
    ASSERT_EQ(exact.size(), e.times.size());
    for (std::size_t i = 1; i < exact.size(); ++i)
        EXPECT_NEAR(e.n_a1.mean[i], exact[i], 3 * e.n_a1.stderr_[i] + 1e-3) << "t=" << e.times[i];
}

TEST(Trajectories, OptomechanicalDimerMatchesMasterEquation) {
    // Small coupled space (d = 81) with enhanced damping so the ensemble settles quickly.
    FockSpace s{2, 2};
    auto c = cell(0.15, 0.3, 0.2, 0.6, 0.2);
    DimerParams p = make_identical_dimer(c, 0.2, true);
    auto ops = build_operators(s, p);
    RunSettings rs;
    rs.dt = 0.002;
    rs.t_total = 8.0;
    rs.sample_stride = 500;
    auto psi0 = basis_state(s, 0, 1, 0, 0);
    auto e = run_trajectories(ops, psi0, 800, rs, 9);
    auto d = dense_ops(s, p);
    Dense rho0 = psi0.amplitudes * psi0.amplitudes.adjoint();
    auto me = master_equation(d, rho0, {d.a1.adjoint() * d.a1, d.b1.adjoint() * d.b1, d.b2.adjoint() * d.b2}, 0.01,
                              100, 8);
    const auto &na = me[0], &nb1 = me[1], &nb2 = me[2];
    for (std::size_t i = 1; i < na.size(); ++i) {
        EXPECT_NEAR(e.n_a1.mean[i], na[i], 3 * e.n_a1.stderr_[i] + 2e-3);
        EXPECT_NEAR(e.n_b1.mean[i], nb1[i], 3 * e.n_b1.stderr_[i] + 2e-3);
        EXPECT_NEAR(e.n_b2.mean[i], nb2[i], 3 * e.n_b2.stderr_[i] + 2e-3);
    }
}

TEST(Trajectories, DeterministicAndIndependentOfWorkers) {
    FockSpace s{2, 2};
    auto ops = build_operators(s, make_identical_dimer(cell(0.15, 0.3, 0.3), 0.15, true));
    RunSettings rs;
    rs.dt = 0.01;
    rs.t_total = 5;
    rs.sample_stride = 50;
    rs.workers = 1;
    auto a = run_trajectories(ops, vacuum(s), 16, rs, 5);
    rs.workers = 4;
    auto b = run_trajectories(ops, vacuum(s), 16, rs, 5);
    EXPECT_EQ(a.n_a1.mean, b.n_a1.mean);
    EXPECT_EQ(a.re_c.mean, b.re_c.mean);
    EXPECT_EQ(a.total_jumps, b.total_jumps);
}

TEST(Trajectories, DisjointSeedRangesAgree) {
    FockSpace s{3, 0};
    auto ops = build_operators(s, make_identical_dimer(cell(0.15, 0.0, 0.2), 0.0, true));
    RunSettings rs;
    rs.dt = 0.01;
    rs.t_total = 10;
    rs.sample_stride = 100;
    auto a = run_trajectories(ops, vacuum(s), 300, rs, 1, 0);
    auto b = run_trajectories(ops, vacuum(s), 300, rs, 1, 300);
    for (std::size_t i = 1; i < a.times.size(); ++i)
        EXPECT_NEAR(a.n_a1.mean[i], b.n_a1.mean[i], 3 * std::hypot(a.n_a1.stderr_[i], b.n_a1.stderr_[i]));
}

TEST(Trajectories, UndrivenExcitationsDecay) {
    FockSpace s{2, 2};
    auto ops = build_operators(s, make_identical_dimer(cell(0.15, 0.3, 0.0, 0.3, 0.05), 0.2, true));
    RunSettings rs;
    rs.dt = 0.01;
    rs.t_total = 20;
    rs.sample_stride = 100;
    auto e = run_trajectories(ops, basis_state(s, 2, 1, 1, 2), 400, rs, 2);
    for (std::size_t i = 1; i < e.times.size(); ++i) {
        double now = e.n_a1.mean[i] + e.n_a2.mean[i] + e.n_b1.mean[i] + e.n_b2.mean[i];
        double before = e.n_a1.mean[i - 1] + e.n_a2.mean[i - 1] + e.n_b1.mean[i - 1] + e.n_b2.mean[i - 1];
        EXPECT_LE(now, before + 1e-9);
    }
}

TEST(Trajectories, TruncationFlag) {
    FockSpace s{2, 1};
    auto ops = build_operators(s, make_identical_dimer(cell(0.0, 0.0, 1.0), 0.0, true));
    RunSettings rs;
    rs.dt = 0.005;
    rs.t_total = 5;
    rs.sample_stride = 100;
    auto e = run_trajectories(ops, vacuum(s), 4, rs, 0);
    EXPECT_TRUE(e.truncation_unsafe);
    auto quiet = build_operators(s, make_identical_dimer(cell(0.0, 0.0, 0.001), 0.0, true));
    EXPECT_FALSE(run_trajectories(quiet, vacuum(s), 4, rs, 0).truncation_unsafe);
}

TEST(Trajectories, JumpRecordsArePoissonian) {
    // Linear decaying oscillator started in a coherent state: the jump record is a
    // Poisson process of rate kappa |alpha|^2 e^{-kappa t}. Given the number of jumps,
    // the integrated rates Lambda(t_j) / Lambda(T) are iid uniform on (0, 1).
    FockSpace s{12, 0};
    const double kappa = 0.5, alpha = 2.0;
    DimerParams p = make_identical_dimer(cell(0.0, 0.0, 0.0, kappa), 0.0, true);
    auto ops = build_operators(s, p);
    RunSettings rs;
    rs.dt = 0.002;
    rs.t_total = 6;
    rs.sample_stride = 3000;
    rs.keep_jumps = true;
    auto e = run_trajectories(ops, product_coherent(s, alpha, 0, 0, 0), 1500, rs, 12);
    auto lambda = [&](double t) { return alpha * alpha * (1 - std::exp(-kappa * t)); };
    std::vector<double> u;
    double count = 0;
    for (const auto& r : e.trajectories)
        for (const auto& j : r.jumps) {
            ASSERT_EQ(j.channel, Channel::cavity1);
            u.push_back(lambda(j.time) / lambda(rs.t_total));
            ++count;
        }
    double expected = 1500 * lambda(rs.t_total);
    EXPECT_NEAR(count, expected, 3 * std::sqrt(expected));
    EXPECT_GT(stats::ks_test(u, [](double x) { return std::clamp(x, 0.0, 1.0); }).p_value, 0.01);
}
