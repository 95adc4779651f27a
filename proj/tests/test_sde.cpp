#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "optosync/phase.hpp"
#include "optosync/sde.hpp"

using namespace optosync;

namespace {

OmParams fig3_cell() {
    OmParams p;
    p.kappa = 0.3;
    p.gamma = 0.015;
    p.g0 = 0.3;
    p.alpha_l = 0.3;
    p.delta = 0.15;
    return p;
}

double max_abs(const SemiclassicalState& s) {
    return std::max({std::abs(s.alpha1), std::abs(s.beta1), std::abs(s.alpha2), std::abs(s.beta2)});
}

SemiclassicalState diff(const SemiclassicalState& a, const SemiclassicalState& b) { return a + (-1.0) * b; }

}  // namespace

TEST(Drift, UndrivenOriginIsFixed) {
    auto p = fig3_cell();
    p.alpha_l = 0;
    auto d = make_identical_dimer(p, 0.2, false);
    EXPECT_EQ(max_abs(drift(SemiclassicalState{}, d)), 0.0);
}

TEST(Drift, BareCavitySteadyState) {
    auto p = fig3_cell();
    auto d = make_identical_dimer(p, 0.0, true);
    // alpha_ss = -i alpha_L / (kappa/2 - i Delta), solved by hand.
    cplx a = cplx{0, -p.alpha_l} / cplx{p.kappa / 2, -p.delta};
    SemiclassicalState s{a, {}, a, {}};
    auto f = drift(s, d);
    EXPECT_LT(std::abs(f.alpha1), 1e-15);
    EXPECT_LT(std::abs(f.alpha2), 1e-15);
}

TEST(Drift, MatchesWrittenEquations) {
    auto p = fig3_cell();
    for (bool rwa : {true, false}) {
        auto d = make_identical_dimer(p, 0.17, rwa);
        SemiclassicalState s{{0.3, -0.2}, {1.1, 0.4}, {-0.5, 0.7}, {0.2, -0.9}};
        auto f = drift(s, d);
        const cplx I{0, 1};
        auto b2c = rwa ? s.beta2 : s.beta2 + std::conj(s.beta2);
        auto b1c = rwa ? s.beta1 : s.beta1 + std::conj(s.beta1);
        cplx a1 = (I * p.delta - p.kappa / 2) * s.alpha1 + I * p.g0 * s.alpha1 * (s.beta1 + std::conj(s.beta1)) -
                  I * p.alpha_l;
        cplx b1 = -(I * p.omega + p.gamma / 2) * s.beta1 + I * p.g0 * std::norm(s.alpha1) + I * 0.17 * b2c;
        cplx b2 = -(I * p.omega + p.gamma / 2) * s.beta2 + I * p.g0 * std::norm(s.alpha2) + I * 0.17 * b1c;
        EXPECT_LT(std::abs(f.alpha1 - a1), 1e-14);
        EXPECT_LT(std::abs(f.beta1 - b1), 1e-14);
        EXPECT_LT(std::abs(f.beta2 - b2), 1e-14);
    }
}

TEST(Drift, SymmetricSubspacePreserved) {
    auto d = make_identical_dimer(fig3_cell(), 0.2, true);
    SemiclassicalState s{{0.3, -0.2}, {1.1, 0.4}, {0.3, -0.2}, {1.1, 0.4}};
    auto f = drift(s, d);
    EXPECT_EQ(f.alpha1, f.alpha2);
    EXPECT_EQ(f.beta1, f.beta2);
}

TEST(Step, SecondOrderOnNoiselessPath) {
    auto m = raw_model(make_identical_dimer(fig3_cell(), 0.2, true));
    SemiclassicalState s0{{0.1, 0.0}, {0.5, 0.2}, {0.0, 0.1}, {-0.3, 0.4}};
    auto run = [&](double dt) {
        auto s = s0;
        Philox4x32 rng(0, 0);
        int n = static_cast<int>(std::lround(10.0 / dt));
        for (int i = 0; i < n; ++i) s = step(s, m, dt, noiseless(), rng);
        return s;
    };
    auto ref = run(0.00125);
    double e1 = max_abs(diff(run(0.02), ref));
    double e2 = max_abs(diff(run(0.01), ref));
    double e3 = max_abs(diff(run(0.005), ref));
    EXPECT_NEAR(e1 / e2, 4.0, 0.4);
    EXPECT_NEAR(e2 / e3, 4.0, 0.4);
}

TEST(Step, AccumulatedOpticalNoiseVariance) {
    // kappa = 1, no drift contributions that matter: integrate only the noise.
    auto p = fig3_cell();
    p.kappa = 1.0;
    auto m = raw_model(make_identical_dimer(p, 0.0, true));
    auto noise = noise_for(m, 11, 0);
    const double dt = 0.01, T = 1.0;
    const int steps = 100, samples = 20000;
    double sum = 0, sum2 = 0;
    for (int k = 0; k < samples; ++k) {
        Philox4x32 rng(11, static_cast<std::uint64_t>(k));
        double acc = 0;
        for (int i = 0; i < steps; ++i) acc += draw_increment(m, noise, dt, rng).alpha1.real();
        sum += acc;
        sum2 += acc * acc;
    }
    double var = sum2 / samples - (sum / samples) * (sum / samples);
    // Var of a Gaussian sample variance is 2 sigma^4 / n.
    EXPECT_NEAR(var, T / 4, 3 * std::sqrt(2.0 / samples) * T / 4);
}

TEST(Step, NoiseStrengths) {
    auto p = fig3_cell();
    p.n_th = 3.0;
    auto d = make_identical_dimer(p, 0.1, true);
    auto raw = noise_for(raw_model(d), 0, 0);
    EXPECT_DOUBLE_EQ(raw.optical_strength, 0.5);
    EXPECT_DOUBLE_EQ(raw.mechanical_strength, 3.5);
    auto cp = crossover_point({0.5, 0.09}, d);
    auto resc = noise_for(rescaled_model(cp), 0, 0);
    EXPECT_DOUBLE_EQ(resc.optical_strength, 0.5 * 0.15 * 0.15);
    EXPECT_DOUBLE_EQ(resc.mechanical_strength, 3.5 * 0.15 * 0.15);
    auto zero = noise_for(rescaled_model(crossover_point({0.0, 0.09}, d)), 0, 0);
    EXPECT_EQ(zero.optical_strength, 0.0);
    EXPECT_EQ(zero.mechanical_strength, 0.0);
}

TEST(Step, StiffnessAbortCarriesStep) {
    auto m = raw_model(make_identical_dimer(fig3_cell(), 0.2, true));
    Philox4x32 rng(0, 0);
    SemiclassicalState s{{1e300, 0}, {1e300, 0}, {}, {}};
    try {
        step(s, m, 0.01, noiseless(), rng, 17);
        FAIL();
    } catch (const StiffnessError& e) {
        EXPECT_EQ(e.step(), 17u);
    }
}

TEST(Simulate, Deterministic) {
    auto m = raw_model(make_identical_dimer(fig3_cell(), 0.15, true));
    SimulationSettings st;
    st.t_total = 200;
    st.burn_in = 50;
    st.dt = kPeriod / 200;
    auto a = simulate(m, st, noise_for(m, 5, 2));
    auto b = simulate(m, st, noise_for(m, 5, 2));
    auto c = simulate(m, st, noise_for(m, 5, 3));
    ASSERT_EQ(a.states.size(), b.states.size());
    EXPECT_TRUE(a.states == b.states);
    EXPECT_FALSE(a.states == c.states);
    for (std::size_t i = 1; i < a.times.size(); ++i)
        EXPECT_NEAR(a.times[i] - a.times[i - 1], st.sample_stride * st.dt, 1e-9);
    EXPECT_GE(a.times.front(), st.burn_in);
}

TEST(Simulate, SettingsChecked) {
    auto m = raw_model(make_identical_dimer(fig3_cell(), 0.15, true));
    SimulationSettings st;
    st.dt = 0.5;
    EXPECT_THROW(simulate(m, st, noiseless()), ConfigError);
    st = {};
    st.burn_in = st.t_total;
    EXPECT_THROW(simulate(m, st, noiseless()), ConfigError);
}

TEST(Simulate, EqualPhasesStayLockedWithoutCoupling) {
    auto m = raw_model(make_identical_dimer(fig3_cell(), 0.0, true));
    SimulationSettings st;
    st.t_total = 400 * kPeriod;
    st.burn_in = 0;
    st.initial.fixed_phases = true;
    st.initial.phase1 = st.initial.phase2 = 0.7;
    auto tr = simulate(m, st, noiseless());
    for (const auto& s : tr.states) {
        EXPECT_EQ(s.beta1, s.beta2);
    }
    auto ps = relative_phase(tr);
    for (double x : ps.delta_phi) EXPECT_EQ(x, 0.0);
}

TEST(Simulate, RescaledClassicalLimitMatchesRawPath) {
    auto d = make_identical_dimer(fig3_cell(), 0.15, true);
    auto cp0 = crossover_point({0.0, 0.09}, d);
    auto m0 = rescaled_model(cp0);
    auto m1 = raw_model(d);  // g0 = 0.3, alpha_L = 0.3
    SimulationSettings st;
    st.t_total = 100 * kPeriod;
    st.burn_in = 0;
    st.initial.fixed_phases = true;
    st.initial.phase1 = 0.3;
    st.initial.phase2 = 1.9;
    st.initial.beta_magnitude = 0.03;
    auto tr0 = simulate(m0, st, noise_for(m0, 1, 0));
    st.initial.beta_magnitude = 0.1;
    auto tr1 = simulate(m1, st, noiseless());
    // tr0 lives in tilde units: divide by the raw g0 for comparison.
    double worst = 0;
    for (std::size_t i = 0; i < tr0.states.size(); ++i)
        worst = std::max(worst, max_abs(diff((1.0 / 0.3) * tr0.states[i], tr1.states[i])));
    EXPECT_LT(worst, 1e-7);
}

TEST(Simulate, StrongCouplingNoiselessLocksAtZero) {
    // Identical Fig. 5 base cells and K well above the 0-sync onset.
    OmParams c;
    c.kappa = 0.3;
    c.gamma = 0.015;
    c.delta = -1.0 / 30.0;
    auto cp = crossover_point({0.0, 0.09}, make_identical_dimer(c, 0.25, true));
    auto m = rescaled_model(cp);
    SimulationSettings st;
    st.t_total = 3000 * kPeriod;
    st.burn_in = 2000 * kPeriod;
    auto tr = simulate(m, st, noise_for(m, 3, 0));
    auto ps = relative_phase(tr);
    for (double x : ps.delta_phi) ASSERT_LT(std::abs(x), 0.05);
}

TEST(Threshold, PaperPointOscillates) {
    auto probe = probe_limit_cycle(fig3_cell());
    EXPECT_TRUE(probe.limit_cycle);
    EXPECT_GT(probe.mean_photons, 0.0);
}

TEST(Threshold, NoDriveNoOscillation) {
    auto p = fig3_cell();
    p.alpha_l = 1e-6;
    for (double delta : {-0.5, 0.15, 1.0})
        EXPECT_FALSE((p.delta = delta, probe_limit_cycle(p).limit_cycle));
}

TEST(Threshold, LargerDampingRaisesThreshold) {
    auto p = fig3_cell();
    std::vector<double> drives{0.02, 0.05, 0.1, 0.2, 0.3, 0.5};
    auto lo = selfosc_threshold_scan(p, drives, {0.15});
    p.gamma *= 10;
    auto hi = selfosc_threshold_scan(p, drives, {0.15});
    auto first = [](const std::vector<bool>& row) {
        for (std::size_t i = 0; i < row.size(); ++i)
            if (row[i]) return i;
        return row.size();
    };
    // Monotone in drive, and the onset moves up when Gamma grows.
    for (const auto* row : {&lo[0], &hi[0]})
        for (std::size_t i = first(*row); i < row->size(); ++i) EXPECT_TRUE((*row)[i]);
    EXPECT_GT(first(hi[0]), first(lo[0]));
    EXPECT_LT(first(lo[0]), drives.size());
}
