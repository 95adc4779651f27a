#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "optosync/phase.hpp"

using namespace optosync;
constexpr double pi = std::numbers::pi;

namespace {

Trajectory constant_traj(cplx b1, cplx b2, std::size_t n) {
    Trajectory t;
    for (std::size_t i = 0; i < n; ++i) {
        t.times.push_back(static_cast<double>(i));
        t.states.push_back({{}, b1, {}, b2});
    }
    return t;
}

// Telegraph process with exponential dwells plus Gaussian jitter, sampled every dt.
PhaseSeries telegraph(double tau0, double taupi, double jitter, double t_total, double dt, std::uint64_t seed) {
    Philox4x32 g(seed, 0);
    std::vector<double> t, phi;
    bool zero = true;
    double next = -tau0 * std::log(g.uniform());
    for (double x = 0; x < t_total; x += dt) {
        while (x >= next) {
            zero = !zero;
            next += -(zero ? tau0 : taupi) * std::log(g.uniform());
        }
        t.push_back(x);
        phi.push_back((zero ? 0.0 : pi) + jitter * g.normal());
    }
    return make_phase_series(t, phi);
}

}  // namespace

TEST(RelativePhase, Examples) {
    cplx b{0.6, -0.8};
    EXPECT_NEAR(relative_phase(constant_traj(b, b, 4)).delta_phi[0], 0.0, 1e-15);
    EXPECT_NEAR(relative_phase(constant_traj(b, -b, 4)).delta_phi[0], pi, 1e-15);
    EXPECT_NEAR(relative_phase(constant_traj(b, cplx{0, 1} * b, 4)).delta_phi[0], pi / 2, 1e-15);
}

TEST(RelativePhase, WrappingAndRange) {
    std::vector<double> raw{-7.0, -pi, 0.0, pi, 3.5, 12.0};
    std::vector<double> shifted;
    for (double x : raw) shifted.push_back(x + 2 * pi);
    auto a = make_phase_series({0, 1, 2, 3, 4, 5}, raw);
    auto b = make_phase_series({0, 1, 2, 3, 4, 5}, shifted);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        EXPECT_GT(a.delta_phi[i], -pi);
        EXPECT_LE(a.delta_phi[i], pi);
        EXPECT_NEAR(a.delta_phi[i], b.delta_phi[i], 1e-14);
    }
    EXPECT_EQ(a.delta_phi[1], pi);
}

TEST(RelativePhase, UndefinedSamples) {
    auto t = constant_traj({1, 0}, {1, 0}, 10);
    for (int i = 0; i < 4; ++i) t.states[static_cast<std::size_t>(i)].beta2 = 0;
    auto ps = relative_phase(t);
    EXPECT_EQ(ps.defined_count(), 6u);
    for (int i = 4; i < 10; ++i) t.states[static_cast<std::size_t>(i)].beta1 = 1e-9;
    EXPECT_THROW(relative_phase(t), AnalysisError);
}

TEST(Histogram, ConstantSeriesOccupiesOneBin) {
    std::vector<double> z(1000, 0.0), t(1000);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    auto h = histogram(make_phase_series(t, z), 64);
    int occupied = 0;
    double total = 0;
    for (std::size_t i = 0; i < h.bins(); ++i) {
        total += h.density[i] * h.width();
        if (h.density[i] > 0) {
            ++occupied;
            EXPECT_LT(h.edges[i], 0.0);
            EXPECT_GE(h.edges[i + 1], 0.0);
        }
    }
    EXPECT_EQ(occupied, 1);
    EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Histogram, UniformPhasesAreFlat) {
    Philox4x32 g(3, 1);
    const std::size_t n = 64000, bins = 64;
    std::vector<double> t(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = static_cast<double>(i);
        x[i] = -pi + 2 * pi * g.uniform();
    }
    auto h = histogram(make_phase_series(t, x), bins);
    // Multinomial: count per bin ~ Binomial(n, 1/bins).
    double p = 1.0 / bins;
    double sigma_density = std::sqrt(n * p * (1 - p)) / (n * h.width());
    int outliers = 0;
    for (double d : h.density)
        if (std::abs(d - 1 / (2 * pi)) > 3 * sigma_density) ++outliers;
    EXPECT_LE(outliers, 2);  // 0.27% per bin at 3 sigma
}

TEST(Histogram, TooFewSamples) {
    std::vector<double> t(100), x(100, 0.0);
    EXPECT_THROW(histogram(make_phase_series(t, x), 64), AnalysisError);
}

TEST(SyncMeasure, Constants) {
    std::vector<double> t(100), z(100, 0.0), p(100, pi);
    auto a = sync_measure(make_phase_series(t, z));
    EXPECT_DOUBLE_EQ(a.mean_cos, 1.0);
    EXPECT_DOUBLE_EQ(a.mean_sin, 0.0);
    auto b = sync_measure(make_phase_series(t, p));
    EXPECT_DOUBLE_EQ(b.mean_cos, -1.0);
    EXPECT_NEAR(b.mean_sin, 0.0, 1e-15);
}

TEST(SyncMeasure, HistogramReconstructionAgrees) {
    auto ps = telegraph(100, 50, 0.3, 2e5, 0.5, 21);
    auto direct = sync_measure(ps);
    auto rebuilt = sync_measure(histogram(ps, 256));
    EXPECT_NEAR(direct.mean_cos, rebuilt.mean_cos, 1e-3);
    EXPECT_NEAR(direct.mean_sin, rebuilt.mean_sin, 1e-3);
}

TEST(Residence, TelegraphRecovery) {
    auto ps = telegraph(100, 50, 0.1, 3e5, 0.5, 4);
    auto rec = residence_times(ps);
    EXPECT_GT(rec.switch_count, 1000u);
    EXPECT_NEAR(rec.tau0_mean / 100, 1.0, 0.05);
    EXPECT_NEAR(rec.tau_pi_mean / 50, 1.0, 0.05);
    // The tail fit sees the debounced dwells, whose decay is slowed to about
    // tau e^{d / tau_other} by absorbed short excursions.
    const double d = 4 * pi;
    EXPECT_NEAR(rec.tau0_tail / (100 * std::exp(d / 50)), 1.0, 0.1);
    EXPECT_NEAR(rec.tau_pi_tail / (50 * std::exp(d / 100)), 1.0, 0.1);
    EXPECT_TRUE(rec.dead_time_converged);
    EXPECT_FALSE(rec.low_count);
}

TEST(Residence, IntervalsAlternateAndAreOrdered) {
    auto ps = telegraph(100, 50, 0.4, 5e4, 0.5, 8);
    auto rec = residence_times(ps);
    for (std::size_t i = 1; i < rec.intervals.size(); ++i) {
        EXPECT_NE(rec.intervals[i].state, rec.intervals[i - 1].state);
        EXPECT_LE(rec.intervals[i - 1].end, rec.intervals[i].start + 1e-12);
        EXPECT_LT(rec.intervals[i].start, rec.intervals[i].end);
    }
    EXPECT_TRUE(rec.intervals.front().censored);
    EXPECT_TRUE(rec.intervals.back().censored);
}

TEST(Residence, HysteresisIdempotent) {
    auto ps = telegraph(100, 50, 0.4, 2e4, 0.5, 9);
    auto labels = classify_states(ps);
    std::vector<double> relabeled;
    for (auto s : labels) relabeled.push_back(s == SyncState::zero ? 0.0 : pi);
    auto again = classify_states(make_phase_series(ps.times, relabeled));
    EXPECT_EQ(labels, again);
}

TEST(Residence, TrappedSeries) {
    std::vector<double> t(2000), x(2000, pi - 0.05);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    auto rec = residence_times(make_phase_series(t, x));
    EXPECT_EQ(rec.switch_count, 0u);
    ASSERT_TRUE(rec.trapped_in.has_value());
    EXPECT_EQ(*rec.trapped_in, SyncState::pi);
    EXPECT_TRUE(std::isinf(rec.tau_pi_mean));
}

TEST(Residence, ShortExcursionsAreDebounced) {
    // One 3-unit excursion (< 2 periods) inside a long 0-dwell is not a switch.
    std::vector<double> t, x;
    for (int i = 0; i < 3000; ++i) {
        t.push_back(i);
        x.push_back(i >= 1000 && i < 1003 ? pi : 0.0);
    }
    EXPECT_EQ(residence_times(make_phase_series(t, x)).switch_count, 0u);
}

TEST(Residence, RatioIdentity) {
    auto ps = telegraph(100, 50, 0.1, 3e5, 0.5, 12);
    auto rec = residence_times(ps);
    double ratio = rec.tau0_mean / rec.tau_pi_mean;
    double err = ratio * std::hypot(rec.tau0_stderr / rec.tau0_mean, rec.tau_pi_stderr / rec.tau_pi_mean);
    EXPECT_NEAR(ratio, rec.p0 / rec.p_pi, 3 * err);
}

TEST(Residence, PooledSeries) {
    std::vector<PhaseSeries> parts;
    for (std::uint64_t s = 0; s < 4; ++s) parts.push_back(telegraph(100, 50, 0.1, 8e4, 0.5, 100 + s));
    auto rec = residence_times(std::span<const PhaseSeries>(parts));
    std::size_t switches = 0;
    for (const auto& p : parts) switches += residence_times(p).switch_count;
    EXPECT_EQ(rec.switch_count, switches);
    EXPECT_NEAR(rec.tau0_mean, 100, 4 * rec.tau0_stderr);
    EXPECT_NEAR(rec.tau_pi_mean, 50, 4 * rec.tau_pi_stderr);
}
