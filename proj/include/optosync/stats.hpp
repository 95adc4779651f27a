#pragma once

// Small statistics helpers shared by the analysis and the engines.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace optosync::stats {

struct MeanError {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

/// Sample mean and standard error of the mean.
inline MeanError mean_error(std::span<const double> x) {
    MeanError r;
    r.n = x.size();
    if (x.empty()) return r;
    double s = 0.0;
    for (double v : x) s += v;
    r.mean = s / static_cast<double>(x.size());
    if (x.size() < 2) return r;
    double ss = 0.0;
    for (double v : x) ss += (v - r.mean) * (v - r.mean);
    r.stderr_ = std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
    return r;
}

/// Mean with a batch-means error estimate, for serially correlated series.
inline MeanError batch_mean_error(std::span<const double> x, std::size_t n_batches = 20) {
    MeanError r;
    r.n = x.size();
    if (x.empty()) return r;
    n_batches = std::max<std::size_t>(1, std::min(n_batches, x.size()));
    const std::size_t len = x.size() / n_batches;
    std::vector<double> means;
    means.reserve(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double s = 0.0;
        for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
        means.push_back(s / static_cast<double>(len));
    }
    double total = 0.0;
    for (double v : x) total += v;
    r.mean = total / static_cast<double>(x.size());
    r.stderr_ = mean_error(means).stderr_;
    return r;
}

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-16) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;  // sup |F_n - F|
    double p_value = 1.0;
    std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF, with the
/// Stephens small-sample correction of the asymptotic distribution.
inline KsResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
    KsResult r;
    r.n = x.size();
    if (x.empty()) return r;
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double f = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    r.statistic = d;
    double sq = std::sqrt(n);
    r.p_value = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d);
    return r;
}

/// KS test of `x` against the exponential law shifted to start at `offset`.
inline KsResult ks_exponential(const std::vector<double>& x, double mean, double offset = 0.0) {
    return ks_test(x, [=](double v) { return v <= offset ? 0.0 : 1.0 - std::exp(-(v - offset) / mean); });
}

}  // namespace optosync::stats
