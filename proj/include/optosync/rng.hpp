#pragma once

// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
//
// A stream is identified by (seed, stream_id); the n-th block of output is a
// pure function of (seed, stream_id, n), so independent trajectories never
// share generator state and results do not depend on scheduling.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>

namespace optosync {

class Philox4x32 {
public:
    using result_type = std::uint32_t;

    Philox4x32(std::uint64_t seed, std::uint64_t stream_id) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_{static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (pos_ == 4) {
            block_ = generate(counter_++);
            pos_ = 0;
        }
        return block_[pos_++];
    }

    /// Uniform double in (0, 1); never returns 0 so it is safe under log().
    double uniform() noexcept {
        std::uint64_t hi = (*this)();
        std::uint64_t lo = (*this)();
        std::uint64_t bits = ((hi << 32) | lo) >> 11;  // 53 bits
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; caches the second variate.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    /// Complex Gaussian with independent parts, each of variance `var_per_quadrature`.
    std::complex<double> complex_normal(double var_per_quadrature) noexcept {
        double s = std::sqrt(var_per_quadrature);
        double re = normal();
        double im = normal();
        return {s * re, s * im};
    }

    /// Raw block for a given counter; exposed for testing against known answers.
    std::array<std::uint32_t, 4> generate(std::uint64_t counter) const noexcept {
        std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter),
                                         static_cast<std::uint32_t>(counter >> 32), stream_[0],
                                         stream_[1]};
        return raw(ctr, key_);
    }

    static std::array<std::uint32_t, 4> raw(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) noexcept {
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }

private:
    static std::array<std::uint32_t, 4> single_round(const std::array<std::uint32_t, 4>& c,
                                                     const std::array<std::uint32_t, 2>& k) noexcept {
        constexpr std::uint64_t m0 = 0xD2511F53u;
        constexpr std::uint64_t m1 = 0xCD9E8D57u;
        std::uint64_t p0 = m0 * c[0];
        std::uint64_t p1 = m1 * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 2> stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace optosync
