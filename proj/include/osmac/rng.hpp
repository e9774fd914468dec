#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace osmac {

namespace detail {

// splitmix64 output function; used to spread (seed, stream) pairs over the
// engine's seed space so nearby stream ids give unrelated sequences.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic random source. Identical (seed, stream) pairs produce
/// identical draw sequences on every platform: the engine is std::mt19937_64,
/// whose output is fixed by the standard, and all variate transforms below
/// avoid the implementation-defined std::*_distribution classes.
///
/// Streams are independent substreams of one logical seed; the experiment
/// harness gives repetition s the stream id s so repetitions can be
/// reproduced individually.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : engine_(detail::splitmix64(seed ^ detail::splitmix64(stream))),
          have_spare_(false),
          spare_(0.0) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0,1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n); n >= 1. Lemire's multiply-shift with
    /// rejection, so the distribution is exact.
    std::uint64_t bounded(std::uint64_t n) {
        std::uint64_t x = engine_();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0ULL - n) % n;
            while (lo < threshold) {
                x = engine_();
                m = static_cast<__uint128_t>(x) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Marsaglia's polar method (spare value cached).
    double standard_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    double exponential(double rate) {
        // 1 - uniform01() is in (0, 1].
        return -std::log1p(-uniform01()) / rate;
    }

    /// Gamma(shape, scale) by Marsaglia-Tsang squeeze; shape > 0.
    double gamma(double shape, double scale) {
        if (shape < 1.0) {
            const double u = uniform01();
            return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = standard_normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v * scale;
        }
    }

    double chi_square(double df) { return gamma(0.5 * df, 2.0); }

  private:
    std::mt19937_64 engine_;
    bool have_spare_;
    double spare_;
};

}  // namespace osmac
