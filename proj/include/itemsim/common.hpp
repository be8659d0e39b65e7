#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace itemsim {

using UserId = std::int32_t;
using ItemId = std::int32_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input files: wrong field count, non-integer ids, short negative lists.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid input that violates dataset invariants.
struct ConsistencyError : Error {
    using Error::Error;
};

// Mismatched dimensions, variants, or out-of-range hyper-parameters.
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite loss or gradient during training.
struct DivergenceError : Error {
    using Error::Error;
};

// Unreadable/unwritable files, bad magic, truncated blobs.
struct IoError : Error {
    using Error::Error;
};

/// Deterministic random source. The engine (mt19937_64) is fully specified by
/// the standard; the distribution transforms live here so that a given seed
/// yields the same draws on every platform/stdlib.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // unbiased integer in [0, n)
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return v % n;
    }

    // uniform in [0, 1)
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Box-Muller; second draw of each pair is cached.
    double normal(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return mean + stddev * radius * std::cos(angle);
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// splitmix64; used to derive independent sub-seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Neumaier compensated accumulator. Keeps softmax normalization errors at
/// O(eps) instead of O(n*eps) for histories with thousands of items.
class KahanSum {
  public:
    void add(double value) {
        const double t = sum_ + value;
        if (std::abs(sum_) >= std::abs(value)) {
            comp_ += (sum_ - t) + value;
        } else {
            comp_ += (value - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace itemsim
