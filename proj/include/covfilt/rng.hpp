#pragma once

#include <covfilt/common.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace covfilt {

// Deterministic, platform-independent random numbers. State setup uses
// splitmix64, the stream itself is xoshiro256++. Streams for (seed, i) and
// (seed, j) are independent for i != j, which is what gives per-track and
// per-sample reproducibility regardless of evaluation order.

struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

class Xoshiro256pp {
public:
    Xoshiro256pp(std::uint64_t seed, std::uint64_t stream = 0) {
        SplitMix64 sm(seed ^ ((stream + 1) * 0x9E3779B97F4A7C15ULL));
        for (auto& word : s_) word = sm.next();
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; the second variate of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 on (0, 1] keeps log(u1) finite.
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform01();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    Vec normal_vec(Eigen::Index n) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    // Sample N(mean, L L^T) given a (lower) Cholesky factor L.
    Vec mvn(const Vec& mean, const Mat& chol_lower) {
        return mean + chol_lower * normal_vec(mean.size());
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace covfilt
