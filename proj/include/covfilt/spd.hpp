#pragma once

#include <covfilt/common.hpp>

#include <atomic>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace covfilt {

// Symmetric positive definite kernels shared by the losses and both filter
// paths. Everything routes through the same factorization code so that the
// plain and tape-based filters agree bit for bit.

struct NotPositiveDefiniteError : std::runtime_error {
    explicit NotPositiveDefiniteError(const std::string& what) : std::runtime_error(what) {}
};

// Matrices farther from symmetric than this (relative to the largest entry)
// are treated as errors rather than silently symmetrized.
inline constexpr double kMaxRelativeAsymmetry = 1e-6;

inline void check_symmetric(const Mat& a, const char* where) {
    if (a.rows() != a.cols())
        throw std::invalid_argument(std::string(where) + ": matrix is not square (" + shape_str(a) + ")");
    double asym = relative_asymmetry(a);
    if (asym > kMaxRelativeAsymmetry)
        throw std::invalid_argument(std::string(where) + ": matrix is not symmetric (relative asymmetry " +
                                    std::to_string(asym) + ")");
}

struct SpdStats {
    std::atomic<std::uint64_t> factorizations{0};
    std::atomic<std::uint64_t> jittered{0};
    std::atomic<std::uint64_t> failures{0};
};

inline SpdStats& spd_stats() {
    static SpdStats stats;
    return stats;
}

// Lower Cholesky of a symmetric matrix; throws NotPositiveDefiniteError when
// a pivot is not strictly positive. Input is symmetrized internally, so
// callers may pass matrices with roundoff-level asymmetry.
inline Mat cholesky_lower(const Mat& a_in) {
    check_symmetric(a_in, "cholesky_lower");
    Mat a = symmetrize(a_in);
    const Eigen::Index n = a.rows();
    Mat l = Mat::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double d = a(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) {
            spd_stats().failures.fetch_add(1, std::memory_order_relaxed);
            throw NotPositiveDefiniteError("cholesky_lower: pivot " + std::to_string(j) + " is " +
                                           std::to_string(d) + " for a " + shape_str(a) + " matrix");
        }
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    spd_stats().factorizations.fetch_add(1, std::memory_order_relaxed);
    return l;
}

// Solve L X = B with L lower triangular.
inline Mat solve_lower(const Mat& l, const Mat& b) {
    const Eigen::Index n = l.rows();
    Mat x = b;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = x(i, c);
            for (Eigen::Index k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

// Solve L^T X = B with L lower triangular.
inline Mat solve_lower_transpose(const Mat& l, const Mat& b) {
    const Eigen::Index n = l.rows();
    Mat x = b;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
            double s = x(i, c);
            for (Eigen::Index k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

// Solve A X = B given the Cholesky factor of A.
inline Mat solve_spd_with(const Mat& l, const Mat& b) {
    return solve_lower_transpose(l, solve_lower(l, b));
}

inline double logdet_from_cholesky(const Mat& l) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
    return 2.0 * acc;
}

struct JitterResult {
    Mat factor;           // lower Cholesky of a + jitter * I
    double jitter = 0.0;  // absolute diagonal increment that succeeded
    int ladder_index = 0; // which rung succeeded
};

// Relative rungs of the jitter ladder, scaled by trace(a)/dim.
inline constexpr std::array<double, 4> kJitterLadder = {0.0, 1e-9, 1e-6, 1e-3};

// Factor a symmetric matrix, escalating diagonal jitter until the
// factorization succeeds. Throws NotPositiveDefiniteError with the attempted
// rungs when even the largest rung fails.
inline JitterResult cholesky_with_jitter(const Mat& a) {
    check_symmetric(a, "cholesky_with_jitter");
    const double unit = a.trace() / static_cast<double>(a.rows());
    for (std::size_t r = 0; r < kJitterLadder.size(); ++r) {
        const double jitter = kJitterLadder[r] * unit;
        if (r > 0 && jitter <= 0.0) break;  // trace not positive, escalation cannot help
        try {
            Mat candidate = (r == 0) ? a : Mat(a + jitter * Mat::Identity(a.rows(), a.cols()));
            JitterResult result{cholesky_lower(candidate), jitter, static_cast<int>(r)};
            if (r > 0) {
                spd_stats().jittered.fetch_add(1, std::memory_order_relaxed);
                log_debug("cholesky_with_jitter: rung " + std::to_string(r) + " (jitter " +
                          std::to_string(jitter) + ") for a " + shape_str(a) + " matrix");
            }
            return result;
        } catch (const NotPositiveDefiniteError&) {
            // try the next rung
        }
    }
    throw NotPositiveDefiniteError("cholesky_with_jitter: " + shape_str(a) +
                                   " matrix is not positive definite after the full jitter ladder (trace " +
                                   std::to_string(a.trace()) + ")");
}

}  // namespace covfilt
