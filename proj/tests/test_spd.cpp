#include <covfilt/rng.hpp>
#include <covfilt/spd.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace covfilt;

namespace {

Mat random_spd(Xoshiro256pp& rng, int n, double diag_boost = 0.5) {
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
    return symmetrize(a * a.transpose()) + diag_boost * Mat::Identity(n, n);
}

}  // namespace

TEST_CASE("cholesky_lower agrees with an independent factorization") {
    Xoshiro256pp rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + static_cast<int>(rng.next_u64() % 6);
        Mat a = random_spd(rng, n);
        Mat l = cholesky_lower(a);
        // reconstruction
        REQUIRE((l * l.transpose() - a).cwiseAbs().maxCoeff() < 1e-10 * a.cwiseAbs().maxCoeff());
        // strictly lower triangular above the diagonal
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) REQUIRE(l(i, j) == 0.0);
        // against Eigen's LLT
        Mat l_ref = Eigen::LLT<Mat>(a).matrixL();
        REQUIRE((l - l_ref).cwiseAbs().maxCoeff() < 1e-9 * (1.0 + l_ref.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("triangular and SPD solves invert correctly") {
    Xoshiro256pp rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 1 + static_cast<int>(rng.next_u64() % 5);
        int m = 1 + static_cast<int>(rng.next_u64() % 4);
        Mat a = random_spd(rng, n);
        Mat l = cholesky_lower(a);
        Mat b(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) b(i, j) = rng.normal();

        Mat x1 = solve_lower(l, b);
        REQUIRE((l * x1 - b).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + b.cwiseAbs().maxCoeff()));
        Mat x2 = solve_lower_transpose(l, b);
        REQUIRE((l.transpose() * x2 - b).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + b.cwiseAbs().maxCoeff()));
        Mat x3 = solve_spd_with(l, b);
        REQUIRE((a * x3 - b).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + b.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("logdet matches the direct determinant") {
    Xoshiro256pp rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + static_cast<int>(rng.next_u64() % 4);
        Mat a = random_spd(rng, n);
        double ld = logdet_from_cholesky(cholesky_lower(a));
        REQUIRE(ld == Catch::Approx(std::log(a.determinant())).epsilon(1e-9));
    }
}

TEST_CASE("known 2x2 logdet") {
    Mat a(2, 2);
    a << 2.0, 0.0, 0.0, 2.0;
    REQUIRE(logdet_from_cholesky(cholesky_lower(a)) == Catch::Approx(1.3862943611198906).epsilon(1e-14));
}

TEST_CASE("non positive definite input throws") {
    Mat a(2, 2);
    a << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
    REQUIRE_THROWS_AS(cholesky_lower(a), NotPositiveDefiniteError);
    Mat zero = Mat::Zero(3, 3);
    REQUIRE_THROWS_AS(cholesky_lower(zero), NotPositiveDefiniteError);
}

TEST_CASE("asymmetric input beyond the gate is rejected") {
    Mat a(2, 2);
    a << 1.0, 0.1, 0.2, 1.0;
    REQUIRE_THROWS_AS(cholesky_lower(a), std::invalid_argument);
    REQUIRE_THROWS_AS(cholesky_with_jitter(a), std::invalid_argument);

    // roundoff-level asymmetry passes and is symmetrized internally
    Mat b(2, 2);
    b << 1.0, 0.5, 0.5 + 1e-12, 1.0;
    REQUIRE_NOTHROW(cholesky_lower(b));
}

TEST_CASE("jitter ladder leaves clean matrices untouched") {
    Mat a(2, 2);
    a << 4.0, 1.0, 1.0, 3.0;
    JitterResult r = cholesky_with_jitter(a);
    REQUIRE(r.jitter == 0.0);
    REQUIRE(r.ladder_index == 0);
    REQUIRE((r.factor - cholesky_lower(a)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jitter ladder escalates until the factorization succeeds") {
    // Rank-one 2x2: PSD but singular, needs some rung > 0.
    Vec v(2);
    v << 1.0, 2.0;
    Mat a = v * v.transpose();
    JitterResult r = cholesky_with_jitter(a);
    REQUIRE(r.jitter > 0.0);
    REQUIRE(r.ladder_index >= 1);
    double unit = a.trace() / 2.0;
    REQUIRE(r.jitter == kJitterLadder[static_cast<std::size_t>(r.ladder_index)] * unit);
    Mat jittered = a + r.jitter * Mat::Identity(2, 2);
    REQUIRE((r.factor * r.factor.transpose() - jittered).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jitter ladder gives up on indefinite matrices") {
    Mat a(2, 2);
    a << 1.0, 0.0, 0.0, -5.0;
    REQUIRE_THROWS_AS(cholesky_with_jitter(a), NotPositiveDefiniteError);
}

TEST_CASE("jitter rungs scale with trace over dimension") {
    // A tiny-scale singular matrix still factors once the relative rung kicks in.
    Vec v(3);
    v << 1e-6, 2e-6, -1e-6;
    Mat a = v * v.transpose();
    JitterResult r = cholesky_with_jitter(a);
    REQUIRE(r.jitter > 0.0);
    REQUIRE(r.jitter < 1e-11);  // relative, not absolute
}
