#include <covfilt/rng.hpp>
#include <covfilt/spd.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace covfilt;

TEST_CASE("same seed and stream reproduce the sequence exactly") {
    Xoshiro256pp a(1234, 7);
    Xoshiro256pp b(1234, 7);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Xoshiro256pp c(1234, 7);
    Xoshiro256pp d(1234, 7);
    for (int i = 0; i < 100; ++i) REQUIRE(c.normal() == d.normal());
}

TEST_CASE("different streams differ") {
    Xoshiro256pp a(1234, 0);
    Xoshiro256pp b(1234, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    REQUIRE(same == 0);
}

TEST_CASE("uniform01 stays in [0, 1) and covers the range") {
    Xoshiro256pp rng(42);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    REQUIRE(lo < 0.01);
    REQUIRE(hi > 0.99);
}

TEST_CASE("uniform(a, b) respects bounds") {
    Xoshiro256pp rng(43);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform(-3.0, 5.0);
        REQUIRE(u >= -3.0);
        REQUIRE(u <= 5.0);
    }
}

TEST_CASE("normal variates match N(0, 1) moments") {
    Xoshiro256pp rng(7);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, sumcube = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sumsq += z * z;
        sumcube += z * z * z;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    double skew = sumcube / n;
    // Monte-Carlo tolerances: sd(mean) ~ 1/sqrt(n) ~ 0.0022
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
    REQUIRE(std::abs(skew) < 0.03);
}

TEST_CASE("mvn samples reproduce the requested covariance") {
    Mat cov(2, 2);
    cov << 4.0, 1.2, 1.2, 2.0;
    Vec mean(2);
    mean << -1.0, 3.0;
    Mat l = cholesky_lower(cov);

    Xoshiro256pp rng(99);
    const int n = 100000;
    Vec acc = Vec::Zero(2);
    Mat acc2 = Mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        Vec s = rng.mvn(mean, l);
        acc += s;
        acc2 += s * s.transpose();
    }
    Vec m = acc / n;
    Mat c = acc2 / n - m * m.transpose();
    REQUIRE((m - mean).cwiseAbs().maxCoeff() < 0.03);
    REQUIRE((c - cov).cwiseAbs().maxCoeff() < 0.08);
}

TEST_CASE("splitmix64 matches the published seed-0 output") {
    SplitMix64 sm(0);
    REQUIRE(sm.next() == 0xE220A8397B1DCDAFULL);
}
