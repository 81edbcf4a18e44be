#include <covfilt/losses.hpp>
#include <covfilt/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "fd.hpp"

#include <cmath>

using namespace covfilt;
namespace a = covfilt::ad;

TEST_CASE("gaussian_nll matches the hand-computed bivariate example") {
    // residual (1, 1), unit variances, correlation 0.5:
    //   quadratic = 0.5 * r^T Sigma^{-1} r = 2/3
    //   logdet    = 0.5 * ln(0.75)
    Mat cov(2, 2);
    cov << 1.0, 0.5, 0.5, 1.0;
    Vec label(2);
    label << 1.0, 1.0;

    a::Tape t;
    LossReport rep;
    a::Ref loss = gaussian_nll(t, t.param(Mat(Mat::Zero(2, 1))), t.param(cov), label, &rep);
    REQUIRE(t.value(loss)(0, 0) == Catch::Approx(0.5228256304407763).epsilon(1e-14));
    REQUIRE(rep.quadratic == Catch::Approx(0.6666666666666667).epsilon(1e-14));
    REQUIRE(rep.logdet == Catch::Approx(-0.14384103622589045).epsilon(1e-12));
    REQUIRE(rep.total == Catch::Approx(rep.quadratic + rep.logdet).epsilon(1e-14));
    REQUIRE(rep.jitter_applied == 0.0);

    LossReport plain = gaussian_nll_value(Vec::Zero(2), cov, label);
    REQUIRE(plain.total == t.value(loss)(0, 0));
    REQUIRE(plain.quadratic == rep.quadratic);
    REQUIRE(plain.logdet == rep.logdet);
}

TEST_CASE("gaussian_nll gradients pass finite differences through the covariance parameterization") {
    Xoshiro256pp rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        int k = 1 + static_cast<int>(rng.next_u64() % 3);
        Mat mean(k, 1), s(k, 1), r(k * (k - 1) / 2, 1);
        Vec label(k);
        for (int i = 0; i < k; ++i) {
            mean(i, 0) = rng.normal();
            s(i, 0) = 0.5 * rng.normal();
            label[i] = rng.normal();
        }
        // For k >= 3 jointly extreme correlations can leave the PD cone
        // entirely; keep logits in the always-consistent range.
        for (Eigen::Index i = 0; i < r.rows(); ++i) r(i, 0) = k <= 2 ? rng.normal() : 0.4 * rng.uniform(-1.0, 1.0);

        fd::check_gradients(
            [&](a::Tape& t, const std::vector<a::Ref>& p) {
                a::Ref cov = a::cov_from_logits(t, p[1], p[2], 0.99);
                return gaussian_nll(t, p[0], cov, label);
            },
            {{mean}, {s}, {r}}, 1e-6, 1e-4);
    }
}

TEST_CASE("gaussian_nll gradients pass finite differences for a raw covariance matrix") {
    Xoshiro256pp rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        int k = 2 + static_cast<int>(rng.next_u64() % 2);
        Mat m = Mat::NullaryExpr(k, k, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
        Mat cov = symmetrize(m * m.transpose()) + 0.8 * Mat::Identity(k, k);
        Mat mean = Mat::Zero(k, 1);
        Vec label(k);
        for (int i = 0; i < k; ++i) label[i] = rng.normal();
        fd::check_gradients(
            [&](a::Tape& t, const std::vector<a::Ref>& p) { return gaussian_nll(t, p[0], p[1], label); },
            {{mean}, {cov, true}}, 1e-6, 1e-5);
    }
}

TEST_CASE("diagonal_nll equals gaussian_nll with a diagonal covariance") {
    Xoshiro256pp rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        int k = 1 + static_cast<int>(rng.next_u64() % 3);
        Mat mean(k, 1), vars(k, 1);
        Vec label(k);
        for (int i = 0; i < k; ++i) {
            mean(i, 0) = rng.normal();
            vars(i, 0) = std::exp(rng.normal());
            label[i] = rng.normal();
        }
        a::Tape t1;
        a::Ref l1 = diagonal_nll(t1, t1.param(mean), t1.param(vars), label);
        a::Tape t2;
        Mat cov = Mat::Zero(k, k);
        cov.diagonal() = vars.col(0);
        a::Ref l2 = gaussian_nll(t2, t2.param(mean), t2.param(cov), label);
        REQUIRE(std::abs(t1.value(l1)(0, 0) - t2.value(l2)(0, 0)) < 1e-12);
    }
}

TEST_CASE("diagonal_nll gradients pass finite differences") {
    Xoshiro256pp rng(34);
    Mat mean(3, 1), s(3, 1);
    Vec label(3);
    for (int i = 0; i < 3; ++i) {
        mean(i, 0) = rng.normal();
        s(i, 0) = 0.3 * rng.normal();
        label[i] = rng.normal();
    }
    fd::check_gradients(
        [&](a::Tape& t, const std::vector<a::Ref>& p) {
            return diagonal_nll(t, p[0], a::exp(t, p[1]), label);
        },
        {{mean}, {s}}, 1e-6, 1e-5);
}

TEST_CASE("singular covariance triggers jitter, reported and finite") {
    Vec v(2);
    v << 1.0, 2.0;
    Mat cov = v * v.transpose();  // rank one
    Vec label(2);
    label << 0.5, -0.5;

    a::Tape t;
    LossReport rep;
    a::Ref mean = t.param(Mat(Mat::Zero(2, 1)));
    a::Ref loss = gaussian_nll(t, mean, t.param(cov), label, &rep);
    REQUIRE(rep.jitter_applied > 0.0);
    REQUIRE(std::isfinite(t.value(loss)(0, 0)));
    t.backward(loss);
    REQUIRE(t.adjoint(mean).allFinite());
}

TEST_CASE("state_estimate_loss value matches direct computation") {
    a::Tape t;
    std::vector<a::Ref> estimates;
    std::vector<Vec> truths;
    // three steps, state dim 2, subset {1}, burn-in 1
    Mat e0(2, 1), e1(2, 1), e2(2, 1);
    e0 << 10.0, 1.0;
    e1 << 0.0, 2.0;
    e2 << 0.0, -1.0;
    estimates = {t.param(e0), t.param(e1), t.param(e2)};
    truths = {Vec::Zero(2), Vec::Zero(2), Vec::Zero(2)};
    a::Ref loss = state_estimate_loss(t, estimates, truths, {1}, 1);
    // kept steps: (2)^2 and (-1)^2 over 2 steps * 1 component
    REQUIRE(t.value(loss)(0, 0) == Catch::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("state_estimate_loss gradients pass finite differences") {
    Xoshiro256pp rng(35);
    std::vector<Vec> truths;
    std::vector<Mat> est_values;
    for (int i = 0; i < 4; ++i) {
        Vec z(3);
        Mat e(3, 1);
        for (int d = 0; d < 3; ++d) {
            z[d] = rng.normal();
            e(d, 0) = rng.normal();
        }
        truths.push_back(z);
        est_values.push_back(e);
    }
    fd::check_gradients(
        [&](a::Tape& t, const std::vector<a::Ref>& p) {
            std::vector<a::Ref> est(p.begin(), p.end());
            return state_estimate_loss(t, est, truths, {0, 2}, 1);
        },
        {{est_values[0]}, {est_values[1]}, {est_values[2]}, {est_values[3]}});
}

TEST_CASE("state_estimate_loss validates its inputs") {
    a::Tape t;
    std::vector<a::Ref> est{t.param(Mat(Mat::Zero(2, 1)))};
    std::vector<Vec> truths{Vec::Zero(2)};
    REQUIRE_THROWS_AS(state_estimate_loss(t, est, truths, {0}, 1), std::invalid_argument);   // burn-in eats all
    REQUIRE_THROWS_AS(state_estimate_loss(t, est, truths, {}, 0), std::invalid_argument);    // empty subset
    REQUIRE_THROWS_AS(state_estimate_loss(t, est, truths, {5}, 0), std::invalid_argument);   // bad index
    std::vector<Vec> short_truths;
    REQUIRE_THROWS_AS(state_estimate_loss(t, est, short_truths, {0}, 0), std::invalid_argument);
}

TEST_CASE("loss decomposition adds up") {
    Xoshiro256pp rng(36);
    for (int trial = 0; trial < 10; ++trial) {
        Mat m = Mat::NullaryExpr(3, 3, [&](Eigen::Index, Eigen::Index) { return rng.normal(); });
        Mat cov = symmetrize(m * m.transpose()) + 0.5 * Mat::Identity(3, 3);
        Vec mean = Vec::Zero(3);
        Vec label(3);
        for (int i = 0; i < 3; ++i) label[i] = rng.normal();
        LossReport rep = gaussian_nll_value(mean, cov, label);
        REQUIRE(rep.total == Catch::Approx(rep.quadratic + rep.logdet).epsilon(1e-14));
        REQUIRE(rep.quadratic >= 0.0);
    }
}
