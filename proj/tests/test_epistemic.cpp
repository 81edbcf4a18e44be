#include <covfilt/epistemic.hpp>
#include <covfilt/rng.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

using namespace covfilt;

namespace {

ModelParams tiny_model(std::uint64_t seed, double dropout) {
    return make_model(4, 2, {16, 16}, dropout, 0.95, seed);
}

}  // namespace

TEST_CASE("two-sample decomposition matches the closed form") {
    // Means {0, 2} with unit covariances: per-coordinate spread is 1, so the
    // predictive diagonal is exactly 2. The sample means move in lockstep, so
    // the epistemic term carries full cross-coordinate correlation.
    std::vector<GaussianPrediction> samples(2);
    samples[0].mean = Vec::Zero(2);
    samples[0].covariance = Mat::Identity(2, 2);
    samples[1].mean = Vec::Constant(2, 2.0);
    samples[1].covariance = Mat::Identity(2, 2);

    EpistemicEstimate est = combine_gaussian_samples(samples);
    REQUIRE(est.samples == 2);
    REQUIRE((est.mean - Vec::Constant(2, 1.0)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((est.aleatoric - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((est.epistemic - Mat::Ones(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((est.predictive.diagonal() - Vec::Constant(2, 2.0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predictive covariance is exactly epistemic plus aleatoric") {
    Xoshiro256pp rng(71);
    std::vector<GaussianPrediction> samples;
    for (int i = 0; i < 17; ++i) {
        GaussianPrediction p;
        p.mean = rng.normal_vec(3);
        Mat a(3, 3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) = rng.normal();
        p.covariance = symmetrize(a * a.transpose()) + 0.1 * Mat::Identity(3, 3);
        samples.push_back(std::move(p));
    }
    EpistemicEstimate est = combine_gaussian_samples(samples);
    REQUIRE((est.predictive - (est.epistemic + est.aleatoric)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(relative_asymmetry(est.epistemic) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(est.epistemic);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("a single sample has zero epistemic spread") {
    std::vector<GaussianPrediction> samples(1);
    samples[0].mean = Vec::Constant(3, 1.5);
    samples[0].covariance = 2.0 * Mat::Identity(3, 3);
    EpistemicEstimate est = combine_gaussian_samples(samples);
    REQUIRE(est.epistemic.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((est.predictive - samples[0].covariance).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("combining is invariant to sample order") {
    Xoshiro256pp rng(72);
    std::vector<GaussianPrediction> samples;
    for (int i = 0; i < 9; ++i) {
        GaussianPrediction p;
        p.mean = rng.normal_vec(2);
        p.covariance = Mat::Identity(2, 2) * (0.5 + rng.uniform01());
        samples.push_back(std::move(p));
    }
    EpistemicEstimate fwd = combine_gaussian_samples(samples);
    std::reverse(samples.begin(), samples.end());
    EpistemicEstimate rev = combine_gaussian_samples(samples);
    REQUIRE((fwd.mean - rev.mean).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((fwd.epistemic - rev.epistemic).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((fwd.aleatoric - rev.aleatoric).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("combine rejects empty input") {
    REQUIRE_THROWS_AS(combine_gaussian_samples({}), std::invalid_argument);
}

TEST_CASE("dropout sampling is deterministic in the seed") {
    ModelParams model = tiny_model(11, 0.3);
    Vec x = Vec::LinSpaced(4, -1.0, 1.0);
    EpistemicEstimate a = predict_with_epistemic(model, x, 30, 123);
    EpistemicEstimate b = predict_with_epistemic(model, x, 30, 123);
    REQUIRE((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((a.epistemic - b.epistemic).cwiseAbs().maxCoeff() == 0.0);
    EpistemicEstimate c = predict_with_epistemic(model, x, 30, 124);
    REQUIRE((a.epistemic - c.epistemic).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zero dropout collapses the epistemic term") {
    ModelParams model = tiny_model(12, 0.0);
    Vec x = Vec::Constant(4, 0.3);
    EpistemicEstimate est = predict_with_epistemic(model, x, 20, 5);
    REQUIRE(est.epistemic.cwiseAbs().maxCoeff() < 1e-14);
    GaussianPrediction det = predict(model, x);
    REQUIRE((est.mean - det.mean).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE((est.aleatoric - det.covariance).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("active dropout produces a nonzero epistemic term") {
    ModelParams model = tiny_model(13, 0.4);
    Vec x = Vec::Constant(4, -0.5);
    EpistemicEstimate est = predict_with_epistemic(model, x, 50, 9);
    REQUIRE(est.samples == 50);
    REQUIRE(est.epistemic.trace() > 0.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(est.epistemic);
    REQUIRE(es.eigenvalues().minCoeff() > -1e-12);
}
