#pragma once

#include <covfilt/common.hpp>
#include <covfilt/model.hpp>
#include <covfilt/rng.hpp>

#include <stdexcept>
#include <vector>

namespace covfilt {

// Epistemic uncertainty from dropout resampling. N stochastic forwards give
// means f_n and covariances Sigma_n; the spread of the means is the
// epistemic part, the average covariance the aleatoric part:
//   Sigma_epi  = 1/N sum f_n f_n^T - 1/N^2 (sum f_n)(sum f_n)^T
//   Sigma_alea = 1/N sum Sigma_n
//   Sigma_pred = Sigma_epi + Sigma_alea

struct EpistemicEstimate {
    Vec mean;        // average of the sampled means
    Mat epistemic;
    Mat aleatoric;
    Mat predictive;  // epistemic + aleatoric, summed entrywise
    int samples = 0;
};

inline EpistemicEstimate combine_gaussian_samples(const std::vector<GaussianPrediction>& samples) {
    if (samples.empty()) throw std::invalid_argument("combine_gaussian_samples: no samples");
    const Eigen::Index k = samples[0].mean.size();
    const double n = static_cast<double>(samples.size());
    Vec sum_f = Vec::Zero(k);
    Mat sum_ff = Mat::Zero(k, k);
    Mat sum_cov = Mat::Zero(k, k);
    for (const GaussianPrediction& s : samples) {
        if (s.mean.size() != k || s.covariance.rows() != k || s.covariance.cols() != k)
            throw std::invalid_argument("combine_gaussian_samples: sample shape mismatch");
        sum_f += s.mean;
        sum_ff += s.mean * s.mean.transpose();
        sum_cov += s.covariance;
    }
    EpistemicEstimate est;
    est.samples = static_cast<int>(samples.size());
    est.mean = sum_f / n;
    est.epistemic = sum_ff / n - (sum_f * sum_f.transpose()) / (n * n);
    est.aleatoric = sum_cov / n;
    est.predictive = est.epistemic + est.aleatoric;
    return est;
}

// N dropout forwards with per-sample mask streams derived from (seed, n);
// the result does not depend on where else the seed has been used.
inline EpistemicEstimate predict_with_epistemic(const ModelParams& p, const Vec& x, int n_samples,
                                                std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("predict_with_epistemic: need at least one sample");
    std::vector<GaussianPrediction> samples;
    samples.reserve(static_cast<std::size_t>(n_samples));
    for (int n = 0; n < n_samples; ++n) {
        Xoshiro256pp rng(seed, static_cast<std::uint64_t>(n));
        DropoutMask mask = sample_dropout_mask(p, rng);
        samples.push_back(predict(p, x, &mask));
    }
    return combine_gaussian_samples(samples);
}

}  // namespace covfilt
