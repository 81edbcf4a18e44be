#pragma once

// Batch information-form state estimator used as an independent oracle for
// the recursive filter. Builds the joint Gaussian over the whole trajectory
// with Eigen's own decompositions (LDLT, pseudo-inverse), none of the
// library's kernels, and reads off the final-time marginal. For a linear
// Gaussian model the filter posterior after the last measurement must match
// the batch marginal at that time.

#include <covfilt/common.hpp>
#include <covfilt/kalman.hpp>

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace oracles {

using covfilt::Mat;
using covfilt::Vec;

struct BatchResult {
    Vec mean;  // final-time marginal mean
    Mat cov;   // final-time marginal covariance
};

// Trajectory variables z_0 .. z_T with prior N(mu0, P0) on z_0, dynamics
// z_{t+1} = F z_t + w (w ~ N(0, Q), Q must be PD here) and measurements
// m_1 .. m_T observed at times 1 .. T.
inline BatchResult batch_estimate(const Mat& F, const Mat& H, const Mat& Q, const Vec& mu0, const Mat& P0,
                                  const std::vector<Vec>& measurements, const std::vector<Mat>& covariances) {
    const Eigen::Index n = F.rows();
    const auto T = static_cast<Eigen::Index>(measurements.size());
    if (T < 1) throw std::invalid_argument("batch_estimate: need at least one measurement");

    const Eigen::Index dim = n * (T + 1);
    Mat J = Mat::Zero(dim, dim);
    Vec h = Vec::Zero(dim);

    Mat p0_inv = P0.inverse();
    J.block(0, 0, n, n) += p0_inv;
    h.segment(0, n) += p0_inv * mu0;

    Mat q_inv = Q.inverse();
    for (Eigen::Index t = 0; t < T; ++t) {
        const Eigen::Index a = n * t;
        const Eigen::Index b = n * (t + 1);
        J.block(a, a, n, n) += F.transpose() * q_inv * F;
        J.block(a, b, n, n) += -F.transpose() * q_inv;
        J.block(b, a, n, n) += -q_inv * F;
        J.block(b, b, n, n) += q_inv;
    }
    for (Eigen::Index t = 1; t <= T; ++t) {
        const Eigen::Index b = n * t;
        Mat s_inv = covariances[static_cast<std::size_t>(t - 1)].inverse();
        J.block(b, b, n, n) += H.transpose() * s_inv * H;
        h.segment(b, n) += H.transpose() * s_inv * measurements[static_cast<std::size_t>(t - 1)];
    }

    Eigen::LDLT<Mat> ldlt(J);
    Vec mean_full = ldlt.solve(h);
    Mat cov_full = ldlt.solve(Mat::Identity(dim, dim));

    BatchResult out;
    out.mean = mean_full.segment(n * T, n);
    out.cov = cov_full.block(n * T, n * T, n, n);
    return out;
}

// The filter's first-measurement init expressed as an explicit prior, built
// with Eigen's pseudo-inverse rather than the library's.
inline std::pair<Vec, Mat> first_measurement_prior(const Mat& H, double sigma_v_max, const Vec& m0, const Mat& s0) {
    const Eigen::Index n = H.cols();
    Mat hp = H.completeOrthogonalDecomposition().pseudoInverse();
    Vec z0 = hp * m0;
    Mat p0 = hp * s0 * hp.transpose() + sigma_v_max * sigma_v_max * (Mat::Identity(n, n) - hp * H);
    return {z0, covfilt::symmetrize(p0)};
}

}  // namespace oracles
