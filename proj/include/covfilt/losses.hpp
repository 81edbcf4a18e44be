#pragma once

#include <covfilt/autodiff.hpp>
#include <covfilt/common.hpp>
#include <covfilt/spd.hpp>

#include <stdexcept>
#include <vector>

namespace covfilt {

// Gaussian measurement losses. The normalization constant k/2 ln(2 pi) is
// omitted throughout; only differences of losses are ever compared.

struct LossReport {
    double total = 0.0;
    double quadratic = 0.0;      // 0.5 r^T Sigma^{-1} r
    double logdet = 0.0;         // 0.5 ln|Sigma|
    double jitter_applied = 0.0; // absolute diagonal increment, 0 when clean
};

// L = 0.5 r^T Sigma^{-1} r + 0.5 ln|Sigma|, r = label - mean. The covariance
// goes through the jitter ladder first; the increment that succeeds enters
// the tape as a constant, so gradients see the jittered matrix but the
// jitter magnitude itself is not differentiated.
inline ad::Ref gaussian_nll(ad::Tape& t, ad::Ref mean, ad::Ref covariance, const Vec& label,
                            LossReport* report = nullptr) {
    const Mat& mv = t.value(mean);
    const Mat& cv = t.value(covariance);
    const Eigen::Index k = label.size();
    if (mv.rows() != k || mv.cols() != 1)
        throw std::invalid_argument("gaussian_nll: mean must be " + std::to_string(k) + "x1, got " + shape_str(mv));
    if (cv.rows() != k || cv.cols() != k)
        throw std::invalid_argument("gaussian_nll: covariance must be " + std::to_string(k) + "x" + std::to_string(k) +
                                    ", got " + shape_str(cv));

    JitterResult probe = cholesky_with_jitter(cv);
    ad::Ref cov_used = probe.jitter > 0.0 ? ad::add(t, covariance, t.const_(Mat(probe.jitter * Mat::Identity(k, k))))
                                          : covariance;

    ad::Ref r = ad::sub(t, t.const_(Mat(label)), mean);
    ad::Ref x = ad::solve_spd(t, cov_used, r);
    ad::Ref quad = ad::scale(t, ad::matmul(t, ad::transpose(t, r), x), 0.5);
    ad::Ref ld = ad::scale(t, ad::logdet_spd(t, cov_used), 0.5);
    ad::Ref loss = ad::add(t, quad, ld);

    if (report) {
        report->quadratic = t.value(quad)(0, 0);
        report->logdet = t.value(ld)(0, 0);
        report->total = t.value(loss)(0, 0);
        report->jitter_applied = probe.jitter;
    }
    return loss;
}

// Same loss with the off-diagonals pinned at zero: the covariance is
// diag(variances).
inline ad::Ref diagonal_nll(ad::Tape& t, ad::Ref mean, ad::Ref variances, const Vec& label,
                            LossReport* report = nullptr) {
    const Mat& vv = t.value(variances);
    if (vv.cols() != 1 || vv.rows() != label.size())
        throw std::invalid_argument("diagonal_nll: variances must be " + std::to_string(label.size()) + "x1, got " +
                                    shape_str(vv));
    return gaussian_nll(t, mean, ad::diag_from_vec(t, variances), label, report);
}

// Plain-value counterpart for reporting and evaluation.
inline LossReport gaussian_nll_value(const Vec& mean, const Mat& covariance, const Vec& label) {
    JitterResult jr = cholesky_with_jitter(covariance);
    Vec r = label - mean;
    Mat x = solve_spd_with(jr.factor, Mat(r));
    LossReport rep;
    rep.quadratic = 0.5 * (r.transpose() * x)(0, 0);
    rep.logdet = 0.5 * logdet_from_cholesky(jr.factor);
    rep.total = rep.quadratic + rep.logdet;
    rep.jitter_applied = jr.jitter;
    return rep;
}

// Mean squared error of selected state components over the steps after the
// burn-in, normalized by (steps kept * components kept):
//   L = 1/(W |S|) sum_{t >= burn_in} sum_{b in S} (zhat_t[b] - z_t[b])^2
inline ad::Ref state_estimate_loss(ad::Tape& t, const std::vector<ad::Ref>& estimates, const std::vector<Vec>& truths,
                                   const std::vector<int>& subset, int burn_in) {
    if (estimates.size() != truths.size())
        throw std::invalid_argument("state_estimate_loss: " + std::to_string(estimates.size()) + " estimates vs " +
                                    std::to_string(truths.size()) + " reference states");
    if (estimates.empty()) throw std::invalid_argument("state_estimate_loss: empty sequence");
    if (burn_in < 0) throw std::invalid_argument("state_estimate_loss: negative burn-in");
    if (static_cast<std::size_t>(burn_in) >= estimates.size())
        throw std::invalid_argument("state_estimate_loss: no steps remain after burn-in of " +
                                    std::to_string(burn_in));
    if (subset.empty()) throw std::invalid_argument("state_estimate_loss: empty component subset");

    const Eigen::Index n = t.value(estimates[0]).rows();
    Mat selector = Mat::Zero(static_cast<Eigen::Index>(subset.size()), n);
    for (std::size_t i = 0; i < subset.size(); ++i) {
        if (subset[i] < 0 || subset[i] >= n)
            throw std::invalid_argument("state_estimate_loss: component index " + std::to_string(subset[i]) +
                                        " out of range for state dimension " + std::to_string(n));
        selector(static_cast<Eigen::Index>(i), subset[i]) = 1.0;
    }
    ad::Ref sel = t.const_(selector);

    ad::Ref acc = t.const_(Mat::Zero(1, 1));
    std::size_t kept = 0;
    for (std::size_t i = static_cast<std::size_t>(burn_in); i < estimates.size(); ++i) {
        if (truths[i].size() != n)
            throw std::invalid_argument("state_estimate_loss: reference state size mismatch at step " +
                                        std::to_string(i));
        ad::Ref err = ad::matmul(t, sel, ad::sub(t, estimates[i], t.const_(Mat(truths[i]))));
        acc = ad::add(t, acc, ad::sum(t, ad::hadamard(t, err, err)));
        ++kept;
    }
    return ad::scale(t, acc, 1.0 / (static_cast<double>(kept) * static_cast<double>(subset.size())));
}

}  // namespace covfilt
