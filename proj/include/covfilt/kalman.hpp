#pragma once

#include <covfilt/autodiff.hpp>
#include <covfilt/common.hpp>
#include <covfilt/io.hpp>
#include <covfilt/spd.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace covfilt {

// Linear Kalman filter with per-step measurement covariances, in two
// interchangeable forms: a plain recursion and a tape-based one whose state
// estimates can be differentiated with respect to the measurement
// covariances (and measurements). Both paths execute the same operation
// sequence on the same kernels, so their results agree bitwise.
//
// One step fuses predict and update:
//   zp = F z            Pp = F P F^T + Q
//   i  = m - H zp       S  = Sigma + H Pp H^T
//   K  = Pp H^T S^{-1}  (via Cholesky solves against S)
//   z' = zp + K i       P' = (I - K H) Pp, symmetrized
// The gain uses the predicted covariance including Q; with Q = 0 it reduces
// to F P (H F)^T S^{-1}.

struct FilterSpec {
    Mat F, H, Q;

    enum class Init {
        FirstMeasurement,  // state from the pseudo-inverse of H at the first measurement
        Explicit,          // caller-provided z0, P0
    };
    Init init = Init::FirstMeasurement;
    Vec z0;
    Mat P0;
    // Prior standard deviation for state directions the first measurement
    // does not observe (FirstMeasurement init only).
    double sigma_v_max = 200.0;
    // Optional Joseph-form posterior update (I-KH)Pp(I-KH)^T + K Sigma K^T.
    bool joseph_update = false;

    Eigen::Index state_dim() const { return F.rows(); }
    Eigen::Index meas_dim() const { return H.rows(); }
};

inline void validate_spec(const FilterSpec& spec) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("filter spec: " + msg); };
    const Eigen::Index n = spec.F.rows();
    const Eigen::Index k = spec.H.rows();
    if (n == 0 || spec.F.cols() != n) fail("F must be square and nonempty, got " + shape_str(spec.F));
    if (k == 0 || spec.H.cols() != n) fail("H must be k x n with k >= 1, got " + shape_str(spec.H));
    if (spec.Q.rows() != n || spec.Q.cols() != n) fail("Q must be n x n, got " + shape_str(spec.Q));
    if (relative_asymmetry(spec.Q) > kMaxRelativeAsymmetry) fail("Q is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(spec.Q));
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
        fail("Q is not positive semidefinite");
    if (spec.init == FilterSpec::Init::Explicit) {
        if (spec.z0.size() != n) fail("explicit init requires z0 of size n");
        if (spec.P0.rows() != n || spec.P0.cols() != n) fail("explicit init requires P0 of shape n x n");
        check_symmetric(spec.P0, "filter spec P0");
        cholesky_with_jitter(spec.P0);  // must be factorable
    } else {
        if (!(spec.sigma_v_max > 0.0)) fail("sigma_v_max must be positive");
    }
}

struct FilterState {
    Vec z;
    Mat P;
    int t = 0;  // measurements consumed
};

struct StepTrace {
    Vec innovation;
    Mat innovation_cov;
    Mat gain;
    double jitter = 0.0;     // diagonal increment applied to the measurement covariance
    bool init_step = false;  // true when the measurement seeded the state instead of updating it
};

struct FilterRun {
    std::vector<FilterState> states;  // posterior after each measurement
    std::vector<StepTrace> traces;
};

namespace detail {

// Pseudo-inverse of a full-row-rank H: H^+ = H^T (H H^T)^{-1}.
inline Mat pinv_rows(const Mat& h) {
    Mat ht = h.transpose();
    Mat hht = h * ht;
    Mat l;
    try {
        l = cholesky_lower(hht);
    } catch (const NotPositiveDefiniteError&) {
        throw std::invalid_argument("filter init: H does not have full row rank");
    }
    return Mat(solve_spd_with(l, h)).transpose();
}

inline void check_measurement(const FilterSpec& spec, const Vec& m, const Mat& sigma) {
    if (m.size() != spec.meas_dim())
        throw std::invalid_argument("filter: measurement has size " + std::to_string(m.size()) + ", expected " +
                                    std::to_string(spec.meas_dim()));
    if (sigma.rows() != spec.meas_dim() || sigma.cols() != spec.meas_dim())
        throw std::invalid_argument("filter: measurement covariance has shape " + shape_str(sigma) + ", expected " +
                                    std::to_string(spec.meas_dim()) + "x" + std::to_string(spec.meas_dim()));
    check_symmetric(sigma, "filter measurement covariance");
}

}  // namespace detail

// One fused predict + update. The measurement covariance passes through the
// jitter ladder; the applied increment lands in the trace.
inline std::pair<FilterState, StepTrace> step(const FilterSpec& spec, const FilterState& state, const Vec& m,
                                              const Mat& sigma) {
    detail::check_measurement(spec, m, sigma);
    if (state.z.size() != spec.state_dim() || state.P.rows() != spec.state_dim())
        throw std::invalid_argument("filter: state does not match spec dimensions");

    const Eigen::Index n = spec.state_dim();
    JitterResult probe = cholesky_with_jitter(sigma);
    Mat sigma_used = probe.jitter > 0.0
                         ? Mat(sigma + probe.jitter * Mat::Identity(sigma.rows(), sigma.cols()))
                         : sigma;

    // Mirrors the tape path: n x 1 matrices for vectors, transposes
    // materialized, every product a plain matrix product.
    Mat z = state.z;
    Mat ft = spec.F.transpose();
    Mat zp = spec.F * z;
    Mat fp = spec.F * state.P;
    Mat pp = fp * ft + spec.Q;

    Mat ht = spec.H.transpose();
    Mat innovation = Mat(m) - spec.H * zp;
    Mat b = spec.H * pp;
    Mat s = sigma_used + b * ht;
    s = 0.5 * (s + Mat(s.transpose()));

    Mat ls = cholesky_lower(s);
    Mat ppt = pp.transpose();
    Mat kt = solve_spd_with(ls, Mat(spec.H * ppt));
    Mat k = kt.transpose();

    Mat znew = zp + k * innovation;
    Mat pnew;
    if (spec.joseph_update) {
        Mat ikh = Mat::Identity(n, n) - k * spec.H;
        Mat ikht = ikh.transpose();
        Mat kk = k * sigma_used;
        Mat kkt = k.transpose();
        pnew = Mat(Mat(ikh * pp) * ikht) + Mat(kk * kkt);
    } else {
        Mat ikh = Mat::Identity(n, n) - k * spec.H;
        pnew = ikh * pp;
    }
    pnew = 0.5 * (pnew + Mat(pnew.transpose()));

    FilterState out{Vec(znew.col(0)), pnew, state.t + 1};
    StepTrace trace{Vec(innovation.col(0)), s, k, probe.jitter, false};
    return {std::move(out), std::move(trace)};
}

// Initial state from the first measurement: the observed subspace comes from
// H^+ m with covariance H^+ Sigma H^+T, the unobserved complement gets a
// diffuse sigma_v_max^2 prior.
inline std::pair<FilterState, StepTrace> init_from_measurement(const FilterSpec& spec, const Vec& m,
                                                               const Mat& sigma) {
    detail::check_measurement(spec, m, sigma);
    const Eigen::Index n = spec.state_dim();
    JitterResult probe = cholesky_with_jitter(sigma);
    Mat sigma_used = probe.jitter > 0.0
                         ? Mat(sigma + probe.jitter * Mat::Identity(sigma.rows(), sigma.cols()))
                         : sigma;
    Mat hp = detail::pinv_rows(spec.H);
    Mat hpt = hp.transpose();
    Mat z0 = hp * Mat(m);
    Mat complement = spec.sigma_v_max * spec.sigma_v_max * (Mat::Identity(n, n) - hp * spec.H);
    Mat p0 = Mat(Mat(hp * sigma_used) * hpt) + complement;
    p0 = 0.5 * (p0 + Mat(p0.transpose()));

    FilterState out{Vec(z0.col(0)), p0, 1};
    StepTrace trace{Vec::Zero(spec.meas_dim()), sigma_used, hp, probe.jitter, true};
    return {std::move(out), std::move(trace)};
}

inline FilterState initial_state(const FilterSpec& spec) {
    if (spec.init != FilterSpec::Init::Explicit)
        throw std::logic_error("initial_state: spec does not carry an explicit init");
    return FilterState{spec.z0, spec.P0, 0};
}

inline FilterRun run_filter(const FilterSpec& spec, const std::vector<Vec>& measurements,
                            const std::vector<Mat>& covariances) {
    validate_spec(spec);
    if (measurements.size() != covariances.size())
        throw std::invalid_argument("run_filter: " + std::to_string(measurements.size()) + " measurements vs " +
                                    std::to_string(covariances.size()) + " covariances");
    if (measurements.empty()) throw std::invalid_argument("run_filter: empty measurement sequence");

    FilterRun run;
    std::size_t start = 0;
    FilterState state;
    if (spec.init == FilterSpec::Init::FirstMeasurement) {
        auto [s0, t0] = init_from_measurement(spec, measurements[0], covariances[0]);
        state = std::move(s0);
        run.states.push_back(state);
        run.traces.push_back(std::move(t0));
        start = 1;
    } else {
        state = initial_state(spec);
    }
    for (std::size_t i = start; i < measurements.size(); ++i) {
        auto [s, tr] = step(spec, state, measurements[i], covariances[i]);
        state = std::move(s);
        run.states.push_back(state);
        run.traces.push_back(std::move(tr));
    }
    return run;
}

// Tape-based filter. States and posteriors are tape refs; gradients flow
// into whichever measurement/covariance refs are tape params.
struct DiffFilterRun {
    std::vector<ad::Ref> states;       // n x 1 posterior per measurement
    std::vector<ad::Ref> covariances;  // n x n posterior per measurement
    std::vector<ad::Ref> innovations;
    std::vector<ad::Ref> innovation_covs;
    std::vector<ad::Ref> gains;
    std::vector<double> jitter;
};

namespace detail {

// Ladder probe on the tape value; the increment enters the tape as a const.
inline std::pair<ad::Ref, double> jittered_cov_ref(ad::Tape& t, ad::Ref sigma) {
    JitterResult probe = cholesky_with_jitter(t.value(sigma));
    if (probe.jitter <= 0.0) return {sigma, 0.0};
    Eigen::Index k = t.value(sigma).rows();
    return {ad::add(t, sigma, t.const_(Mat(probe.jitter * Mat::Identity(k, k)))), probe.jitter};
}

struct DiffStep {
    ad::Ref z, P, innovation, s, gain;
    double jitter;
};

inline DiffStep step_diff(ad::Tape& t, const FilterSpec& spec, ad::Ref z, ad::Ref p, ad::Ref m, ad::Ref sigma) {
    const Eigen::Index n = spec.state_dim();
    auto [sigma_used, jit] = jittered_cov_ref(t, sigma);

    ad::Ref f = t.const_(spec.F);
    ad::Ref ft = t.const_(Mat(spec.F.transpose()));
    ad::Ref h = t.const_(spec.H);
    ad::Ref ht = t.const_(Mat(spec.H.transpose()));
    ad::Ref q = t.const_(spec.Q);

    ad::Ref zp = ad::matmul(t, f, z);
    ad::Ref fp = ad::matmul(t, f, p);
    ad::Ref pp = ad::add(t, ad::matmul(t, fp, ft), q);

    ad::Ref innovation = ad::sub(t, m, ad::matmul(t, h, zp));
    ad::Ref b = ad::matmul(t, h, pp);
    ad::Ref s = ad::add(t, sigma_used, ad::matmul(t, b, ht));
    s = ad::scale(t, ad::add(t, s, ad::transpose(t, s)), 0.5);

    ad::Ref ppt = ad::transpose(t, pp);
    ad::Ref kt = ad::solve_spd(t, s, ad::matmul(t, h, ppt));
    ad::Ref k = ad::transpose(t, kt);

    ad::Ref znew = ad::add(t, zp, ad::matmul(t, k, innovation));
    ad::Ref pnew;
    if (spec.joseph_update) {
        ad::Ref ikh = ad::sub(t, t.const_(Mat(Mat::Identity(n, n))), ad::matmul(t, k, h));
        ad::Ref ikht = ad::transpose(t, ikh);
        ad::Ref kk = ad::matmul(t, k, sigma_used);
        ad::Ref kkt = ad::transpose(t, k);
        pnew = ad::add(t, ad::matmul(t, ad::matmul(t, ikh, pp), ikht), ad::matmul(t, kk, kkt));
    } else {
        ad::Ref ikh = ad::sub(t, t.const_(Mat(Mat::Identity(n, n))), ad::matmul(t, k, h));
        pnew = ad::matmul(t, ikh, pp);
    }
    pnew = ad::scale(t, ad::add(t, pnew, ad::transpose(t, pnew)), 0.5);

    return {znew, pnew, innovation, s, k, jit};
}

inline std::pair<ad::Ref, ad::Ref> init_from_measurement_diff(ad::Tape& t, const FilterSpec& spec, ad::Ref m,
                                                              ad::Ref sigma, double* jitter_out) {
    const Eigen::Index n = spec.state_dim();
    auto [sigma_used, jit] = jittered_cov_ref(t, sigma);
    if (jitter_out) *jitter_out = jit;
    Mat hp = pinv_rows(spec.H);
    ad::Ref hp_ref = t.const_(hp);
    ad::Ref hpt_ref = t.const_(Mat(hp.transpose()));
    ad::Ref z0 = ad::matmul(t, hp_ref, m);
    Mat complement = spec.sigma_v_max * spec.sigma_v_max * (Mat::Identity(n, n) - hp * spec.H);
    ad::Ref p0 = ad::add(t, ad::matmul(t, ad::matmul(t, hp_ref, sigma_used), hpt_ref), t.const_(complement));
    p0 = ad::scale(t, ad::add(t, p0, ad::transpose(t, p0)), 0.5);
    return {z0, p0};
}

}  // namespace detail

// Filter a whole sequence on the tape, init policy included.
inline DiffFilterRun run_filter_diff(ad::Tape& t, const FilterSpec& spec, const std::vector<ad::Ref>& measurements,
                                     const std::vector<ad::Ref>& covariances) {
    validate_spec(spec);
    if (measurements.size() != covariances.size())
        throw std::invalid_argument("run_filter_diff: measurement/covariance count mismatch");
    if (measurements.empty()) throw std::invalid_argument("run_filter_diff: empty measurement sequence");

    DiffFilterRun run;
    ad::Ref z, p;
    std::size_t start = 0;
    if (spec.init == FilterSpec::Init::FirstMeasurement) {
        double jit = 0.0;
        std::tie(z, p) = detail::init_from_measurement_diff(t, spec, measurements[0], covariances[0], &jit);
        run.states.push_back(z);
        run.covariances.push_back(p);
        run.innovations.push_back(t.const_(Mat(Mat::Zero(spec.meas_dim(), 1))));
        run.innovation_covs.push_back(covariances[0]);
        run.gains.push_back(t.const_(detail::pinv_rows(spec.H)));
        run.jitter.push_back(jit);
        start = 1;
    } else {
        z = t.const_(Mat(spec.z0));
        p = t.const_(spec.P0);
    }
    for (std::size_t i = start; i < measurements.size(); ++i) {
        detail::DiffStep s = detail::step_diff(t, spec, z, p, measurements[i], covariances[i]);
        z = s.z;
        p = s.P;
        run.states.push_back(s.z);
        run.covariances.push_back(s.P);
        run.innovations.push_back(s.innovation);
        run.innovation_covs.push_back(s.s);
        run.gains.push_back(s.gain);
        run.jitter.push_back(s.jitter);
    }
    return run;
}

// Continue filtering from a given boundary state (truncated backprop
// windows hand in the boundary as tape constants).
inline DiffFilterRun run_filter_diff_from(ad::Tape& t, const FilterSpec& spec, ad::Ref z0, ad::Ref p0,
                                          const std::vector<ad::Ref>& measurements,
                                          const std::vector<ad::Ref>& covariances) {
    if (measurements.size() != covariances.size())
        throw std::invalid_argument("run_filter_diff_from: measurement/covariance count mismatch");
    DiffFilterRun run;
    ad::Ref z = z0;
    ad::Ref p = p0;
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        detail::DiffStep s = detail::step_diff(t, spec, z, p, measurements[i], covariances[i]);
        z = s.z;
        p = s.P;
        run.states.push_back(s.z);
        run.covariances.push_back(s.P);
        run.innovations.push_back(s.innovation);
        run.innovation_covs.push_back(s.s);
        run.gains.push_back(s.gain);
        run.jitter.push_back(s.jitter);
    }
    return run;
}

struct SubsetCheck {
    bool ok = false;
    std::string diagnostic;
};

// A loss over state components S can only steer every measurement variance
// if each measurement row couples into S through H: sum_{b in S} H_ab != 0
// for every row a.
inline SubsetCheck check_subset_condition(const Mat& h, const std::vector<int>& subset) {
    if (subset.empty()) return {false, "component subset is empty"};
    for (int b : subset)
        if (b < 0 || b >= h.cols())
            return {false, "component index " + std::to_string(b) + " out of range for state dimension " +
                               std::to_string(h.cols())};
    for (Eigen::Index a = 0; a < h.rows(); ++a) {
        double coupling = 0.0;
        for (int b : subset) coupling += h(a, b);
        if (coupling == 0.0)
            return {false, "measurement row " + std::to_string(a) +
                               " has zero net coupling into the selected state components; its variance would "
                               "receive no gradient"};
    }
    return {true, ""};
}

// ---------------------------------------------------------------------------
// Time-correlated measurement noise. The measurement error is split into an
// AR(1) bias b (per-dimension coefficients phi) plus white noise:
//   m_t = H z_t + b_t + e_t,  b_t = diag(phi) b_{t-1} + u_t
// The bias is appended to the state; its process noise each step keeps the
// bias covariance stationary at Sigma_corr = Sigma - Sigma_uncorr:
//   Q_b = Sigma_corr - diag(phi) Sigma_corr diag(phi)

namespace detail {

// Clamp a symmetric matrix to the PSD cone (eigenvalue floor at zero).
inline Mat psd_floor(const Mat& a) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(a));
    Vec ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline void validate_phi(const Vec& phi) {
    for (Eigen::Index i = 0; i < phi.size(); ++i)
        if (!(std::abs(phi[i]) < 1.0))
            throw std::invalid_argument("time-correlated filter: |phi| must be < 1, got " +
                                        std::to_string(phi[i]) + " at dimension " + std::to_string(i));
}

// Augmented system matrices: state [z; b], measurement H_aug = [H I].
inline FilterSpec augment_time_correlated(const FilterSpec& base, const Vec& phi) {
    validate_phi(phi);
    const Eigen::Index n = base.state_dim();
    const Eigen::Index k = base.meas_dim();
    if (phi.size() != k)
        throw std::invalid_argument("time-correlated filter: phi must have one entry per measurement dimension");
    FilterSpec aug;
    aug.F = Mat::Zero(n + k, n + k);
    aug.F.topLeftCorner(n, n) = base.F;
    aug.F.bottomRightCorner(k, k) = Mat(phi.asDiagonal());
    aug.H = Mat::Zero(k, n + k);
    aug.H.leftCols(n) = base.H;
    aug.H.rightCols(k) = Mat::Identity(k, k);
    aug.Q = Mat::Zero(n + k, n + k);
    aug.Q.topLeftCorner(n, n) = base.Q;
    aug.init = FilterSpec::Init::Explicit;  // the dedicated init below fills z0/P0 per run
    aug.z0 = Vec::Zero(n + k);
    aug.P0 = Mat::Identity(n + k, n + k);
    aug.sigma_v_max = base.sigma_v_max;
    aug.joseph_update = base.joseph_update;
    return aug;
}

// One augmented step: the correlated share drives the bias process noise,
// only the uncorrelated share remains as measurement noise.
inline std::pair<FilterState, StepTrace> step_time_correlated(const FilterSpec& aug, const FilterState& state,
                                                              const Vec& m, const Mat& sigma_total, const Vec& phi,
                                                              const Mat& sigma_uncorr) {
    validate_phi(phi);
    const Eigen::Index k = aug.meas_dim();
    const Eigen::Index n = aug.state_dim() - k;
    if (sigma_total.rows() != k || sigma_uncorr.rows() != k)
        throw std::invalid_argument("time-correlated filter: covariance shape mismatch");
    Mat sigma_corr = detail::psd_floor(Mat(sigma_total - sigma_uncorr));
    Mat d = Mat(phi.asDiagonal());
    Mat qb = detail::psd_floor(Mat(sigma_corr - d * sigma_corr * d));
    FilterSpec spec_t = aug;
    spec_t.Q.bottomRightCorner(k, k) += qb;
    (void)n;
    return step(spec_t, state, m, sigma_uncorr);
}

// Initial augmented state consistent with m_1 = H z + b + e: the bias starts
// at zero with covariance Sigma_corr, and the part of z read off the first
// measurement inherits the full measurement error, hence the cross term.
inline FilterState init_time_correlated(const FilterSpec& base, const Vec& m, const Mat& sigma_total,
                                        const Mat& sigma_uncorr) {
    const Eigen::Index n = base.state_dim();
    const Eigen::Index k = base.meas_dim();
    Mat sigma_corr = detail::psd_floor(Mat(sigma_total - sigma_uncorr));
    FilterState st;
    st.t = 1;
    if (base.init == FilterSpec::Init::Explicit) {
        st.z = Vec::Zero(n + k);
        st.z.head(n) = base.z0;
        st.P = Mat::Zero(n + k, n + k);
        st.P.topLeftCorner(n, n) = base.P0;
        st.P.bottomRightCorner(k, k) = sigma_corr;
        st.t = 0;
        return st;
    }
    JitterResult probe = cholesky_with_jitter(sigma_total);
    Mat sigma_used = probe.jitter > 0.0 ? Mat(sigma_total + probe.jitter * Mat::Identity(k, k)) : sigma_total;
    Mat hp = detail::pinv_rows(base.H);
    Mat z0 = hp * Mat(m);
    Mat complement = base.sigma_v_max * base.sigma_v_max * (Mat::Identity(n, n) - hp * base.H);
    Mat pzz = Mat(Mat(hp * sigma_used) * hp.transpose()) + complement;
    Mat pzb = -(hp * sigma_corr);
    st.z = Vec::Zero(n + k);
    st.z.head(n) = z0.col(0);
    st.P = Mat::Zero(n + k, n + k);
    st.P.topLeftCorner(n, n) = pzz;
    st.P.topRightCorner(n, k) = pzb;
    st.P.bottomLeftCorner(k, n) = pzb.transpose();
    st.P.bottomRightCorner(k, k) = sigma_corr;
    st.P = symmetrize(st.P);
    return st;
}

// Filter a sequence with the augmented model. States keep the augmented
// dimension; the first base.state_dim() components are the physical state.
inline FilterRun run_filter_time_correlated(const FilterSpec& base, const Vec& phi,
                                            const std::vector<Vec>& measurements,
                                            const std::vector<Mat>& sigma_totals,
                                            const std::vector<Mat>& sigma_uncorrs) {
    validate_spec(base);
    validate_phi(phi);
    if (measurements.size() != sigma_totals.size() || measurements.size() != sigma_uncorrs.size())
        throw std::invalid_argument("run_filter_time_correlated: sequence length mismatch");
    if (measurements.empty()) throw std::invalid_argument("run_filter_time_correlated: empty measurement sequence");

    FilterSpec aug = augment_time_correlated(base, phi);
    FilterRun run;
    FilterState state = init_time_correlated(base, measurements[0], sigma_totals[0], sigma_uncorrs[0]);
    std::size_t start = 0;
    if (base.init == FilterSpec::Init::FirstMeasurement) {
        run.states.push_back(state);
        StepTrace t0{Vec::Zero(base.meas_dim()), sigma_totals[0], Mat::Zero(aug.state_dim(), base.meas_dim()), 0.0,
                     true};
        run.traces.push_back(std::move(t0));
        start = 1;
    }
    for (std::size_t i = start; i < measurements.size(); ++i) {
        auto [s, tr] = step_time_correlated(aug, state, measurements[i], sigma_totals[i], phi, sigma_uncorrs[i]);
        state = std::move(s);
        run.states.push_back(state);
        run.traces.push_back(std::move(tr));
    }
    return run;
}

// Lag-1 autocorrelation of residual sequences, pooled across tracks and
// clamped to [0, 0.98] per dimension. Used both as the AR(1) coefficient and
// as the correlated share of the measurement covariance.
struct TimeCorrelationEstimate {
    Vec phi;
    double correlated_fraction = 0.0;
};

inline TimeCorrelationEstimate estimate_time_correlation(const std::vector<std::vector<Vec>>& residual_tracks) {
    if (residual_tracks.empty() || residual_tracks[0].empty())
        throw std::invalid_argument("estimate_time_correlation: no residuals");
    const Eigen::Index k = residual_tracks[0][0].size();
    Vec num = Vec::Zero(k);
    Vec den = Vec::Zero(k);
    for (const auto& track : residual_tracks) {
        for (std::size_t i = 0; i + 1 < track.size(); ++i) {
            for (Eigen::Index d = 0; d < k; ++d) {
                num[d] += track[i][d] * track[i + 1][d];
                den[d] += track[i][d] * track[i][d];
            }
        }
    }
    TimeCorrelationEstimate est;
    est.phi = Vec::Zero(k);
    double acc = 0.0;
    for (Eigen::Index d = 0; d < k; ++d) {
        double phi = den[d] > 0.0 ? num[d] / den[d] : 0.0;
        est.phi[d] = std::min(std::max(phi, 0.0), 0.98);
        acc += est.phi[d];
    }
    est.correlated_fraction = std::min(acc / static_cast<double>(k), 0.95);
    return est;
}

// ---------------------------------------------------------------------------

// CSV trace: inputs and posteriors side by side, one row per measurement.
inline std::string filter_trace_csv(const FilterSpec& spec, const FilterRun& run, const std::vector<Vec>& measurements,
                                    const std::vector<Mat>& covariances) {
    const Eigen::Index k = spec.meas_dim();
    const Eigen::Index n = run.states.empty() ? spec.state_dim() : run.states[0].z.size();
    std::vector<std::string> header{"t"};
    for (Eigen::Index i = 0; i < k; ++i) header.push_back("m_" + std::to_string(i));
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < k; ++j) header.push_back("sigma_" + std::to_string(i) + std::to_string(j));
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("zhat_" + std::to_string(i));
    for (Eigen::Index i = 0; i < n; ++i) header.push_back("pdiag_" + std::to_string(i));
    std::string out = io::csv_line(header);
    for (std::size_t row = 0; row < run.states.size(); ++row) {
        std::vector<std::string> cells{std::to_string(row)};
        for (Eigen::Index i = 0; i < k; ++i) cells.push_back(io::format_double(measurements[row][i]));
        for (Eigen::Index i = 0; i < k; ++i)
            for (Eigen::Index j = i; j < k; ++j) cells.push_back(io::format_double(covariances[row](i, j)));
        for (Eigen::Index i = 0; i < n; ++i) cells.push_back(io::format_double(run.states[row].z[i]));
        for (Eigen::Index i = 0; i < n; ++i) cells.push_back(io::format_double(run.states[row].P(i, i)));
        out += io::csv_line(cells);
    }
    return out;
}

}  // namespace covfilt
