#pragma once

#include <covfilt/autodiff.hpp>
#include <covfilt/common.hpp>
#include <covfilt/kalman.hpp>
#include <covfilt/losses.hpp>
#include <covfilt/model.hpp>
#include <covfilt/rng.hpp>
#include <covfilt/simulator.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace covfilt {

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Adam on a list of matrices. Bias-corrected first and second moments, then
//   p -= lr * mhat / (sqrt(vhat) + eps)

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }

    void update(const std::vector<Mat*>& params, const std::vector<Mat>& grads,
                const std::vector<std::string>& names) {
        if (params.size() != grads.size())
            throw TrainingError("adam: " + std::to_string(params.size()) + " parameters vs " +
                                std::to_string(grads.size()) + " gradients");
        if (m_.empty()) {
            for (const Mat* p : params) {
                m_.push_back(Mat::Zero(p->rows(), p->cols()));
                v_.push_back(Mat::Zero(p->rows(), p->cols()));
            }
        }
        if (m_.size() != params.size()) throw TrainingError("adam: parameter list changed between updates");
        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Mat& g = grads[i];
            if (!g.allFinite()) {
                std::string name = i < names.size() ? names[i] : ("parameter " + std::to_string(i));
                throw TrainingError("adam: non-finite gradient for " + name);
            }
            if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols())
                throw TrainingError("adam: gradient shape mismatch at parameter " + std::to_string(i));
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
            Mat mhat = m_[i] / bc1;
            Mat vhat = v_[i] / bc2;
            Mat denom = vhat.cwiseSqrt() + Mat::Constant(vhat.rows(), vhat.cols(), cfg_.eps);
            *params[i] -= cfg_.lr * mhat.cwiseQuotient(denom);
        }
    }

    long steps() const { return step_; }

private:
    AdamConfig cfg_;
    std::vector<Mat> m_, v_;
    long step_ = 0;
};

inline double global_norm(const std::vector<Mat>& grads) {
    double acc = 0.0;
    for (const Mat& g : grads) acc += g.squaredNorm();
    return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// Flat sample view of the datasets.

struct SampleSet {
    std::vector<Vec> x;
    std::vector<Vec> y;

    std::size_t size() const { return x.size(); }
};

inline SampleSet samples_from_tracks(const std::vector<TrackDataset>& tracks) {
    SampleSet s;
    for (const TrackDataset& track : tracks) {
        for (const TrackStep& step : track.steps) {
            s.x.push_back(step.x);
            s.y.push_back(step.y);
        }
    }
    return s;
}

inline SampleSet samples_from_rainbow(const std::vector<RainbowPoint>& points) {
    SampleSet s;
    for (const RainbowPoint& p : points) {
        Vec t(1);
        t << p.t;
        s.x.push_back(t);
        s.y.push_back(p.sample);
    }
    return s;
}

// Set the model's standardization maps from data statistics. Done once
// before base training; later tuning stages must not touch it.
inline void fit_standardization(ModelParams& p, const SampleSet& samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit_standardization: need at least two samples");
    auto stats = [](const std::vector<Vec>& vs, Vec& mean, Vec& scale) {
        const Eigen::Index d = vs[0].size();
        mean = Vec::Zero(d);
        for (const Vec& v : vs) mean += v;
        mean /= static_cast<double>(vs.size());
        Vec var = Vec::Zero(d);
        for (const Vec& v : vs) var += (v - mean).cwiseProduct(v - mean);
        var /= static_cast<double>(vs.size());
        scale = var.cwiseSqrt().cwiseMax(1e-9);
    };
    stats(samples.x, p.x_mean, p.x_scale);
    stats(samples.y, p.y_mean, p.y_scale);
    validate_model(p);
}

inline std::vector<Vec> residuals(const ModelParams& p, const SampleSet& samples) {
    std::vector<Vec> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out.push_back(samples.y[i] - forward_heads(p, samples.x[i]).mean);
    return out;
}

// Point the s head at the current residual variance; cheap warm start.
inline void init_variance_bias_from_residuals(ModelParams& p, const SampleSet& samples) {
    std::vector<Vec> rs = residuals(p, samples);
    Vec mean = Vec::Zero(p.output_dim);
    for (const Vec& r : rs) mean += r;
    mean /= static_cast<double>(rs.size());
    Vec var = Vec::Zero(p.output_dim);
    for (const Vec& r : rs) var += (r - mean).cwiseProduct(r - mean);
    var /= static_cast<double>(rs.size());
    set_variance_bias(p, var);
}

// Single covariance matrix of a residual sample, the non-learned baseline.
inline Mat fixed_covariance_baseline(const std::vector<Vec>& rs) {
    if (rs.size() < 2) throw std::invalid_argument("fixed_covariance_baseline: need at least two residuals");
    const Eigen::Index k = rs[0].size();
    Vec mean = Vec::Zero(k);
    for (const Vec& r : rs) mean += r;
    mean /= static_cast<double>(rs.size());
    Mat cov = Mat::Zero(k, k);
    for (const Vec& r : rs) {
        Vec c = r - mean;
        cov += c * c.transpose();
    }
    cov /= static_cast<double>(rs.size());
    return symmetrize(cov);
}

// ---------------------------------------------------------------------------

struct TrainReport {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_grad_norm;
    double final_loss = 0.0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    nlohmann::json config_echo;

    std::string to_json() const {
        nlohmann::json j;
        j["seed"] = seed;
        j["epochs"] = epoch_loss.size();
        j["epoch_loss"] = epoch_loss;
        j["epoch_grad_norm"] = epoch_grad_norm;
        j["final_loss"] = final_loss;
        // wall_seconds stays out of the artifact: runs must be bit-identical
        // given (config, seed).
        j["config"] = config_echo;
        return j.dump(2) + "\n";
    }

    std::string curve_csv() const {
        std::string out = io::csv_line({"epoch", "loss", "grad_norm"});
        for (std::size_t i = 0; i < epoch_loss.size(); ++i)
            out += io::csv_line({std::to_string(i), io::format_double(epoch_loss[i]),
                                 io::format_double(i < epoch_grad_norm.size() ? epoch_grad_norm[i] : 0.0)});
        return out;
    }
};

// ---------------------------------------------------------------------------
// Maximum-likelihood training: minibatch Adam on the Gaussian NLL of the
// model's per-sample prediction. Modes select which parameter groups train;
// frozen groups enter the tape as constants and provably receive zero
// gradient. With CovLoss::Diagonal the loss is diagonal_nll on exp(s) and
// the correlation head r is out of the graph.

struct MleConfig {
    int epochs = 40;
    int batch_size = 64;
    AdamConfig adam;
    std::uint64_t seed = 1;
    enum class Mode { Joint, MeanOnly, CovOnly } mode = Mode::Joint;
    enum class CovLoss { Full, Diagonal } cov_loss = CovLoss::Full;
    // Dropout regularizes stages that train the trunk; covariance-only
    // tuning measures residuals of the frozen deterministic mean, so masks
    // stay off there by default.
    bool dropout_active = true;
};

namespace detail {

inline Trainable trainable_of(MleConfig::Mode mode) {
    switch (mode) {
        case MleConfig::Mode::Joint: return Trainable::All;
        case MleConfig::Mode::MeanOnly: return Trainable::MeanPath;
        case MleConfig::Mode::CovOnly: return Trainable::CovPath;
    }
    return Trainable::All;
}

template <typename T>
inline void shuffle_indices(std::vector<T>& idx, Xoshiro256pp& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

}  // namespace detail

inline TrainReport train_mle(ModelParams& params, const SampleSet& samples, const MleConfig& cfg) {
    if (samples.size() == 0) throw std::invalid_argument("train_mle: empty sample set");
    if (cfg.epochs < 1 || cfg.batch_size < 1) throw std::invalid_argument("train_mle: bad epochs or batch size");
    validate_model(params);

    const Trainable which = detail::trainable_of(cfg.mode);
    const bool use_dropout = cfg.dropout_active && params.dropout_rate > 0.0 && which != Trainable::CovPath;
    Xoshiro256pp shuffle_rng(cfg.seed, 1);
    Xoshiro256pp mask_rng(cfg.seed, 2);
    Adam adam(cfg.adam);
    TrainReport report;
    report.seed = cfg.seed;

    const auto t_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(order, shuffle_rng);
        double loss_acc = 0.0;
        double norm_acc = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            ad::Tape tape;
            TapeModel tm = put_params(tape, params, which);
            ad::Ref batch_loss = tape.const_(Mat::Zero(1, 1));
            for (std::size_t i = begin; i < end; ++i) {
                const Vec& x = samples.x[order[i]];
                const Vec& y = samples.y[order[i]];
                DropoutMask mask;
                const DropoutMask* mask_ptr = nullptr;
                if (use_dropout) {
                    mask = sample_dropout_mask(params, mask_rng);
                    mask_ptr = &mask;
                }
                HeadRefs heads = forward(tape, tm, params, x, mask_ptr);
                ad::Ref loss = cfg.cov_loss == MleConfig::CovLoss::Full
                                   ? gaussian_nll(tape, heads.mean, covariance_ref(tape, params, heads), y)
                                   : diagonal_nll(tape, heads.mean, ad::exp(tape, heads.s), y);
                batch_loss = ad::add(tape, batch_loss, loss);
            }
            batch_loss = ad::scale(tape, batch_loss, 1.0 / static_cast<double>(end - begin));
            const double loss_value = tape.value(batch_loss)(0, 0);
            if (!std::isfinite(loss_value))
                throw TrainingError("train_mle: loss diverged (epoch " + std::to_string(epoch) + ")");
            tape.backward(batch_loss);

            std::vector<Mat> grads;
            grads.reserve(tm.trainable_refs.size());
            for (ad::Ref r : tm.trainable_refs) grads.push_back(tape.adjoint(r));
            adam.update(tm.trainable_mats, grads, tm.trainable_names);

            loss_acc += loss_value;
            norm_acc += global_norm(grads);
            ++batches;
        }
        report.epoch_loss.push_back(loss_acc / static_cast<double>(batches));
        report.epoch_grad_norm.push_back(norm_acc / static_cast<double>(batches));
    }
    report.final_loss = report.epoch_loss.back();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Training through the filter: the loss is the mean squared error of
// selected state components against the true states, differentiated through
// the Kalman recursion into the covariance head (optionally the mean head
// when the filter consumes model means). Long tracks are chunked into
// truncated-backprop windows whose boundary states come from a plain filter
// pass and enter the tape as constants.

struct KalmanTrainConfig {
    int epochs = 10;
    AdamConfig adam{.lr = 1e-3};
    std::uint64_t seed = 1;
    int window = 10;
    int burn_in = 2;
    std::vector<int> subset = {0, 1, 2};
    double clip_norm = 10.0;
    // What the filter ingests as measurements: the dataset's measurement
    // column (matches evaluation) or the model's own mean predictions
    // (gives the mean head a gradient path).
    enum class MeasurementSource { Dataset, ModelMean } source = MeasurementSource::Dataset;
    enum class Mode { CovOnly, Joint } mode = Mode::CovOnly;
};

inline TrainReport train_kalman(ModelParams& params, const std::vector<TrackDataset>& tracks, const FilterSpec& spec,
                                const KalmanTrainConfig& cfg) {
    if (tracks.empty()) throw std::invalid_argument("train_kalman: no tracks");
    if (cfg.epochs < 1 || cfg.window < 1) throw std::invalid_argument("train_kalman: bad epochs or window");
    validate_model(params);
    validate_spec(spec);
    SubsetCheck check = check_subset_condition(spec.H, cfg.subset);
    if (!check.ok) throw std::invalid_argument("train_kalman: " + check.diagnostic);

    const Trainable which = cfg.mode == KalmanTrainConfig::Mode::Joint ? Trainable::All : Trainable::CovPath;
    Xoshiro256pp shuffle_rng(cfg.seed, 1);
    Adam adam(cfg.adam);
    TrainReport report;
    report.seed = cfg.seed;

    const auto t_start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(tracks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(order, shuffle_rng);
        double loss_acc = 0.0;
        double norm_acc = 0.0;
        std::size_t updates = 0;
        for (std::size_t track_pos = 0; track_pos < order.size(); ++track_pos) {
            const TrackDataset& track = tracks[order[track_pos]];
            const std::size_t steps = track.steps.size();
            if (steps < static_cast<std::size_t>(cfg.burn_in) + 2) continue;

            // Plain pass: predictions and filter states for window boundaries.
            std::vector<Vec> meas(steps);
            std::vector<Mat> covs(steps);
            for (std::size_t i = 0; i < steps; ++i) {
                GaussianPrediction pred = predict(params, track.steps[i].x);
                covs[i] = pred.covariance;
                meas[i] = cfg.source == KalmanTrainConfig::MeasurementSource::ModelMean ? pred.mean
                                                                                       : track.steps[i].y;
            }
            FilterRun plain = run_filter(spec, meas, covs);

            // Gradients accumulate over windows, weighted so the total
            // equals the gradient of the per-step mean over the whole track.
            std::vector<Mat> grad_acc;
            std::vector<Mat*> param_slots;
            std::vector<std::string> param_names;
            double track_sq_sum = 0.0;
            std::size_t total_kept = 0;

            for (std::size_t w0 = 0; w0 < steps; w0 += static_cast<std::size_t>(cfg.window)) {
                const std::size_t w1 = std::min(steps, w0 + static_cast<std::size_t>(cfg.window));
                const std::size_t local_burn = w0 >= static_cast<std::size_t>(cfg.burn_in)
                                                   ? 0
                                                   : static_cast<std::size_t>(cfg.burn_in) - w0;
                if (local_burn >= w1 - w0) continue;
                const std::size_t kept = (w1 - w0) - local_burn;

                ad::Tape tape;
                TapeModel tm = put_params(tape, params, which);
                std::vector<ad::Ref> meas_refs, cov_refs;
                for (std::size_t i = w0; i < w1; ++i) {
                    HeadRefs heads = forward(tape, tm, params, track.steps[i].x);
                    cov_refs.push_back(covariance_ref(tape, params, heads));
                    meas_refs.push_back(cfg.source == KalmanTrainConfig::MeasurementSource::ModelMean
                                            ? heads.mean
                                            : tape.const_(Mat(meas[i])));
                }
                DiffFilterRun diff;
                if (w0 == 0) {
                    diff = run_filter_diff(tape, spec, meas_refs, cov_refs);
                } else {
                    ad::Ref z0 = tape.const_(Mat(plain.states[w0 - 1].z));
                    ad::Ref p0 = tape.const_(plain.states[w0 - 1].P);
                    diff = run_filter_diff_from(tape, spec, z0, p0, meas_refs, cov_refs);
                }
                std::vector<Vec> truths;
                for (std::size_t i = w0; i < w1; ++i) truths.push_back(track.steps[i].z);
                ad::Ref loss = state_estimate_loss(tape, diff.states, truths, cfg.subset,
                                                   static_cast<int>(local_burn));
                const double loss_value = tape.value(loss)(0, 0);
                if (!std::isfinite(loss_value))
                    throw TrainingError("train_kalman: loss diverged (epoch " + std::to_string(epoch) + ", track " +
                                        std::to_string(track.track_index) + ")");
                tape.backward(loss);

                if (grad_acc.empty()) {
                    for (std::size_t i = 0; i < tm.trainable_refs.size(); ++i) {
                        grad_acc.push_back(Mat::Zero(tm.trainable_mats[i]->rows(), tm.trainable_mats[i]->cols()));
                    }
                    param_slots = tm.trainable_mats;
                    param_names = tm.trainable_names;
                }
                const double weight = static_cast<double>(kept);
                for (std::size_t i = 0; i < tm.trainable_refs.size(); ++i)
                    grad_acc[i] += weight * tape.adjoint(tm.trainable_refs[i]);
                track_sq_sum += loss_value * static_cast<double>(kept);
                total_kept += kept;
            }
            if (total_kept == 0) continue;
            for (Mat& g : grad_acc) g /= static_cast<double>(total_kept);

            double norm = global_norm(grad_acc);
            if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
                const double scale = cfg.clip_norm / norm;
                for (Mat& g : grad_acc) g *= scale;
            }
            adam.update(param_slots, grad_acc, param_names);
            loss_acc += track_sq_sum / static_cast<double>(total_kept);
            norm_acc += norm;
            ++updates;
        }
        if (updates == 0) throw std::invalid_argument("train_kalman: every track is shorter than burn-in + 2");
        report.epoch_loss.push_back(loss_acc / static_cast<double>(updates));
        report.epoch_grad_norm.push_back(norm_acc / static_cast<double>(updates));
    }
    report.final_loss = report.epoch_loss.back();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace covfilt
