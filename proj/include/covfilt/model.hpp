#pragma once

#include <covfilt/autodiff.hpp>
#include <covfilt/common.hpp>
#include <covfilt/io.hpp>
#include <covfilt/rng.hpp>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace covfilt {

// Regression model: a small tanh MLP trunk with three output heads read off
// the last hidden layer.
//   mean head: k values, the predicted measurement
//   s head:    k log-variances
//   r head:    k(k-1)/2 correlation logits, row-major upper triangle
// Inputs and labels are standardized through affine maps stored with the
// weights; the transforms default to identity so raw-space behavior is the
// plain MLP formula. Weights stay O(1) regardless of the data's units.

struct GaussianPrediction {
    Vec mean;
    Mat covariance;
};

struct ModelParams {
    int input_dim = 0;
    int output_dim = 0;  // k, the measurement dimension
    std::vector<int> hidden;
    double dropout_rate = 0.0;
    double rho_scale = 0.99;

    std::vector<Mat> trunk_w;
    std::vector<Mat> trunk_b;  // column vectors
    Mat w_mean, b_mean;
    Mat w_s, b_s;
    Mat w_r, b_r;

    // Standardization: the net sees (x - x_mean) / x_scale and is trained
    // against (y - y_mean) / y_scale; predictions are mapped back out.
    Vec x_mean, x_scale, y_mean, y_scale;

    int corr_dim() const { return output_dim * (output_dim - 1) / 2; }
    int trunk_out_dim() const { return hidden.empty() ? input_dim : hidden.back(); }
};

enum class ParamGroup { Trunk, MeanHead, CovHead };

struct NamedParam {
    std::string name;
    Mat* mat;
    ParamGroup group;
};

// Trainable tensors in canonical order (standardization vectors excluded).
inline std::vector<NamedParam> named_params(ModelParams& p) {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < p.trunk_w.size(); ++i) {
        out.push_back({"trunk_w" + std::to_string(i), &p.trunk_w[i], ParamGroup::Trunk});
        out.push_back({"trunk_b" + std::to_string(i), &p.trunk_b[i], ParamGroup::Trunk});
    }
    out.push_back({"w_mean", &p.w_mean, ParamGroup::MeanHead});
    out.push_back({"b_mean", &p.b_mean, ParamGroup::MeanHead});
    out.push_back({"w_s", &p.w_s, ParamGroup::CovHead});
    out.push_back({"b_s", &p.b_s, ParamGroup::CovHead});
    out.push_back({"w_r", &p.w_r, ParamGroup::CovHead});
    out.push_back({"b_r", &p.b_r, ParamGroup::CovHead});
    return out;
}

// Every serialized tensor, trainables first, standardization last.
inline std::vector<std::pair<std::string, const Mat*>> named_tensors(const ModelParams& p) {
    std::vector<std::pair<std::string, const Mat*>> out;
    std::vector<NamedParam> trainable = named_params(const_cast<ModelParams&>(p));
    for (const NamedParam& np : trainable) out.emplace_back(np.name, np.mat);
    return out;
}

inline void validate_model(const ModelParams& p) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("model: " + msg); };
    if (p.input_dim <= 0 || p.output_dim <= 0) fail("input_dim and output_dim must be positive");
    if (!(p.dropout_rate >= 0.0) || p.dropout_rate >= 1.0) fail("dropout_rate must lie in [0, 1)");
    if (!(p.rho_scale > 0.0) || p.rho_scale >= 1.0) fail("rho_scale must lie in (0, 1)");
    if (p.trunk_w.size() != p.hidden.size() || p.trunk_b.size() != p.hidden.size())
        fail("trunk layer count does not match hidden sizes");
    int in = p.input_dim;
    for (std::size_t i = 0; i < p.hidden.size(); ++i) {
        if (p.trunk_w[i].rows() != p.hidden[i] || p.trunk_w[i].cols() != in)
            fail("trunk_w" + std::to_string(i) + " has shape " + shape_str(p.trunk_w[i]));
        if (p.trunk_b[i].rows() != p.hidden[i] || p.trunk_b[i].cols() != 1)
            fail("trunk_b" + std::to_string(i) + " has shape " + shape_str(p.trunk_b[i]));
        in = p.hidden[i];
    }
    const int k = p.output_dim;
    const int m = p.corr_dim();
    if (p.w_mean.rows() != k || p.w_mean.cols() != in) fail("w_mean has shape " + shape_str(p.w_mean));
    if (p.w_s.rows() != k || p.w_s.cols() != in) fail("w_s has shape " + shape_str(p.w_s));
    if (p.w_r.rows() != m || p.w_r.cols() != in) fail("w_r has shape " + shape_str(p.w_r));
    if (p.b_mean.rows() != k || p.b_s.rows() != k || p.b_r.rows() != m) fail("head bias shape mismatch");
    if (p.x_mean.size() != p.input_dim || p.x_scale.size() != p.input_dim) fail("input standardization shape mismatch");
    if (p.y_mean.size() != k || p.y_scale.size() != k) fail("label standardization shape mismatch");
    for (Eigen::Index i = 0; i < p.x_scale.size(); ++i)
        if (!(p.x_scale[i] > 0.0)) fail("x_scale entries must be positive");
    for (Eigen::Index i = 0; i < p.y_scale.size(); ++i)
        if (!(p.y_scale[i] > 0.0)) fail("y_scale entries must be positive");
}

// Fresh model: weights from N(0, 1/fan_in), biases zero, identity transforms.
inline ModelParams make_model(int input_dim, int output_dim, std::vector<int> hidden, double dropout_rate,
                              double rho_scale, std::uint64_t seed) {
    ModelParams p;
    p.input_dim = input_dim;
    p.output_dim = output_dim;
    p.hidden = std::move(hidden);
    p.dropout_rate = dropout_rate;
    p.rho_scale = rho_scale;

    Xoshiro256pp rng(seed);
    auto init = [&rng](Eigen::Index rows, Eigen::Index cols) {
        Mat w(rows, cols);
        double sd = 1.0 / std::sqrt(static_cast<double>(cols));
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) w(r, c) = sd * rng.normal();
        return w;
    };

    int in = input_dim;
    for (int h : p.hidden) {
        p.trunk_w.push_back(init(h, in));
        p.trunk_b.push_back(Mat::Zero(h, 1));
        in = h;
    }
    const int k = output_dim;
    const int m = p.corr_dim();
    p.w_mean = init(k, in);
    p.b_mean = Mat::Zero(k, 1);
    p.w_s = init(k, in);
    p.b_s = Mat::Zero(k, 1);
    // The correlation head starts at zero so the initial covariance is
    // diagonal. For k >= 3 a random start can place jointly extreme
    // correlations outside the PD cone before training has any chance to
    // repel them; a diagonal start is always valid.
    p.w_r = Mat::Zero(m, in);
    p.b_r = Mat::Zero(m, 1);
    p.x_mean = Vec::Zero(input_dim);
    p.x_scale = Vec::Ones(input_dim);
    p.y_mean = Vec::Zero(k);
    p.y_scale = Vec::Ones(k);
    validate_model(p);
    return p;
}

// One 0/1-with-inverted-scaling mask per hidden layer: entries are either 0
// or 1/(1 - rate), so the expected activation is unchanged.
struct DropoutMask {
    std::vector<Mat> layers;
};

inline DropoutMask sample_dropout_mask(const ModelParams& p, Xoshiro256pp& rng) {
    DropoutMask mask;
    const double rate = p.dropout_rate;
    const double keep_scale = rate > 0.0 ? 1.0 / (1.0 - rate) : 1.0;
    for (int h : p.hidden) {
        Mat m(h, 1);
        for (int i = 0; i < h; ++i) m(i, 0) = (rng.uniform01() >= rate) ? keep_scale : 0.0;
        mask.layers.push_back(std::move(m));
    }
    return mask;
}

inline DropoutMask sample_dropout_mask(const ModelParams& p, std::uint64_t seed) {
    Xoshiro256pp rng(seed);
    return sample_dropout_mask(p, rng);
}

// Covariance from head outputs; the same formula as the tape op.
inline Mat assemble_covariance(const Vec& s, const Vec& r, double rho_scale) {
    const Eigen::Index k = s.size();
    if (r.size() != k * (k - 1) / 2)
        throw std::invalid_argument("assemble_covariance: expected " + std::to_string(k * (k - 1) / 2) +
                                    " correlation logits, got " + std::to_string(r.size()));
    Mat cov(k, k);
    for (Eigen::Index i = 0; i < k; ++i) cov(i, i) = std::exp(s[i]);
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j, ++idx) {
            double v = rho_scale * std::tanh(r[idx]) * std::sqrt(cov(i, i) * cov(j, j));
            cov(i, j) = v;
            cov(j, i) = v;
        }
    }
    return cov;
}

struct HeadOutputs {
    Vec mean;
    Vec s;
    Vec r;
};

// Deterministic forward unless a dropout mask is supplied.
inline HeadOutputs forward_heads(const ModelParams& p, const Vec& x, const DropoutMask* mask = nullptr) {
    if (x.size() != p.input_dim)
        throw std::invalid_argument("forward_heads: input has size " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(p.input_dim));
    if (mask && mask->layers.size() != p.hidden.size())
        throw std::invalid_argument("forward_heads: dropout mask layer count mismatch");
    Vec h = (x - p.x_mean).cwiseQuotient(p.x_scale);
    for (std::size_t i = 0; i < p.trunk_w.size(); ++i) {
        h = (p.trunk_w[i] * h + p.trunk_b[i].col(0)).array().tanh();
        if (mask) h = h.cwiseProduct(mask->layers[i].col(0));
    }
    HeadOutputs out;
    out.mean = p.y_mean + p.y_scale.cwiseProduct(Vec(p.w_mean * h + p.b_mean.col(0)));
    out.s = (p.w_s * h + p.b_s.col(0)) + 2.0 * p.y_scale.array().log().matrix();
    out.r = p.w_r * h + p.b_r.col(0);
    return out;
}

inline GaussianPrediction predict(const ModelParams& p, const Vec& x, const DropoutMask* mask = nullptr) {
    HeadOutputs h = forward_heads(p, x, mask);
    return {h.mean, assemble_covariance(h.s, h.r, p.rho_scale)};
}

// Which parameter groups become tape params (receive gradients); the rest
// enter the tape as constants and their gradients are exactly zero.
enum class Trainable { All, MeanPath, CovPath, None };

inline bool group_trainable(ParamGroup g, Trainable t) {
    switch (t) {
        case Trainable::All: return true;
        case Trainable::MeanPath: return g == ParamGroup::Trunk || g == ParamGroup::MeanHead;
        case Trainable::CovPath: return g == ParamGroup::CovHead;
        case Trainable::None: return false;
    }
    return false;
}

struct TapeModel {
    std::vector<ad::Ref> trunk_w, trunk_b;
    ad::Ref w_mean, b_mean, w_s, b_s, w_r, b_r;
    // Trainable tensors in canonical order, aligned with their tape refs.
    std::vector<std::string> trainable_names;
    std::vector<ad::Ref> trainable_refs;
    std::vector<Mat*> trainable_mats;
};

// Place model weights on a tape once; forwards for a whole batch then share
// the same parameter nodes so adjoints accumulate across the batch.
inline TapeModel put_params(ad::Tape& t, ModelParams& p, Trainable which) {
    TapeModel tm;
    auto place = [&](const NamedParam& np) {
        bool train = group_trainable(np.group, which);
        ad::Ref r = train ? t.param(*np.mat) : t.const_(*np.mat);
        if (train) {
            tm.trainable_names.push_back(np.name);
            tm.trainable_refs.push_back(r);
            tm.trainable_mats.push_back(np.mat);
        }
        return r;
    };
    std::vector<NamedParam> all = named_params(p);
    std::size_t i = 0;
    for (; i < 2 * p.trunk_w.size(); i += 2) {
        tm.trunk_w.push_back(place(all[i]));
        tm.trunk_b.push_back(place(all[i + 1]));
    }
    tm.w_mean = place(all[i++]);
    tm.b_mean = place(all[i++]);
    tm.w_s = place(all[i++]);
    tm.b_s = place(all[i++]);
    tm.w_r = place(all[i++]);
    tm.b_r = place(all[i++]);
    return tm;
}

struct HeadRefs {
    ad::Ref mean, s, r;
};

inline HeadRefs forward(ad::Tape& t, const TapeModel& tm, const ModelParams& p, const Vec& x,
                        const DropoutMask* mask = nullptr) {
    if (x.size() != p.input_dim)
        throw std::invalid_argument("forward: input has size " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(p.input_dim));
    if (mask && mask->layers.size() != p.hidden.size())
        throw std::invalid_argument("forward: dropout mask layer count mismatch");
    Vec xs = (x - p.x_mean).cwiseQuotient(p.x_scale);
    ad::Ref h = t.const_(xs);
    for (std::size_t i = 0; i < tm.trunk_w.size(); ++i) {
        h = ad::tanh(t, ad::add(t, ad::matmul(t, tm.trunk_w[i], h), tm.trunk_b[i]));
        if (mask) h = ad::hadamard(t, h, t.const_(mask->layers[i]));
    }
    HeadRefs out;
    ad::Ref m_raw = ad::add(t, ad::matmul(t, tm.w_mean, h), tm.b_mean);
    out.mean = ad::add(t, ad::hadamard(t, m_raw, t.const_(Mat(p.y_scale))), t.const_(Mat(p.y_mean)));
    ad::Ref s_raw = ad::add(t, ad::matmul(t, tm.w_s, h), tm.b_s);
    out.s = ad::add(t, s_raw, t.const_(Mat(2.0 * p.y_scale.array().log().matrix())));
    out.r = ad::add(t, ad::matmul(t, tm.w_r, h), tm.b_r);
    return out;
}

inline ad::Ref covariance_ref(ad::Tape& t, const ModelParams& p, const HeadRefs& heads) {
    return ad::cov_from_logits(t, heads.s, heads.r, p.rho_scale);
}

// Point the s head at a target variance (raw label space) before training.
inline void set_variance_bias(ModelParams& p, const Vec& target_variance) {
    if (target_variance.size() != p.output_dim)
        throw std::invalid_argument("set_variance_bias: variance vector has wrong size");
    for (int i = 0; i < p.output_dim; ++i) {
        double v = std::max(target_variance[i], 1e-12);
        p.b_s(i, 0) = std::log(v) - 2.0 * std::log(p.y_scale[i]);
    }
}

inline constexpr int kModelFormatVersion = 1;

inline std::string model_to_json(const ModelParams& p) {
    nlohmann::json j;
    j["format"] = "covfilt-model";
    j["version"] = kModelFormatVersion;
    j["input_dim"] = p.input_dim;
    j["output_dim"] = p.output_dim;
    j["hidden"] = p.hidden;
    j["dropout_rate"] = p.dropout_rate;
    j["rho_scale"] = p.rho_scale;
    nlohmann::json tensors;
    auto put = [&tensors](const std::string& name, const Mat& m) {
        tensors[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", io::mat_to_base64(m)}};
    };
    for (const auto& [name, mat] : named_tensors(p)) put(name, *mat);
    put("x_mean", p.x_mean);
    put("x_scale", p.x_scale);
    put("y_mean", p.y_mean);
    put("y_scale", p.y_scale);
    j["tensors"] = std::move(tensors);
    return j.dump(2) + "\n";
}

inline ModelParams model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model file is not valid json: ") + e.what());
    }
    if (!j.contains("format") || j["format"] != "covfilt-model")
        throw std::runtime_error("model file has unknown format tag");
    if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kModelFormatVersion)
        throw std::runtime_error("unsupported model file version");
    ModelParams p;
    try {
        p.input_dim = j.at("input_dim").get<int>();
        p.output_dim = j.at("output_dim").get<int>();
        p.hidden = j.at("hidden").get<std::vector<int>>();
        p.dropout_rate = j.at("dropout_rate").get<double>();
        p.rho_scale = j.at("rho_scale").get<double>();
        const nlohmann::json& tensors = j.at("tensors");
        auto get = [&tensors](const std::string& name) {
            const nlohmann::json& t = tensors.at(name);
            return io::mat_from_base64(t.at("data").get<std::string>(), t.at("rows").get<Eigen::Index>(),
                                       t.at("cols").get<Eigen::Index>());
        };
        auto get_vec = [&get](const std::string& name) {
            Mat m = get(name);
            if (m.cols() != 1) throw std::runtime_error("model tensor " + name + " is not a column vector");
            return Vec(m.col(0));
        };
        for (std::size_t i = 0; i < p.hidden.size(); ++i) {
            p.trunk_w.push_back(get("trunk_w" + std::to_string(i)));
            p.trunk_b.push_back(get("trunk_b" + std::to_string(i)));
        }
        p.w_mean = get("w_mean");
        p.b_mean = get("b_mean");
        p.w_s = get("w_s");
        p.b_s = get("b_s");
        p.w_r = get("w_r");
        p.b_r = get("b_r");
        p.x_mean = get_vec("x_mean");
        p.x_scale = get_vec("x_scale");
        p.y_mean = get_vec("y_mean");
        p.y_scale = get_vec("y_scale");
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model file is missing fields: ") + e.what());
    }
    validate_model(p);
    return p;
}

inline void save_model(const ModelParams& p, const std::filesystem::path& path) {
    io::write_file(path, model_to_json(p));
}

inline ModelParams load_model(const std::filesystem::path& path) { return model_from_json(io::read_file(path)); }

}  // namespace covfilt
