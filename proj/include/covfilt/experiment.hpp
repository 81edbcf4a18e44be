#pragma once

#include <covfilt/epistemic.hpp>
#include <covfilt/kalman.hpp>
#include <covfilt/model.hpp>
#include <covfilt/simulator.hpp>
#include <covfilt/training.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace covfilt {

// The experiment pipeline behind the CLI: dataset generation, the four-way
// training recipe (fixed baseline, variance-only, full covariance, Kalman
// fine-tune), filter evaluation with in-domain/OOD splits, and the rainbow
// demo. Everything is driven by one JSON config with strict unknown-key
// rejection, and every artifact records the config hash and effective seed.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Strict reader: every key must be consumed, unknown keys fail with their
// dotted path so typos in sweep configs surface immediately.
class ConfigReader {
public:
    ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config: " + path_ + " must be an object");
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        seen_.insert(key);
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: bad value for " + dotted(key));
        }
    }

    ConfigReader child(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) return ConfigReader(empty_, dotted(key));
        return ConfigReader(j_.at(key), dotted(key));
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.count(key)) throw ConfigError("config: unknown key " + dotted(key));
        }
    }

private:
    std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    static inline const nlohmann::json empty_ = nlohmann::json::object();
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// Purpose-separated seeds so datasets, model init, and each training stage
// draw from disjoint streams of one user-facing seed.
enum class SeedUse : std::uint64_t {
    TrainTracks = 1,
    TestTracks = 2,
    OodShift = 3,
    RainbowData = 4,
    RainbowModel = 5,
    RainbowTrain = 6,
    ModelInit = 10,
    JointTrain = 11,
    VarianceTune = 12,
    CovarianceTune = 13,
    KalmanTune = 14,
    Epistemic = 15,
};

inline std::uint64_t derive_seed(std::uint64_t seed, SeedUse use) {
    SplitMix64 sm(seed ^ (static_cast<std::uint64_t>(use) * 0x9E3779B97F4A7C15ULL));
    return sm.next();
}

}  // namespace detail

enum class Method { Fixed, MleVariance, MleCovariance, KalmanCovariance };

inline std::string method_name(Method m) {
    switch (m) {
        case Method::Fixed: return "fixed";
        case Method::MleVariance: return "mle-variance";
        case Method::MleCovariance: return "mle-covariance";
        case Method::KalmanCovariance: return "kalman-covariance";
    }
    throw std::logic_error("method_name: bad enum");
}

inline Method method_from_name(const std::string& name) {
    for (Method m : {Method::Fixed, Method::MleVariance, Method::MleCovariance, Method::KalmanCovariance})
        if (method_name(m) == name) return m;
    throw ConfigError("config: unknown method \"" + name +
                      "\" (expected fixed | mle-variance | mle-covariance | kalman-covariance)");
}

struct ExperimentConfig {
    std::uint64_t seed = 1;
    int threads = 1;

    // Dataset generation. The tracking benchmark wants walks long enough to
    // sweep the radial noise field and anisotropy mild enough that every true
    // correlation stays inside the head's reach (see rho_scale below).
    int train_tracks = 2000;
    int test_tracks = 500;
    TrackConfig track = [] {
        TrackConfig t;
        t.steps = 40;
        t.dt = 1.0;
        t.speed_min_mm_s = 10.0;
        t.speed_max_mm_s = 40.0;
        t.box_mm = 600.0;
        t.pos_encoding_noise_mm = 0.0;
        t.noise.base_sigma_mm = 300.0;
        t.noise.axis_ratios = (Vec(3) << 1.0, 1.5, 2.0).finished();
        t.noise.radial_floor = 0.3;
        t.noise.radial_gain = 3.0;
        return t;
    }();  // per-track knobs; track.seed is derived at use
    bool ood_enabled = true;
    // Compress the position features: the model then reads a smaller radius
    // than the one the noise was drawn with and under-predicts the variances,
    // which epistemic inflation genuinely corrects. The orientation features
    // stay valid, so the full-covariance head keeps its in-domain edge.
    OodShift ood = [] {
        OodShift s;
        s.dims = {0, 1, 2};
        s.offset_min = 0.0;
        s.offset_max = 0.0;
        s.scale_min = 0.3;
        s.scale_max = 0.6;
        return s;
    }();

    // Artifact file names, relative to the output directory.
    std::string train_path = "train_tracks.csv";
    std::string test_path = "test_tracks.csv";
    std::string ood_path = "ood_tracks.csv";

    // Model. rho_scale below 0.5 keeps every 3x3 correlation matrix the head
    // can emit strictly diagonally dominant, so no training trajectory can
    // leave the PD cone; the generator's axis ratios keep true correlations
    // inside that reach.
    std::vector<int> hidden = {64, 64};
    double dropout = 0.05;
    double rho_scale = 0.48;

    // Training.
    int joint_epochs = 40;
    int joint_cov_epochs = 60;
    int tune_epochs = 20;
    int batch_size = 64;
    double lr = 1e-3;
    // The full-covariance tune resumes from an already-converged joint fit;
    // a fresh optimizer at the base rate overshoots the correlation head.
    double cov_tune_lr = 2e-4;
    KalmanTrainConfig kalman = [] {
        KalmanTrainConfig k;
        k.epochs = 8;
        k.adam.lr = 2e-4;
        return k;
    }();

    std::vector<Method> methods = {Method::Fixed, Method::MleVariance, Method::MleCovariance,
                                   Method::KalmanCovariance};

    // Epistemic sampling (OOD evaluation).
    int epistemic_samples = 30;

    // Filter at evaluation time.
    bool time_correlated_filter = false;
    double sigma_v_max = 200.0;
    bool joseph_update = false;

    // Rainbow demo.
    int rainbow_points = 200;
    bool rainbow_heteroscedastic = true;
    double rainbow_noise_scale = 1.0;
    int rainbow_epochs = 400;
    std::vector<int> rainbow_hidden = {32};
    double rainbow_lr = 5e-3;
    // k = 2 correlations are positive definite for any |rho| < 1, so the
    // rainbow head can reach the arc's near-degenerate ellipses.
    double rainbow_rho_scale = 0.95;

    nlohmann::json echo;            // effective config, canonical form
    std::uint64_t config_hash = 0;  // fnv1a64 of echo.dump()

    std::uint64_t seed_for(detail::SeedUse use) const { return detail::derive_seed(seed, use); }
};

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                                std::optional<std::uint64_t> seed_override = {},
                                                std::optional<int> threads_override = {}) {
    ExperimentConfig cfg;
    detail::ConfigReader root(j, "");
    cfg.seed = root.get<std::uint64_t>("seed", cfg.seed);
    cfg.threads = root.get<int>("threads", cfg.threads);

    {
        detail::ConfigReader d = root.child("dataset");
        cfg.train_tracks = d.get<int>("train_tracks", cfg.train_tracks);
        cfg.test_tracks = d.get<int>("test_tracks", cfg.test_tracks);
        cfg.track.steps = d.get<int>("steps", cfg.track.steps);
        cfg.track.dt = d.get<double>("dt", cfg.track.dt);
        cfg.track.phi = d.get<double>("phi", cfg.track.phi);
        cfg.track.speed_min_mm_s = d.get<double>("speed_min_mm_s", cfg.track.speed_min_mm_s);
        cfg.track.speed_max_mm_s = d.get<double>("speed_max_mm_s", cfg.track.speed_max_mm_s);
        cfg.track.box_mm = d.get<double>("box_mm", cfg.track.box_mm);
        cfg.track.pos_encoding_noise_mm = d.get<double>("pos_encoding_noise_mm", cfg.track.pos_encoding_noise_mm);
        cfg.track.noise.base_sigma_mm = d.get<double>("base_sigma_mm", cfg.track.noise.base_sigma_mm);
        std::vector<double> ratios =
            d.get<std::vector<double>>("axis_ratios", {cfg.track.noise.axis_ratios[0], cfg.track.noise.axis_ratios[1],
                                                       cfg.track.noise.axis_ratios[2]});
        if (ratios.size() != 3) throw ConfigError("config: dataset.axis_ratios must have three entries");
        cfg.track.noise.axis_ratios = (Vec(3) << ratios[0], ratios[1], ratios[2]).finished();
        cfg.track.noise.radial_floor = d.get<double>("radial_floor", cfg.track.noise.radial_floor);
        cfg.track.noise.radial_gain = d.get<double>("radial_gain", cfg.track.noise.radial_gain);
        {
            detail::ConfigReader o = d.child("ood");
            cfg.ood_enabled = o.get<bool>("enabled", cfg.ood_enabled);
            cfg.ood.dims = o.get<std::vector<int>>("dims", cfg.ood.dims);
            cfg.ood.offset_min = o.get<double>("offset_min", cfg.ood.offset_min);
            cfg.ood.offset_max = o.get<double>("offset_max", cfg.ood.offset_max);
            cfg.ood.scale_min = o.get<double>("scale_min", cfg.ood.scale_min);
            cfg.ood.scale_max = o.get<double>("scale_max", cfg.ood.scale_max);
            o.finish();
        }
        d.finish();
    }
    {
        detail::ConfigReader p = root.child("paths");
        cfg.train_path = p.get<std::string>("train", cfg.train_path);
        cfg.test_path = p.get<std::string>("test", cfg.test_path);
        cfg.ood_path = p.get<std::string>("ood", cfg.ood_path);
        p.finish();
    }
    {
        detail::ConfigReader m = root.child("model");
        cfg.hidden = m.get<std::vector<int>>("hidden", cfg.hidden);
        cfg.dropout = m.get<double>("dropout", cfg.dropout);
        cfg.rho_scale = m.get<double>("rho_scale", cfg.rho_scale);
        m.finish();
    }
    {
        detail::ConfigReader t = root.child("training");
        cfg.joint_epochs = t.get<int>("joint_epochs", cfg.joint_epochs);
        cfg.joint_cov_epochs = t.get<int>("joint_cov_epochs", cfg.joint_cov_epochs);
        cfg.tune_epochs = t.get<int>("tune_epochs", cfg.tune_epochs);
        cfg.batch_size = t.get<int>("batch_size", cfg.batch_size);
        cfg.lr = t.get<double>("lr", cfg.lr);
        cfg.cov_tune_lr = t.get<double>("cov_tune_lr", cfg.cov_tune_lr);
        {
            detail::ConfigReader k = t.child("kalman");
            cfg.kalman.epochs = k.get<int>("epochs", cfg.kalman.epochs);
            cfg.kalman.window = k.get<int>("window", cfg.kalman.window);
            cfg.kalman.burn_in = k.get<int>("burn_in", cfg.kalman.burn_in);
            cfg.kalman.adam.lr = k.get<double>("lr", cfg.kalman.adam.lr);
            cfg.kalman.clip_norm = k.get<double>("clip_norm", cfg.kalman.clip_norm);
            cfg.kalman.subset = k.get<std::vector<int>>("subset", cfg.kalman.subset);
            std::string source = k.get<std::string>("source", "dataset");
            if (source == "dataset") {
                cfg.kalman.source = KalmanTrainConfig::MeasurementSource::Dataset;
            } else if (source == "model-mean") {
                cfg.kalman.source = KalmanTrainConfig::MeasurementSource::ModelMean;
            } else {
                throw ConfigError("config: training.kalman.source must be dataset | model-mean");
            }
            std::string mode = k.get<std::string>("mode", "cov-only");
            if (mode == "cov-only") {
                cfg.kalman.mode = KalmanTrainConfig::Mode::CovOnly;
            } else if (mode == "joint") {
                cfg.kalman.mode = KalmanTrainConfig::Mode::Joint;
            } else {
                throw ConfigError("config: training.kalman.mode must be cov-only | joint");
            }
            k.finish();
        }
        t.finish();
    }
    {
        std::vector<std::string> names;
        for (Method m : cfg.methods) names.push_back(method_name(m));
        names = root.get<std::vector<std::string>>("methods", names);
        if (names.empty()) throw ConfigError("config: methods must be non-empty");
        cfg.methods.clear();
        for (const std::string& n : names) cfg.methods.push_back(method_from_name(n));
    }
    {
        detail::ConfigReader e = root.child("epistemic");
        cfg.epistemic_samples = e.get<int>("samples", cfg.epistemic_samples);
        e.finish();
    }
    {
        detail::ConfigReader f = root.child("filter");
        std::string type = f.get<std::string>("type", "standard");
        if (type == "standard") {
            cfg.time_correlated_filter = false;
        } else if (type == "time-correlated") {
            cfg.time_correlated_filter = true;
        } else {
            throw ConfigError("config: filter.type must be standard | time-correlated");
        }
        cfg.sigma_v_max = f.get<double>("sigma_v_max_mm_s", cfg.sigma_v_max);
        cfg.joseph_update = f.get<bool>("joseph", cfg.joseph_update);
        f.finish();
    }
    {
        detail::ConfigReader r = root.child("rainbow");
        cfg.rainbow_points = r.get<int>("n_points", cfg.rainbow_points);
        cfg.rainbow_heteroscedastic = r.get<bool>("heteroscedastic", cfg.rainbow_heteroscedastic);
        cfg.rainbow_noise_scale = r.get<double>("noise_scale", cfg.rainbow_noise_scale);
        cfg.rainbow_epochs = r.get<int>("epochs", cfg.rainbow_epochs);
        cfg.rainbow_hidden = r.get<std::vector<int>>("hidden", cfg.rainbow_hidden);
        cfg.rainbow_lr = r.get<double>("lr", cfg.rainbow_lr);
        cfg.rainbow_rho_scale = r.get<double>("rho_scale", cfg.rainbow_rho_scale);
        r.finish();
    }
    root.finish();

    if (seed_override) cfg.seed = *seed_override;
    if (threads_override) cfg.threads = *threads_override;
    if (cfg.threads < 1) throw ConfigError("config: threads must be >= 1");
    if (cfg.train_tracks < 1 || cfg.test_tracks < 1) throw ConfigError("config: track counts must be positive");
    if (cfg.epistemic_samples < 1) throw ConfigError("config: epistemic.samples must be >= 1");
    validate_track_config(cfg.track);

    // Canonical echo: nlohmann objects iterate in sorted key order, so the
    // dump (and its hash) is independent of key order in the source file.
    nlohmann::json echo;
    echo["seed"] = cfg.seed;
    echo["threads"] = cfg.threads;
    echo["dataset"] = {{"train_tracks", cfg.train_tracks},
                       {"test_tracks", cfg.test_tracks},
                       {"steps", cfg.track.steps},
                       {"dt", cfg.track.dt},
                       {"phi", cfg.track.phi},
                       {"speed_min_mm_s", cfg.track.speed_min_mm_s},
                       {"speed_max_mm_s", cfg.track.speed_max_mm_s},
                       {"box_mm", cfg.track.box_mm},
                       {"pos_encoding_noise_mm", cfg.track.pos_encoding_noise_mm},
                       {"base_sigma_mm", cfg.track.noise.base_sigma_mm},
                       {"axis_ratios",
                        {cfg.track.noise.axis_ratios[0], cfg.track.noise.axis_ratios[1],
                         cfg.track.noise.axis_ratios[2]}},
                       {"radial_floor", cfg.track.noise.radial_floor},
                       {"radial_gain", cfg.track.noise.radial_gain},
                       {"ood",
                        {{"enabled", cfg.ood_enabled},
                         {"dims", cfg.ood.dims},
                         {"offset_min", cfg.ood.offset_min},
                         {"offset_max", cfg.ood.offset_max},
                         {"scale_min", cfg.ood.scale_min},
                         {"scale_max", cfg.ood.scale_max}}}};
    echo["paths"] = {{"train", cfg.train_path}, {"test", cfg.test_path}, {"ood", cfg.ood_path}};
    echo["model"] = {{"hidden", cfg.hidden}, {"dropout", cfg.dropout}, {"rho_scale", cfg.rho_scale}};
    echo["training"] = {{"joint_epochs", cfg.joint_epochs},
                        {"joint_cov_epochs", cfg.joint_cov_epochs},
                        {"tune_epochs", cfg.tune_epochs},
                        {"batch_size", cfg.batch_size},
                        {"lr", cfg.lr},
                        {"cov_tune_lr", cfg.cov_tune_lr},
                        {"kalman",
                         {{"epochs", cfg.kalman.epochs},
                          {"window", cfg.kalman.window},
                          {"burn_in", cfg.kalman.burn_in},
                          {"lr", cfg.kalman.adam.lr},
                          {"clip_norm", cfg.kalman.clip_norm},
                          {"subset", cfg.kalman.subset},
                          {"source",
                           cfg.kalman.source == KalmanTrainConfig::MeasurementSource::Dataset ? "dataset"
                                                                                              : "model-mean"},
                          {"mode", cfg.kalman.mode == KalmanTrainConfig::Mode::CovOnly ? "cov-only" : "joint"}}}};
    {
        std::vector<std::string> names;
        for (Method m : cfg.methods) names.push_back(method_name(m));
        echo["methods"] = names;
    }
    echo["epistemic"] = {{"samples", cfg.epistemic_samples}};
    echo["filter"] = {{"type", cfg.time_correlated_filter ? "time-correlated" : "standard"},
                      {"sigma_v_max_mm_s", cfg.sigma_v_max},
                      {"joseph", cfg.joseph_update}};
    echo["rainbow"] = {{"n_points", cfg.rainbow_points},
                       {"heteroscedastic", cfg.rainbow_heteroscedastic},
                       {"noise_scale", cfg.rainbow_noise_scale},
                       {"epochs", cfg.rainbow_epochs},
                       {"hidden", cfg.rainbow_hidden},
                       {"lr", cfg.rainbow_lr},
                       {"rho_scale", cfg.rainbow_rho_scale}};
    cfg.echo = std::move(echo);
    cfg.config_hash = io::fnv1a64(cfg.echo.dump());
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                               std::optional<std::uint64_t> seed_override = {},
                                               std::optional<int> threads_override = {}) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_experiment_config(j, seed_override, threads_override);
}

// ---------------------------------------------------------------------------
// Shared artifact helpers.

inline nlohmann::json file_entry(const std::filesystem::path& path, std::size_t rows, int tracks) {
    nlohmann::json j;
    j["file"] = path.filename().string();
    j["fnv1a64"] = io::hex64(io::fnv1a64(io::read_file(path)));
    j["rows"] = rows;
    j["tracks"] = tracks;
    return j;
}

inline void save_fixed_covariance(const Mat& sigma, std::uint64_t config_hash, std::uint64_t seed,
                                  const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "covfilt-fixed-covariance";
    j["version"] = 1;
    j["config_hash"] = io::hex64(config_hash);
    j["seed"] = seed;
    j["rows"] = sigma.rows();
    j["cols"] = sigma.cols();
    j["data_b64"] = io::mat_to_base64(sigma);
    io::write_file(path, j.dump(2) + "\n");
}

inline Mat load_fixed_covariance(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "covfilt-fixed-covariance")
        throw std::runtime_error(path.string() + ": not a fixed-covariance file");
    return io::mat_from_base64(j.at("data_b64").get<std::string>(), j.at("rows").get<Eigen::Index>(),
                               j.at("cols").get<Eigen::Index>());
}

inline void save_time_correlation(const TimeCorrelationEstimate& est, std::uint64_t config_hash, std::uint64_t seed,
                                  const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "covfilt-time-correlation";
    j["version"] = 1;
    j["config_hash"] = io::hex64(config_hash);
    j["seed"] = seed;
    std::vector<double> phi(est.phi.data(), est.phi.data() + est.phi.size());
    j["phi"] = phi;
    j["correlated_fraction"] = est.correlated_fraction;
    io::write_file(path, j.dump(2) + "\n");
}

inline TimeCorrelationEstimate load_time_correlation(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(io::read_file(path));
    if (j.value("format", "") != "covfilt-time-correlation")
        throw std::runtime_error(path.string() + ": not a time-correlation file");
    TimeCorrelationEstimate est;
    std::vector<double> phi = j.at("phi").get<std::vector<double>>();
    est.phi = Eigen::Map<const Vec>(phi.data(), static_cast<Eigen::Index>(phi.size()));
    est.correlated_fraction = j.at("correlated_fraction").get<double>();
    return est;
}

inline void require_file(const std::filesystem::path& path, const std::string& hint) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("missing " + path.string() + " (" + hint + ")");
}

// ---------------------------------------------------------------------------
// generate: train/test/OOD datasets plus a manifest of seeds and hashes.

inline void cmd_generate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    TrackConfig train_cfg = cfg.track;
    train_cfg.seed = cfg.seed_for(detail::SeedUse::TrainTracks);
    std::vector<TrackDataset> train = generate_tracks(train_cfg, cfg.train_tracks);

    TrackConfig test_cfg = cfg.track;
    test_cfg.seed = cfg.seed_for(detail::SeedUse::TestTracks);
    std::vector<TrackDataset> test = generate_tracks(test_cfg, cfg.test_tracks);

    save_tracks_csv(train, out_dir / cfg.train_path);
    save_tracks_csv(test, out_dir / cfg.test_path);

    nlohmann::json files;
    files["train"] = file_entry(out_dir / cfg.train_path, train.size() * static_cast<std::size_t>(cfg.track.steps),
                                cfg.train_tracks);
    files["test"] =
        file_entry(out_dir / cfg.test_path, test.size() * static_cast<std::size_t>(cfg.track.steps), cfg.test_tracks);

    if (cfg.ood_enabled) {
        std::vector<TrackDataset> ood = test;
        OodShift shift = cfg.ood;
        shift.seed = cfg.seed_for(detail::SeedUse::OodShift);
        apply_ood_shift(ood, shift);
        save_tracks_csv(ood, out_dir / cfg.ood_path);
        files["ood"] =
            file_entry(out_dir / cfg.ood_path, ood.size() * static_cast<std::size_t>(cfg.track.steps), cfg.test_tracks);
    }

    nlohmann::json manifest;
    manifest["config_hash"] = io::hex64(cfg.config_hash);
    manifest["seed"] = cfg.seed;
    manifest["generator"] = "xoshiro256++ / splitmix64";
    manifest["seeds"] = {{"train_tracks", train_cfg.seed},
                         {"test_tracks", test_cfg.seed},
                         {"ood_shift", cfg.seed_for(detail::SeedUse::OodShift)}};
    manifest["files"] = std::move(files);
    manifest["config"] = cfg.echo;
    io::write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    log_info("generate: wrote datasets and manifest to " + out_dir.string());
}

// ---------------------------------------------------------------------------
// train: shared trunk/mean stage, then per-method covariance artifacts.

inline bool wants(const ExperimentConfig& cfg, Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

inline void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    require_file(out_dir / cfg.train_path, "run the generate step first");
    std::vector<TrackDataset> tracks = load_tracks_csv(out_dir / cfg.train_path);
    SampleSet samples = samples_from_tracks(tracks);

    // Base stage, two legs. First joint maximum likelihood over mean and
    // variances with the diagonal loss: while the mean is unfitted, residual
    // cross-moments are dominated by mean error and would push correlations
    // to jointly extreme values that leave the k = 3 PD cone, so the
    // correlation head stays out of the graph. Once residuals are genuine
    // noise, a joint full-likelihood leg teaches the trunk the correlation
    // structure; the targets now sit inside the cone and the likelihood
    // repels its boundary. Every method below shares this trunk and mean
    // path, so the comparison isolates the uncertainty representation.
    ModelParams base = make_model(8, 3, cfg.hidden, cfg.dropout, cfg.rho_scale,
                                  cfg.seed_for(detail::SeedUse::ModelInit));
    fit_standardization(base, samples);
    init_variance_bias_from_residuals(base, samples);

    MleConfig joint;
    joint.epochs = cfg.joint_epochs;
    joint.batch_size = cfg.batch_size;
    joint.adam.lr = cfg.lr;
    joint.mode = MleConfig::Mode::Joint;
    joint.cov_loss = MleConfig::CovLoss::Diagonal;
    joint.seed = cfg.seed_for(detail::SeedUse::JointTrain);
    TrainReport joint_report = train_mle(base, samples, joint);
    joint_report.config_echo = cfg.echo;
    if (cfg.joint_cov_epochs > 0) {
        MleConfig joint_cov = joint;
        joint_cov.epochs = cfg.joint_cov_epochs;
        joint_cov.cov_loss = MleConfig::CovLoss::Full;
        joint_cov.seed = cfg.seed_for(detail::SeedUse::JointTrain) ^ 0x517cc1b727220a95ULL;
        TrainReport full_report = train_mle(base, samples, joint_cov);
        joint_report.epoch_loss.insert(joint_report.epoch_loss.end(), full_report.epoch_loss.begin(),
                                       full_report.epoch_loss.end());
        joint_report.epoch_grad_norm.insert(joint_report.epoch_grad_norm.end(), full_report.epoch_grad_norm.begin(),
                                            full_report.epoch_grad_norm.end());
        joint_report.final_loss = full_report.final_loss;
    }
    io::write_file(out_dir / "report_joint.json", joint_report.to_json());
    io::write_file(out_dir / "curve_joint.csv", joint_report.curve_csv());
    save_model(base, out_dir / "model_base.json");

    nlohmann::json artifacts;
    auto record = [&](const std::string& name) {
        artifacts[name] = io::hex64(io::fnv1a64(io::read_file(out_dir / name)));
    };
    record("model_base.json");

    std::vector<Vec> rs = residuals(base, samples);
    if (wants(cfg, Method::Fixed)) {
        Mat fixed = fixed_covariance_baseline(rs);
        save_fixed_covariance(fixed, cfg.config_hash, cfg.seed, out_dir / "fixed_covariance.json");
        record("fixed_covariance.json");
    }

    // Residual lag-1 autocorrelation of the frozen mean's errors feeds the
    // time-correlated filter variant at evaluation.
    {
        std::vector<std::vector<Vec>> residual_tracks;
        for (const TrackDataset& track : tracks) {
            std::vector<Vec> r;
            for (const TrackStep& st : track.steps) r.push_back(st.y - forward_heads(base, st.x).mean);
            residual_tracks.push_back(std::move(r));
        }
        TimeCorrelationEstimate est = estimate_time_correlation(residual_tracks);
        save_time_correlation(est, cfg.config_hash, cfg.seed, out_dir / "time_correlation.json");
        record("time_correlation.json");
    }

    auto tune = [&](MleConfig::CovLoss loss, detail::SeedUse seed_use) {
        ModelParams m = base;
        MleConfig tune_cfg;
        tune_cfg.epochs = cfg.tune_epochs;
        tune_cfg.batch_size = cfg.batch_size;
        tune_cfg.adam.lr = loss == MleConfig::CovLoss::Full ? cfg.cov_tune_lr : cfg.lr;
        tune_cfg.mode = MleConfig::Mode::CovOnly;
        tune_cfg.cov_loss = loss;
        tune_cfg.seed = cfg.seed_for(seed_use);
        TrainReport report = train_mle(m, samples, tune_cfg);
        report.config_echo = cfg.echo;
        return std::make_pair(std::move(m), std::move(report));
    };

    if (wants(cfg, Method::MleVariance)) {
        auto [m, report] = tune(MleConfig::CovLoss::Diagonal, detail::SeedUse::VarianceTune);
        save_model(m, out_dir / "model_mle_variance.json");
        io::write_file(out_dir / "report_mle_variance.json", report.to_json());
        io::write_file(out_dir / "curve_mle_variance.csv", report.curve_csv());
        record("model_mle_variance.json");
    }

    std::optional<ModelParams> cov_model;
    if (wants(cfg, Method::MleCovariance) || wants(cfg, Method::KalmanCovariance)) {
        auto [m, report] = tune(MleConfig::CovLoss::Full, detail::SeedUse::CovarianceTune);
        cov_model = std::move(m);
        if (wants(cfg, Method::MleCovariance)) {
            save_model(*cov_model, out_dir / "model_mle_covariance.json");
            io::write_file(out_dir / "report_mle_covariance.json", report.to_json());
            io::write_file(out_dir / "curve_mle_covariance.csv", report.curve_csv());
            record("model_mle_covariance.json");
        }
    }

    if (wants(cfg, Method::KalmanCovariance)) {
        // Fine-tune through the filter, starting from the MLE covariance.
        ModelParams m = *cov_model;
        KalmanTrainConfig kcfg = cfg.kalman;
        kcfg.seed = cfg.seed_for(detail::SeedUse::KalmanTune);
        FilterSpec spec = make_cv_spec(cfg.track.dt, cfg.sigma_v_max);
        spec.joseph_update = cfg.joseph_update;
        TrainReport report = train_kalman(m, tracks, spec, kcfg);
        report.config_echo = cfg.echo;
        save_model(m, out_dir / "model_kalman_covariance.json");
        io::write_file(out_dir / "report_kalman_covariance.json", report.to_json());
        io::write_file(out_dir / "curve_kalman_covariance.csv", report.curve_csv());
        record("model_kalman_covariance.json");
    }

    nlohmann::json manifest;
    manifest["config_hash"] = io::hex64(cfg.config_hash);
    manifest["seed"] = cfg.seed;
    manifest["final_joint_loss"] = joint_report.final_loss;
    manifest["artifacts"] = std::move(artifacts);
    manifest["config"] = cfg.echo;
    io::write_file(out_dir / "train_manifest.json", manifest.dump(2) + "\n");
    log_info("train: wrote models and reports to " + out_dir.string());
}

// ---------------------------------------------------------------------------
// evaluate: per-method filtering, velocity errors, relative tables, curves.

// A per-step covariance source; deterministic in (track_index, step).
using SigmaSource = std::function<Mat(const TrackDataset&, std::size_t step)>;

struct TrackEval {
    double final_error = 0.0;
    std::vector<double> per_step_error;  // velocity error after t measurements, t = 1..steps
};

inline TrackEval eval_track(const FilterSpec& spec, const TrackDataset& track, const SigmaSource& sigma_of,
                            const TimeCorrelationEstimate* tc) {
    std::vector<Vec> ms;
    std::vector<Mat> cs;
    ms.reserve(track.steps.size());
    cs.reserve(track.steps.size());
    for (std::size_t i = 0; i < track.steps.size(); ++i) {
        ms.push_back(track.steps[i].y);
        cs.push_back(sigma_of(track, i));
    }

    FilterRun run;
    if (tc) {
        std::vector<Mat> uncorr;
        uncorr.reserve(cs.size());
        double white = std::max(0.0, 1.0 - tc->correlated_fraction);
        for (const Mat& c : cs) uncorr.push_back(white * c);
        run = run_filter_time_correlated(spec, tc->phi, ms, cs, uncorr);
    } else {
        run = run_filter(spec, ms, cs);
    }

    TrackEval out;
    out.per_step_error.reserve(run.states.size());
    for (std::size_t t = 0; t < run.states.size(); ++t) {
        Vec v_hat = run.states[t].z.segment(3, 3);  // augmented states keep [p; v] up front
        double err = (v_hat - track.steps[t].z.tail(3)).norm();
        out.per_step_error.push_back(err);
    }
    out.final_error = out.per_step_error.back();
    return out;
}

inline std::vector<TrackEval> run_tracking_eval(const std::vector<TrackDataset>& tracks, const FilterSpec& spec,
                                                const SigmaSource& sigma_of, int threads,
                                                const TimeCorrelationEstimate* tc = nullptr) {
    std::vector<TrackEval> results(tracks.size());
    if (threads <= 1 || tracks.size() < 2) {
        for (std::size_t i = 0; i < tracks.size(); ++i) results[i] = eval_track(spec, tracks[i], sigma_of, tc);
        return results;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= tracks.size()) return;
                try {
                    results[i] = eval_track(spec, tracks[i], sigma_of, tc);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

inline double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct EvalRow {
    std::string split;        // in_domain | ood
    std::string filter;       // standard | time_correlated
    std::string method;
    std::string uncertainty;  // aleatoric | combined
    std::vector<TrackEval> tracks;
};

// Diagonal covariance from the s head alone; the variance method never
// reads the correlation head.
inline Mat diagonal_covariance(const ModelParams& p, const Vec& x) {
    HeadOutputs h = forward_heads(p, x);
    Mat sigma = Mat::Zero(p.output_dim, p.output_dim);
    for (Eigen::Index i = 0; i < p.output_dim; ++i) sigma(i, i) = std::exp(h.s[i]);
    return sigma;
}

inline SigmaSource aleatoric_source(Method m, const Mat* fixed, const ModelParams* model) {
    switch (m) {
        case Method::Fixed:
            return [sigma = *fixed](const TrackDataset&, std::size_t) { return sigma; };
        case Method::MleVariance:
            return [model](const TrackDataset& track, std::size_t i) {
                return diagonal_covariance(*model, track.steps[i].x);
            };
        case Method::MleCovariance:
        case Method::KalmanCovariance:
            return [model](const TrackDataset& track, std::size_t i) {
                return predict(*model, track.steps[i].x).covariance;
            };
    }
    throw std::logic_error("aleatoric_source: bad method");
}

// Epistemic-augmented source: MC-dropout predictive covariance per step.
// The seed is a pure function of (base seed, track, step) so results do not
// depend on thread scheduling.
inline SigmaSource combined_source(const ModelParams* model, bool diagonal, int n_samples, std::uint64_t base_seed) {
    return [model, diagonal, n_samples, base_seed](const TrackDataset& track, std::size_t i) {
        std::uint64_t seed = base_seed ^ (static_cast<std::uint64_t>(track.track_index) * 0x100000001B3ULL) ^
                             (static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL);
        EpistemicEstimate est = predict_with_epistemic(*model, track.steps[i].x, n_samples, seed);
        if (!diagonal) return est.predictive;
        Mat sigma = Mat::Zero(est.predictive.rows(), est.predictive.cols());
        sigma.diagonal() = est.predictive.diagonal();
        return sigma;
    };
}

inline std::string metrics_csv(const std::vector<EvalRow>& rows) {
    // Relative columns are against the fixed/aleatoric row of the same
    // split+filter. Two aggregations, labeled: ratio-of-aggregates divides
    // the aggregate errors; aggregate-of-ratios aggregates per-track ratios.
    std::string out = io::csv_line({"split", "filter", "method", "uncertainty", "tracks", "mean_velocity_error_mm_s",
                                    "median_velocity_error_mm_s", "rel_mean_ratio_of_aggregates",
                                    "rel_mean_aggregate_of_ratios", "rel_median_ratio_of_aggregates",
                                    "rel_median_aggregate_of_ratios"});
    auto finals = [](const EvalRow& row) {
        std::vector<double> v;
        v.reserve(row.tracks.size());
        for (const TrackEval& te : row.tracks) v.push_back(te.final_error);
        return v;
    };
    for (const EvalRow& row : rows) {
        const EvalRow* baseline = nullptr;
        for (const EvalRow& cand : rows)
            if (cand.split == row.split && cand.filter == row.filter && cand.method == "fixed" &&
                cand.uncertainty == "aleatoric")
                baseline = &cand;
        std::vector<double> errs = finals(row);
        double mean = mean_of(errs);
        double median = median_of(errs);
        std::string rel_mean_roa = "", rel_mean_aor = "", rel_med_roa = "", rel_med_aor = "";
        if (baseline) {
            std::vector<double> base_errs = finals(*baseline);
            rel_mean_roa = io::format_double(mean / mean_of(base_errs));
            rel_med_roa = io::format_double(median / median_of(base_errs));
            std::vector<double> ratios(errs.size());
            for (std::size_t i = 0; i < errs.size(); ++i) ratios[i] = errs[i] / base_errs[i];
            rel_mean_aor = io::format_double(mean_of(ratios));
            rel_med_aor = io::format_double(median_of(ratios));
        }
        out += io::csv_line({row.split, row.filter, row.method, row.uncertainty, std::to_string(row.tracks.size()),
                             io::format_double(mean), io::format_double(median), rel_mean_roa, rel_mean_aor,
                             rel_med_roa, rel_med_aor});
    }
    return out;
}

inline std::string metrics_text(const std::vector<EvalRow>& rows, const ExperimentConfig& cfg) {
    char buf[256];
    std::string out = "velocity estimation error at the final filter step (mm/s)\n";
    out += "config " + io::hex64(cfg.config_hash) + " seed " + std::to_string(cfg.seed) + "\n\n";
    std::snprintf(buf, sizeof buf, "%-10s %-16s %-20s %-10s %10s %10s %8s %8s\n", "split", "filter", "method",
                  "uncert.", "mean", "median", "rel.mean", "rel.med");
    out += buf;
    for (const EvalRow& row : rows) {
        const EvalRow* baseline = nullptr;
        for (const EvalRow& cand : rows)
            if (cand.split == row.split && cand.filter == row.filter && cand.method == "fixed" &&
                cand.uncertainty == "aleatoric")
                baseline = &cand;
        std::vector<double> errs;
        for (const TrackEval& te : row.tracks) errs.push_back(te.final_error);
        double mean = mean_of(errs);
        double median = median_of(errs);
        double rel_mean = 0.0, rel_med = 0.0;
        if (baseline) {
            std::vector<double> base_errs;
            for (const TrackEval& te : baseline->tracks) base_errs.push_back(te.final_error);
            rel_mean = mean / mean_of(base_errs);
            rel_med = median / median_of(base_errs);
        }
        std::snprintf(buf, sizeof buf, "%-10s %-16s %-20s %-10s %10.4f %10.4f %8.3f %8.3f\n", row.split.c_str(),
                      row.filter.c_str(), row.method.c_str(), row.uncertainty.c_str(), mean, median, rel_mean,
                      rel_med);
        out += buf;
    }
    out += "\nrel. columns are ratio-of-aggregates vs the fixed baseline; the csv also\n";
    out += "carries aggregate-of-ratios, which weighs every track equally.\n";
    return out;
}

inline std::string curve_csv(const std::vector<EvalRow>& rows) {
    std::string out = io::csv_line({"split", "filter", "method", "uncertainty", "count", "mean_velocity_error_mm_s"});
    for (const EvalRow& row : rows) {
        if (row.tracks.empty()) continue;
        const std::size_t steps = row.tracks[0].per_step_error.size();
        for (std::size_t t = 0; t < steps; ++t) {
            double acc = 0.0;
            for (const TrackEval& te : row.tracks) acc += te.per_step_error[t];
            out += io::csv_line({row.split, row.filter, row.method, row.uncertainty, std::to_string(t + 1),
                                 io::format_double(acc / static_cast<double>(row.tracks.size()))});
        }
    }
    return out;
}

inline std::string track_errors_csv(const std::vector<EvalRow>& rows) {
    std::string out = io::csv_line({"split", "filter", "method", "uncertainty", "track", "final_velocity_error_mm_s"});
    for (const EvalRow& row : rows)
        for (std::size_t i = 0; i < row.tracks.size(); ++i)
            out += io::csv_line({row.split, row.filter, row.method, row.uncertainty, std::to_string(i),
                                 io::format_double(row.tracks[i].final_error)});
    return out;
}

inline void cmd_evaluate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    require_file(out_dir / cfg.test_path, "run the generate step first");
    std::vector<TrackDataset> test = load_tracks_csv(out_dir / cfg.test_path);
    std::optional<std::vector<TrackDataset>> ood;
    if (cfg.ood_enabled) {
        require_file(out_dir / cfg.ood_path, "run the generate step first");
        ood = load_tracks_csv(out_dir / cfg.ood_path);
    }

    std::optional<Mat> fixed;
    std::map<Method, ModelParams> models;
    for (Method m : cfg.methods) {
        if (m == Method::Fixed) {
            require_file(out_dir / "fixed_covariance.json", "run the train step first");
            fixed = load_fixed_covariance(out_dir / "fixed_covariance.json");
        } else {
            std::string file = "model_" + method_name(m) + ".json";
            std::replace(file.begin(), file.end(), '-', '_');
            require_file(out_dir / file, "run the train step first");
            models.emplace(m, load_model(out_dir / file));
        }
    }

    FilterSpec spec = make_cv_spec(cfg.track.dt, cfg.sigma_v_max);
    spec.joseph_update = cfg.joseph_update;

    std::optional<TimeCorrelationEstimate> tc;
    if (cfg.time_correlated_filter) {
        require_file(out_dir / "time_correlation.json", "run the train step first");
        tc = load_time_correlation(out_dir / "time_correlation.json");
    }
    const TimeCorrelationEstimate* tc_ptr = tc ? &*tc : nullptr;
    const std::string filter_name = cfg.time_correlated_filter ? "time_correlated" : "standard";
    const std::uint64_t epi_seed = cfg.seed_for(detail::SeedUse::Epistemic);

    std::vector<EvalRow> rows;
    auto add_split = [&](const std::string& split, const std::vector<TrackDataset>& tracks) {
        for (Method m : cfg.methods) {
            SigmaSource src = aleatoric_source(m, fixed ? &*fixed : nullptr,
                                               models.count(m) ? &models.at(m) : nullptr);
            rows.push_back({split, filter_name, method_name(m), "aleatoric",
                            run_tracking_eval(tracks, spec, src, cfg.threads, tc_ptr)});
            log_info("evaluate: " + split + " " + method_name(m) + " aleatoric done");
        }
        if (split == "ood") {
            // Combined predictive covariance (mean spread + average aleatoric)
            // for the learned methods; the variance flavor stays diagonal.
            if (models.count(Method::MleVariance)) {
                SigmaSource src = combined_source(&models.at(Method::MleVariance), true, cfg.epistemic_samples,
                                                  epi_seed);
                rows.push_back({split, filter_name, method_name(Method::MleVariance), "combined",
                                run_tracking_eval(tracks, spec, src, cfg.threads, tc_ptr)});
                log_info("evaluate: ood mle-variance combined done");
            }
            if (models.count(Method::MleCovariance)) {
                SigmaSource src = combined_source(&models.at(Method::MleCovariance), false, cfg.epistemic_samples,
                                                  epi_seed);
                rows.push_back({split, filter_name, method_name(Method::MleCovariance), "combined",
                                run_tracking_eval(tracks, spec, src, cfg.threads, tc_ptr)});
                log_info("evaluate: ood mle-covariance combined done");
            }
        }
    };

    add_split("in_domain", test);
    if (ood) add_split("ood", *ood);

    io::write_file(out_dir / "metrics.csv", metrics_csv(rows));
    io::write_file(out_dir / "metrics.txt", metrics_text(rows, cfg));
    io::write_file(out_dir / "curve_velocity_vs_count.csv", curve_csv(rows));
    io::write_file(out_dir / "track_errors.csv", track_errors_csv(rows));

    nlohmann::json manifest;
    manifest["config_hash"] = io::hex64(cfg.config_hash);
    manifest["seed"] = cfg.seed;
    manifest["rows"] = rows.size();
    manifest["config"] = cfg.echo;
    io::write_file(out_dir / "evaluate_manifest.json", manifest.dump(2) + "\n");
    log_info("evaluate: wrote metrics to " + out_dir.string());
}

// ---------------------------------------------------------------------------
// demo: train a small model on the rainbow arc and emit per-point ellipses.

inline void cmd_demo_rainbow(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    RainbowConfig rc;
    rc.n_points = cfg.rainbow_points;
    rc.heteroscedastic = cfg.rainbow_heteroscedastic;
    rc.noise_scale = cfg.rainbow_noise_scale;
    rc.seed = cfg.seed_for(detail::SeedUse::RainbowData);
    std::vector<RainbowPoint> points = generate_rainbow(rc);
    SampleSet samples = samples_from_rainbow(points);

    ModelParams model = make_model(1, 2, cfg.rainbow_hidden, 0.0, cfg.rainbow_rho_scale,
                                   cfg.seed_for(detail::SeedUse::RainbowModel));
    fit_standardization(model, samples);
    init_variance_bias_from_residuals(model, samples);
    MleConfig mle;
    mle.epochs = cfg.rainbow_epochs;
    mle.batch_size = cfg.batch_size;
    mle.adam.lr = cfg.rainbow_lr;
    mle.seed = cfg.seed_for(detail::SeedUse::RainbowTrain);
    TrainReport report = train_mle(model, samples, mle);
    report.config_echo = cfg.echo;

    std::string out = io::csv_line({"t", "sample_0", "sample_1", "mean_true_0", "mean_true_1", "cov_true_00",
                                    "cov_true_01", "cov_true_11", "mean_pred_0", "mean_pred_1", "cov_pred_00",
                                    "cov_pred_01", "cov_pred_11", "ellipse_major_sd", "ellipse_minor_sd",
                                    "ellipse_angle_rad"});
    for (const RainbowPoint& p : points) {
        Vec t_in(1);
        t_in << p.t;
        GaussianPrediction pred = predict(model, t_in);
        Eigen::SelfAdjointEigenSolver<Mat> es(pred.covariance);
        // Eigenvalues ascend: index 1 is the major axis.
        double major = std::sqrt(std::max(0.0, es.eigenvalues()[1]));
        double minor = std::sqrt(std::max(0.0, es.eigenvalues()[0]));
        Vec axis = es.eigenvectors().col(1);
        double angle = std::atan2(axis[1], axis[0]);
        out += io::csv_line({io::format_double(p.t), io::format_double(p.sample[0]), io::format_double(p.sample[1]),
                             io::format_double(p.mean_true[0]), io::format_double(p.mean_true[1]),
                             io::format_double(p.cov_true(0, 0)), io::format_double(p.cov_true(0, 1)),
                             io::format_double(p.cov_true(1, 1)), io::format_double(pred.mean[0]),
                             io::format_double(pred.mean[1]), io::format_double(pred.covariance(0, 0)),
                             io::format_double(pred.covariance(0, 1)), io::format_double(pred.covariance(1, 1)),
                             io::format_double(major), io::format_double(minor), io::format_double(angle)});
    }
    io::write_file(out_dir / "rainbow_demo.csv", out);

    nlohmann::json manifest;
    manifest["config_hash"] = io::hex64(cfg.config_hash);
    manifest["seed"] = cfg.seed;
    manifest["final_loss"] = report.final_loss;
    manifest["rows"] = points.size();
    manifest["file_fnv1a64"] = io::hex64(io::fnv1a64(out));
    io::write_file(out_dir / "rainbow_demo_manifest.json", manifest.dump(2) + "\n");
    log_info("demo-rainbow: wrote " + (out_dir / "rainbow_demo.csv").string());
}

}  // namespace covfilt
