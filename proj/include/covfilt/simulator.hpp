#pragma once

#include <covfilt/common.hpp>
#include <covfilt/io.hpp>
#include <covfilt/kalman.hpp>
#include <covfilt/rng.hpp>
#include <covfilt/spd.hpp>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace covfilt {

// Synthetic data with known ground-truth covariances.
//
// Rainbow set: a 2-d arc whose noise ellipse rotates and scales smoothly
// with the curve parameter. Small, for demos and unit tests.
//
// Track sets: 3-d constant-velocity trajectories in a 1 m box, observed by a
// position sensor whose noise covariance depends on the input features
// (orientation via a quaternion, overall scale via the position). This is
// the dataset the tracking comparison runs on.

// ---------------------------------------------------------------------------
// Rainbow arc, k = 2, input is the scalar curve parameter t in [0, 1].

struct RainbowConfig {
    int n_points = 200;
    bool heteroscedastic = true;
    double noise_scale = 1.0;
    std::uint64_t seed = 1;
};

inline Vec rainbow_mean(double t) {
    double angle = std::numbers::pi * (1.0 - t);
    Vec m(2);
    m << std::cos(angle), std::sin(angle);
    return m;
}

inline Mat rainbow_cov(double t, const RainbowConfig& cfg) {
    if (!cfg.heteroscedastic) {
        double s = 0.1 * cfg.noise_scale;
        return s * s * Mat::Identity(2, 2);
    }
    // Major axis tracks the arc tangent, so the ellipse rotates with t while
    // both axes grow toward the end of the arc.
    double angle = std::numbers::pi * (1.0 - t) + std::numbers::pi / 2.0;
    double major = (0.05 + 0.25 * t) * cfg.noise_scale;
    double minor = (0.02 + 0.05 * (1.0 - t)) * cfg.noise_scale;
    Mat rot(2, 2);
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = major * major;
    d(1, 1) = minor * minor;
    return symmetrize(rot * d * rot.transpose());
}

struct RainbowPoint {
    double t;
    Vec sample;     // noisy observation
    Vec mean_true;
    Mat cov_true;
};

inline std::vector<RainbowPoint> generate_rainbow(const RainbowConfig& cfg) {
    if (cfg.n_points < 1) throw std::invalid_argument("generate_rainbow: n_points must be positive");
    Xoshiro256pp rng(cfg.seed);
    std::vector<RainbowPoint> out;
    out.reserve(static_cast<std::size_t>(cfg.n_points));
    for (int i = 0; i < cfg.n_points; ++i) {
        double t = cfg.n_points == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(cfg.n_points - 1);
        RainbowPoint p;
        p.t = t;
        p.mean_true = rainbow_mean(t);
        p.cov_true = rainbow_cov(t, cfg);
        p.sample = rng.mvn(p.mean_true, cholesky_lower(p.cov_true));
        out.push_back(std::move(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Constant-velocity tracks. Units are mm and seconds.
//
// State z = [p; v] (6), measurement y = p + noise (3). Input features x (8):
//   x[0..2]  noisy position scaled by half the box size
//   x[3..6]  orientation quaternion, w >= 0
//   x[7]     distractor, uniform on [-1, 1], carries no information
// The true measurement covariance is a function of x alone:
//   Sigma_true(x) = c(x)^2 R(q) diag(sig_a^2, sig_b^2, sig_c^2) R(q)^T
// with c(x) = radial_floor + radial_gain * min(|x[0..2]|, 1) and axis sigmas
// base_sigma_mm * axis_ratios. Anisotropy and overall scale each span close
// to an order of magnitude with the defaults.

struct NoiseField {
    double base_sigma_mm = 4.0;
    Vec axis_ratios = (Vec(3) << 0.3, 1.0, 2.5).finished();
    double radial_floor = 0.6;
    double radial_gain = 1.6;
};

struct TrackConfig {
    int steps = 25;
    double dt = 1.0;
    double speed_min_mm_s = 10.0;
    double speed_max_mm_s = 200.0;
    double box_mm = 1000.0;
    double pos_encoding_noise_mm = 2.0;
    NoiseField noise;
    double phi = 0.0;  // AR(1) coefficient of the measurement noise, 0 = white
    std::uint64_t seed = 1;
};

inline void validate_track_config(const TrackConfig& cfg) {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("track config: " + msg); };
    if (cfg.steps < 1) fail("steps must be positive");
    if (!(cfg.dt > 0.0)) fail("dt must be positive");
    if (!(cfg.speed_min_mm_s > 0.0) || cfg.speed_max_mm_s < cfg.speed_min_mm_s) fail("bad speed range");
    if (!(cfg.box_mm > 0.0)) fail("box size must be positive");
    if (!(std::abs(cfg.phi) < 1.0)) fail("|phi| must be < 1");
    if (!(cfg.noise.base_sigma_mm > 0.0)) fail("base sigma must be positive");
    if (cfg.noise.axis_ratios.size() != 3 || cfg.noise.axis_ratios.minCoeff() <= 0.0)
        fail("axis ratios must be three positive values");
    if (!(cfg.noise.radial_floor > 0.0) || cfg.noise.radial_gain < 0.0) fail("bad radial scale parameters");
}

inline Mat rotation_from_quaternion(const Vec& q) {
    double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat r(3, 3);
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

// The covariance the simulator attaches to input features x.
inline Mat true_covariance(const Vec& x, const TrackConfig& cfg) {
    if (x.size() != 8) throw std::invalid_argument("true_covariance: expected 8 input features");
    double radius = x.head(3).norm();
    double c = cfg.noise.radial_floor + cfg.noise.radial_gain * std::min(radius, 1.0);
    Vec q = x.segment(3, 4);
    Mat r = rotation_from_quaternion(q);
    Mat d = Mat::Zero(3, 3);
    for (int i = 0; i < 3; ++i) {
        double s = c * cfg.noise.base_sigma_mm * cfg.noise.axis_ratios[i];
        d(i, i) = s * s;
    }
    return symmetrize(r * d * r.transpose());
}

struct TrackStep {
    Vec x;           // 8 input features
    Vec y;           // 3 measured position, mm
    Vec z;           // 6 true state [p; v]
    Mat sigma_true;  // 3x3
};

struct TrackDataset {
    int track_index = 0;
    std::vector<TrackStep> steps;
};

inline TrackDataset generate_track(const TrackConfig& cfg, int track_index) {
    Xoshiro256pp rng(cfg.seed, static_cast<std::uint64_t>(track_index));
    const double half = 0.5 * cfg.box_mm;

    Vec p0(3);
    for (int i = 0; i < 3; ++i) p0[i] = rng.uniform(-0.8 * half, 0.8 * half);
    Vec dir = rng.normal_vec(3);
    while (dir.norm() < 1e-9) dir = rng.normal_vec(3);
    dir.normalize();
    double speed = rng.uniform(cfg.speed_min_mm_s, cfg.speed_max_mm_s);
    Vec v = speed * dir;

    TrackDataset track;
    track.track_index = track_index;
    Vec noise_prev = Vec::Zero(3);
    for (int t = 0; t < cfg.steps; ++t) {
        TrackStep step;
        Vec p = p0 + v * (cfg.dt * static_cast<double>(t));
        step.z = Vec(6);
        step.z << p, v;

        Vec eta = cfg.pos_encoding_noise_mm * rng.normal_vec(3);
        Vec q = rng.normal_vec(4);
        while (q.norm() < 1e-9) q = rng.normal_vec(4);
        q.normalize();
        if (q[0] < 0.0) q = -q;
        step.x = Vec(8);
        step.x << (p + eta) / half, q, rng.uniform(-1.0, 1.0);

        step.sigma_true = true_covariance(step.x, cfg);
        Mat l = cholesky_lower(step.sigma_true);
        Vec noise;
        if (cfg.phi == 0.0 || t == 0) {
            noise = l * rng.normal_vec(3);
        } else {
            double white = std::sqrt(1.0 - cfg.phi * cfg.phi);
            noise = cfg.phi * noise_prev + white * (l * rng.normal_vec(3));
        }
        noise_prev = noise;
        step.y = p + noise;
        track.steps.push_back(std::move(step));
    }
    return track;
}

inline std::vector<TrackDataset> generate_tracks(const TrackConfig& cfg, int n_tracks) {
    validate_track_config(cfg);
    if (n_tracks < 1) throw std::invalid_argument("generate_tracks: n_tracks must be positive");
    std::vector<TrackDataset> out;
    out.reserve(static_cast<std::size_t>(n_tracks));
    for (int i = 0; i < n_tracks; ++i) out.push_back(generate_track(cfg, i));
    return out;
}

// Constant-velocity filter matrices matching the simulator.
inline FilterSpec make_cv_spec(double dt, double sigma_v_max = 200.0) {
    FilterSpec spec;
    spec.F = Mat::Identity(6, 6);
    spec.F.topRightCorner(3, 3) = dt * Mat::Identity(3, 3);
    spec.H = Mat::Zero(3, 6);
    spec.H.leftCols(3) = Mat::Identity(3, 3);
    spec.Q = Mat::Zero(6, 6);
    spec.init = FilterSpec::Init::FirstMeasurement;
    spec.sigma_v_max = sigma_v_max;
    return spec;
}

// ---------------------------------------------------------------------------
// Out-of-distribution shift: per-track constant affine distortion of
// designated input features. Labels, states, and true covariances stay
// untouched; only what the model sees moves off the training manifold.

struct OodShift {
    std::vector<int> dims = {3, 4, 5, 6, 7};  // quaternion + distractor
    double offset_min = 0.5;
    double offset_max = 1.5;
    double scale_min = 1.5;
    double scale_max = 2.5;
    std::uint64_t seed = 99;
};

inline void apply_ood_shift(std::vector<TrackDataset>& tracks, const OodShift& shift) {
    for (int d : shift.dims)
        if (d < 0 || d >= 8)
            throw std::invalid_argument("ood shift: feature index " + std::to_string(d) + " out of range");
    for (TrackDataset& track : tracks) {
        Xoshiro256pp rng(shift.seed, static_cast<std::uint64_t>(track.track_index));
        for (int d : shift.dims) {
            double offset = rng.uniform(shift.offset_min, shift.offset_max);
            double scale = rng.uniform(shift.scale_min, shift.scale_max);
            if (offset == 0.0 && scale == 1.0) continue;  // zero shift stays bit-identical
            for (TrackStep& step : track.steps) step.x[d] = scale * step.x[d] + offset;
        }
    }
}

// ---------------------------------------------------------------------------
// CSV round trips, byte-identical across save/load/save.

inline std::string tracks_to_csv(const std::vector<TrackDataset>& tracks) {
    std::vector<std::string> header{"track", "step"};
    for (int i = 0; i < 8; ++i) header.push_back("x" + std::to_string(i));
    for (int i = 0; i < 3; ++i) header.push_back("y" + std::to_string(i));
    for (int i = 0; i < 6; ++i) header.push_back("z" + std::to_string(i));
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) header.push_back("st" + std::to_string(i) + std::to_string(j));
    std::string out = io::csv_line(header);
    for (const TrackDataset& track : tracks) {
        for (std::size_t s = 0; s < track.steps.size(); ++s) {
            const TrackStep& st = track.steps[s];
            std::vector<std::string> cells{std::to_string(track.track_index), std::to_string(s)};
            for (int i = 0; i < 8; ++i) cells.push_back(io::format_double(st.x[i]));
            for (int i = 0; i < 3; ++i) cells.push_back(io::format_double(st.y[i]));
            for (int i = 0; i < 6; ++i) cells.push_back(io::format_double(st.z[i]));
            for (int i = 0; i < 3; ++i)
                for (int j = i; j < 3; ++j) cells.push_back(io::format_double(st.sigma_true(i, j)));
            out += io::csv_line(cells);
        }
    }
    return out;
}

inline void save_tracks_csv(const std::vector<TrackDataset>& tracks, const std::filesystem::path& path) {
    io::write_file(path, tracks_to_csv(tracks));
}

inline std::vector<TrackDataset> load_tracks_csv(const std::filesystem::path& path) {
    io::CsvTable table = io::read_csv(path);
    std::vector<std::size_t> xcol(8), ycol(3), zcol(6);
    for (int i = 0; i < 8; ++i) xcol[i] = table.column("x" + std::to_string(i));
    for (int i = 0; i < 3; ++i) ycol[i] = table.column("y" + std::to_string(i));
    for (int i = 0; i < 6; ++i) zcol[i] = table.column("z" + std::to_string(i));
    std::vector<std::size_t> stcol;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) stcol.push_back(table.column("st" + std::to_string(i) + std::to_string(j)));
    std::size_t track_col = table.column("track");
    std::size_t step_col = table.column("step");

    std::vector<TrackDataset> tracks;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::vector<double>& row = table.rows[r];
        int track_index = static_cast<int>(row[track_col]);
        if (tracks.empty() || tracks.back().track_index != track_index) {
            if (!tracks.empty() && track_index < tracks.back().track_index)
                throw std::runtime_error(path.string() + ": track ids must be grouped and ascending");
            tracks.push_back(TrackDataset{track_index, {}});
        }
        TrackDataset& track = tracks.back();
        if (static_cast<std::size_t>(row[step_col]) != track.steps.size())
            throw std::runtime_error(path.string() + ": row " + std::to_string(r + 2) + ": steps of track " +
                                     std::to_string(track_index) + " are out of order");
        TrackStep st;
        st.x = Vec(8);
        for (int i = 0; i < 8; ++i) st.x[i] = row[xcol[i]];
        st.y = Vec(3);
        for (int i = 0; i < 3; ++i) st.y[i] = row[ycol[i]];
        st.z = Vec(6);
        for (int i = 0; i < 6; ++i) st.z[i] = row[zcol[i]];
        st.sigma_true = Mat(3, 3);
        std::size_t c = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = i; j < 3; ++j, ++c) {
                st.sigma_true(i, j) = row[stcol[c]];
                st.sigma_true(j, i) = row[stcol[c]];
            }
        track.steps.push_back(std::move(st));
    }
    return tracks;
}

inline std::string rainbow_to_csv(const std::vector<RainbowPoint>& points) {
    std::string out = io::csv_line({"t", "y0", "y1", "mean0", "mean1", "st00", "st01", "st11"});
    for (const RainbowPoint& p : points) {
        out += io::csv_line({io::format_double(p.t), io::format_double(p.sample[0]), io::format_double(p.sample[1]),
                             io::format_double(p.mean_true[0]), io::format_double(p.mean_true[1]),
                             io::format_double(p.cov_true(0, 0)), io::format_double(p.cov_true(0, 1)),
                             io::format_double(p.cov_true(1, 1))});
    }
    return out;
}

inline void save_rainbow_csv(const std::vector<RainbowPoint>& points, const std::filesystem::path& path) {
    io::write_file(path, rainbow_to_csv(points));
}

inline std::vector<RainbowPoint> load_rainbow_csv(const std::filesystem::path& path) {
    io::CsvTable table = io::read_csv(path);
    std::vector<RainbowPoint> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        RainbowPoint p;
        p.t = table.at(r, "t");
        p.sample = Vec(2);
        p.sample << table.at(r, "y0"), table.at(r, "y1");
        p.mean_true = Vec(2);
        p.mean_true << table.at(r, "mean0"), table.at(r, "mean1");
        p.cov_true = Mat(2, 2);
        p.cov_true << table.at(r, "st00"), table.at(r, "st01"), table.at(r, "st01"), table.at(r, "st11");
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace covfilt
