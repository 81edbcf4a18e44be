#pragma once

// Finite-difference gradient oracle for tape graphs. Central differences,
// entirely independent of the backward pass. Matrices fed to symmetric-only
// ops are perturbed as (i, j)/(j, i) pairs, matching the tape's symmetrized
// adjoint convention; the analytic derivative of such a pair is the sum of
// the two adjoint entries.

#include <covfilt/autodiff.hpp>
#include <covfilt/common.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

namespace fd {

using covfilt::Mat;
using GraphFn = std::function<covfilt::ad::Ref(covfilt::ad::Tape&, const std::vector<covfilt::ad::Ref>&)>;

struct ParamSpec {
    Mat value;
    bool symmetric_pairs = false;
};

inline double eval(const GraphFn& fn, const std::vector<ParamSpec>& params) {
    covfilt::ad::Tape t;
    std::vector<covfilt::ad::Ref> refs;
    for (const ParamSpec& p : params) refs.push_back(t.param(p.value));
    return t.value(fn(t, refs))(0, 0);
}

struct CheckResult {
    double max_abs_diff = 0.0;
    double max_rel_diff = 0.0;
};

inline CheckResult check_gradients(const GraphFn& fn, std::vector<ParamSpec> params, double eps = 1e-6,
                                   double tol = 1e-6) {
    covfilt::ad::Tape t;
    std::vector<covfilt::ad::Ref> refs;
    for (const ParamSpec& p : params) refs.push_back(t.param(p.value));
    covfilt::ad::Ref root = fn(t, refs);
    t.backward(root);

    CheckResult result;
    for (std::size_t p = 0; p < params.size(); ++p) {
        const Mat adj = t.adjoint(refs[p]);
        Mat& value = params[p].value;
        for (Eigen::Index i = 0; i < value.rows(); ++i) {
            for (Eigen::Index j = 0; j < value.cols(); ++j) {
                if (params[p].symmetric_pairs && i > j) continue;
                const bool pair = params[p].symmetric_pairs && i != j;
                const double h = eps * std::max(1.0, std::abs(value(i, j)));

                const double saved_ij = value(i, j);
                const double saved_ji = pair ? value(j, i) : 0.0;
                value(i, j) = saved_ij + h;
                if (pair) value(j, i) = saved_ji + h;
                const double up = eval(fn, params);
                value(i, j) = saved_ij - h;
                if (pair) value(j, i) = saved_ji - h;
                const double down = eval(fn, params);
                value(i, j) = saved_ij;
                if (pair) value(j, i) = saved_ji;

                const double numeric = (up - down) / (2.0 * h);
                const double analytic = pair ? adj(i, j) + adj(j, i) : adj(i, j);
                const double abs_diff = std::abs(numeric - analytic);
                const double rel_diff = abs_diff / std::max({1.0, std::abs(numeric), std::abs(analytic)});
                result.max_abs_diff = std::max(result.max_abs_diff, abs_diff);
                result.max_rel_diff = std::max(result.max_rel_diff, rel_diff);
                INFO("param " << p << " entry (" << i << "," << j << "): numeric " << numeric << " analytic "
                              << analytic);
                CHECK(rel_diff <= tol);
            }
        }
    }
    return result;
}

}  // namespace fd
