#pragma once

#include <covfilt/common.hpp>
#include <covfilt/spd.hpp>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covfilt::ad {

// Reverse-mode tape over dense 64-bit matrices. Values are computed eagerly
// at op construction, so shape errors and failed factorizations surface at
// the call site. backward() is a single reverse sweep over the tape.
//
// Matrix-valued ops that require symmetric input (cholesky, logdet_spd,
// solve_spd) symmetrize internally and accumulate symmetrized adjoints:
// the reported gradient of entry (i, j) assumes the (j, i) entry moves with
// it. Inputs farther than 1e-6 relative from symmetric are rejected.

struct Ref {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    Ref param(Mat value) { return push(std::move(value), true, nullptr); }
    Ref const_(Mat value) { return push(std::move(value), false, nullptr); }

    const Mat& value(Ref r) const { return node(r).value; }

    // Zero until backward() has run.
    const Mat& adjoint(Ref r) const { return node(r).adjoint; }

    bool requires_grad(Ref r) const { return node(r).requires_grad; }

    std::size_t size() const { return nodes_.size(); }

    // Node visits performed by the last backward() call; equals size().
    std::size_t last_backward_visits() const { return visits_; }

    void backward(Ref root) {
        if (backward_run_) throw std::logic_error("Tape::backward: tape already differentiated");
        const Node& r = node(root);
        if (r.value.rows() != 1 || r.value.cols() != 1)
            throw std::invalid_argument("Tape::backward: root must be 1x1, got " + shape_str(r.value));
        backward_run_ = true;
        nodes_[static_cast<std::size_t>(root.id)].adjoint(0, 0) = 1.0;
        visits_ = 0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            ++visits_;
            Node& n = nodes_[i];
            if (n.requires_grad && n.pull) n.pull(*this, n.adjoint);
        }
    }

    // Used by op implementations to add into a parent's adjoint. Constants
    // absorb nothing, which severs gradients at const_ nodes exactly.
    void accumulate(Ref r, const Mat& g) {
        Node& n = nodes_[static_cast<std::size_t>(r.id)];
        if (!n.requires_grad) return;
        if (g.rows() != n.adjoint.rows() || g.cols() != n.adjoint.cols())
            throw std::logic_error("Tape::accumulate: adjoint shape mismatch");
        n.adjoint += g;
    }

    Ref push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> pull) {
        Node n;
        n.adjoint = Mat::Zero(value.rows(), value.cols());
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.pull = std::move(pull);
        nodes_.push_back(std::move(n));
        return Ref{static_cast<int>(nodes_.size()) - 1};
    }

private:
    struct Node {
        Mat value;
        Mat adjoint;
        bool requires_grad = false;
        std::function<void(Tape&, const Mat&)> pull;  // adds into parents' adjoints
    };

    const Node& node(Ref r) const {
        if (!r.valid() || static_cast<std::size_t>(r.id) >= nodes_.size())
            throw std::invalid_argument("Tape: invalid node reference");
        return nodes_[static_cast<std::size_t>(r.id)];
    }

    std::vector<Node> nodes_;
    bool backward_run_ = false;
    std::size_t visits_ = 0;
};

namespace detail {

inline void require_same_shape(const Mat& a, const Mat& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

inline Ref add(Tape& t, Ref a, Ref b) {
    detail::require_same_shape(t.value(a), t.value(b), "add");
    bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(t.value(a) + t.value(b), rg, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

inline Ref sub(Tape& t, Ref a, Ref b) {
    detail::require_same_shape(t.value(a), t.value(b), "sub");
    bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(t.value(a) - t.value(b), rg, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, g);
        t.accumulate(b, Mat(-g));
    });
}

inline Ref matmul(Tape& t, Ref a, Ref b) {
    if (t.value(a).cols() != t.value(b).rows())
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(t.value(a)) + " * " +
                                    shape_str(t.value(b)));
    bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(t.value(a) * t.value(b), rg, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, Mat(g * t.value(b).transpose()));
        t.accumulate(b, Mat(t.value(a).transpose() * g));
    });
}

inline Ref transpose(Tape& t, Ref a) {
    return t.push(t.value(a).transpose(), t.requires_grad(a),
                  [a](Tape& t, const Mat& g) { t.accumulate(a, Mat(g.transpose())); });
}

inline Ref scale(Tape& t, Ref a, double c) {
    return t.push(c * t.value(a), t.requires_grad(a),
                  [a, c](Tape& t, const Mat& g) { t.accumulate(a, Mat(c * g)); });
}

inline Ref hadamard(Tape& t, Ref a, Ref b) {
    detail::require_same_shape(t.value(a), t.value(b), "hadamard");
    bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(t.value(a).cwiseProduct(t.value(b)), rg, [a, b](Tape& t, const Mat& g) {
        t.accumulate(a, Mat(g.cwiseProduct(t.value(b))));
        t.accumulate(b, Mat(g.cwiseProduct(t.value(a))));
    });
}

inline Ref sum(Tape& t, Ref a) {
    Mat v(1, 1);
    v(0, 0) = t.value(a).sum();
    return t.push(std::move(v), t.requires_grad(a), [a](Tape& t, const Mat& g) {
        t.accumulate(a, Mat(g(0, 0) * Mat::Ones(t.value(a).rows(), t.value(a).cols())));
    });
}

inline Ref exp(Tape& t, Ref a) {
    Mat v = t.value(a).array().exp();
    return t.push(std::move(v), t.requires_grad(a), [a](Tape& t, const Mat& g) {
        t.accumulate(a, Mat(g.cwiseProduct(Mat(t.value(a).array().exp()))));
    });
}

inline Ref tanh(Tape& t, Ref a) {
    Mat v = t.value(a).array().tanh();
    return t.push(std::move(v), t.requires_grad(a), [a](Tape& t, const Mat& g) {
        Mat th = t.value(a).array().tanh();
        t.accumulate(a, Mat(g.cwiseProduct(Mat(1.0 - th.array().square()))));
    });
}

// Natural log of a positive 1x1 value.
inline Ref log(Tape& t, Ref a) {
    const Mat& av = t.value(a);
    if (av.rows() != 1 || av.cols() != 1)
        throw std::invalid_argument("log: expected a 1x1 value, got " + shape_str(av));
    if (!(av(0, 0) > 0.0)) throw std::invalid_argument("log: value must be positive, got " + std::to_string(av(0, 0)));
    Mat v(1, 1);
    v(0, 0) = std::log(av(0, 0));
    return t.push(std::move(v), t.requires_grad(a), [a](Tape& t, const Mat& g) {
        Mat d(1, 1);
        d(0, 0) = g(0, 0) / t.value(a)(0, 0);
        t.accumulate(a, d);
    });
}

// Extract the contiguous block [r0, r0+rows) x [c0, c0+cols).
inline Ref slice(Tape& t, Ref a, Eigen::Index r0, Eigen::Index c0, Eigen::Index rows, Eigen::Index cols) {
    const Mat& av = t.value(a);
    if (r0 < 0 || c0 < 0 || rows < 0 || cols < 0 || r0 + rows > av.rows() || c0 + cols > av.cols())
        throw std::invalid_argument("slice: block [" + std::to_string(r0) + "," + std::to_string(c0) + "]+" +
                                    std::to_string(rows) + "x" + std::to_string(cols) + " out of range for " +
                                    shape_str(av));
    return t.push(av.block(r0, c0, rows, cols), t.requires_grad(a),
                  [a, r0, c0, rows, cols](Tape& t, const Mat& g) {
                      Mat pad = Mat::Zero(t.value(a).rows(), t.value(a).cols());
                      pad.block(r0, c0, rows, cols) = g;
                      t.accumulate(a, pad);
                  });
}

// k x 1 vector to k x k diagonal matrix.
inline Ref diag_from_vec(Tape& t, Ref a) {
    const Mat& av = t.value(a);
    if (av.cols() != 1) throw std::invalid_argument("diag_from_vec: expected a column vector, got " + shape_str(av));
    Mat v = Mat::Zero(av.rows(), av.rows());
    v.diagonal() = av.col(0);
    return t.push(std::move(v), t.requires_grad(a), [a](Tape& t, const Mat& g) {
        Mat d(t.value(a).rows(), 1);
        d.col(0) = g.diagonal();
        t.accumulate(a, d);
    });
}

namespace detail {

inline Mat checked_cholesky(Tape& t, Ref a, const char* op) {
    check_symmetric(t.value(a), op);
    return cholesky_lower(t.value(a));  // symmetrizes internally, throws if not PD
}

// Lower triangle with halved diagonal, zeros above.
inline Mat half_lower(const Mat& p) {
    Mat out = p.triangularView<Eigen::StrictlyLower>();
    out.diagonal() = 0.5 * p.diagonal();
    return out;
}

}  // namespace detail

// Lower Cholesky factor of a symmetric positive definite matrix.
inline Ref cholesky(Tape& t, Ref a) {
    Mat l = detail::checked_cholesky(t, a, "cholesky");
    return t.push(l, t.requires_grad(a), [a, l](Tape& t, const Mat& g) {
        Mat phi = detail::half_lower(Mat(l.transpose() * g));
        Mat y = solve_lower_transpose(l, phi);
        Mat m = solve_lower_transpose(l, Mat(y.transpose())).transpose();
        t.accumulate(a, Mat(0.5 * (m + m.transpose())));
    });
}

// Scalar log-determinant of a symmetric positive definite matrix.
inline Ref logdet_spd(Tape& t, Ref a) {
    Mat l = detail::checked_cholesky(t, a, "logdet_spd");
    Mat v(1, 1);
    v(0, 0) = logdet_from_cholesky(l);
    return t.push(std::move(v), t.requires_grad(a), [a, l](Tape& t, const Mat& g) {
        Mat inv = solve_spd_with(l, Mat::Identity(l.rows(), l.cols()));
        t.accumulate(a, Mat(g(0, 0) * inv));
    });
}

// X = A^{-1} B with A symmetric positive definite; A^{-1} is never formed.
inline Ref solve_spd(Tape& t, Ref a, Ref b) {
    if (t.value(a).rows() != t.value(b).rows())
        throw std::invalid_argument("solve_spd: row counts disagree, " + shape_str(t.value(a)) + " vs " +
                                    shape_str(t.value(b)));
    Mat l = detail::checked_cholesky(t, a, "solve_spd");
    Mat x = solve_spd_with(l, t.value(b));
    bool rg = t.requires_grad(a) || t.requires_grad(b);
    return t.push(std::move(x), rg, [a, b, l, out = Ref{static_cast<int>(t.size())}](Tape& t, const Mat& g) {
        Mat w = solve_spd_with(l, g);
        t.accumulate(b, w);
        const Mat& xv = t.value(out);
        t.accumulate(a, Mat(-0.5 * (w * xv.transpose() + xv * w.transpose())));
    });
}

// Full covariance from per-dimension log-variances s (k x 1) and pairwise
// correlation logits r (k(k-1)/2 x 1, row-major upper triangle):
//   diag(i)  = exp(s_i)
//   off(i,j) = rho_scale * tanh(r_ij) * sqrt(exp(s_i) exp(s_j))
inline Ref cov_from_logits(Tape& t, Ref s, Ref r, double rho_scale) {
    const Mat& sv = t.value(s);
    const Mat& rv = t.value(r);
    if (sv.cols() != 1) throw std::invalid_argument("cov_from_logits: s must be a column vector, got " + shape_str(sv));
    const Eigen::Index k = sv.rows();
    const Eigen::Index m = k * (k - 1) / 2;
    if (rv.cols() != 1 && m > 0)
        throw std::invalid_argument("cov_from_logits: r must be a column vector, got " + shape_str(rv));
    if (rv.rows() != m)
        throw std::invalid_argument("cov_from_logits: expected " + std::to_string(m) + " correlation logits, got " +
                                    std::to_string(rv.rows()));
    if (!(rho_scale > 0.0) || rho_scale >= 1.0)
        throw std::invalid_argument("cov_from_logits: rho_scale must lie in (0, 1), got " + std::to_string(rho_scale));

    Mat cov(k, k);
    for (Eigen::Index i = 0; i < k; ++i) cov(i, i) = std::exp(sv(i, 0));
    Eigen::Index idx = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j, ++idx) {
            double v = rho_scale * std::tanh(rv(idx, 0)) * std::sqrt(cov(i, i) * cov(j, j));
            cov(i, j) = v;
            cov(j, i) = v;
        }
    }
    bool rg = t.requires_grad(s) || t.requires_grad(r);
    return t.push(cov, rg, [s, r, rho_scale, k](Tape& t, const Mat& g) {
        const Mat& sv = t.value(s);
        const Mat& rv = t.value(r);
        Mat ds = Mat::Zero(k, 1);
        Mat dr = Mat::Zero(k * (k - 1) / 2, 1);
        for (Eigen::Index i = 0; i < k; ++i) ds(i, 0) += g(i, i) * std::exp(sv(i, 0));
        Eigen::Index idx = 0;
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = i + 1; j < k; ++j, ++idx) {
                double th = std::tanh(rv(idx, 0));
                double root = std::sqrt(std::exp(sv(i, 0)) * std::exp(sv(j, 0)));
                double off = rho_scale * th * root;
                double gsum = g(i, j) + g(j, i);
                ds(i, 0) += 0.5 * gsum * off;
                ds(j, 0) += 0.5 * gsum * off;
                dr(idx, 0) += gsum * rho_scale * (1.0 - th * th) * root;
            }
        }
        t.accumulate(s, ds);
        t.accumulate(r, dr);
    });
}

}  // namespace covfilt::ad
