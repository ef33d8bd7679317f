// SPDX-License-Identifier: MIT
#pragma once

#include <Eigen/Dense>

namespace tlvar {

// Dense third-order tensor of doubles. Entries are stored mode-1 fastest:
// (i, j, k) lives at flat offset i + d1*j + d1*d2*k, so the mode-1
// matricization is a zero-copy reshape of the buffer as a d1 x (d2*d3)
// column-major matrix. Mode-1 unfoldings dominate the estimators' inner
// loops, which is why this layout is fixed.
class Tensor3 {
  public:
    Tensor3() = default;

    Tensor3(Eigen::Index d1, Eigen::Index d2, Eigen::Index d3)
        : d1_(d1), d2_(d2), d3_(d3), data_(Eigen::VectorXd::Zero(d1 * d2 * d3)) {}

    static Tensor3 from_flat(Eigen::Index d1, Eigen::Index d2, Eigen::Index d3,
                             Eigen::VectorXd flat);

    [[nodiscard]] Eigen::Index d1() const { return d1_; }
    [[nodiscard]] Eigen::Index d2() const { return d2_; }
    [[nodiscard]] Eigen::Index d3() const { return d3_; }
    [[nodiscard]] Eigen::Index size() const { return data_.size(); }

    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
        return data_[i + d1_ * (j + d2_ * k)];
    }
    [[nodiscard]] double& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
        return data_[i + d1_ * (j + d2_ * k)];
    }

    [[nodiscard]] const Eigen::VectorXd& data() const { return data_; }
    [[nodiscard]] Eigen::VectorXd& data() { return data_; }

    [[nodiscard]] double frobenius_norm() const { return data_.norm(); }
    [[nodiscard]] bool same_dims(const Tensor3& o) const {
        return d1_ == o.d1_ && d2_ == o.d2_ && d3_ == o.d3_;
    }
    void set_zero() { data_.setZero(); }

    // Read-only view of the buffer as the mode-1 matricization (no copy).
    [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> mode1() const {
        return {data_.data(), d1_, d2_ * d3_};
    }

    Tensor3& operator+=(const Tensor3& o);
    Tensor3& operator-=(const Tensor3& o);
    Tensor3& operator*=(double c) {
        data_ *= c;
        return *this;
    }

    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(double c, Tensor3 a) { return a *= c; }

  private:
    Eigen::Index d1_ = 0, d2_ = 0, d3_ = 0;
    Eigen::VectorXd data_;
};

[[nodiscard]] double dot(const Tensor3& a, const Tensor3& b);

// Mode-s matricization. Row index is i_s; the column index groups the other
// two subscripts with the smaller-numbered one varying fastest:
//   mode 1: columns (i2, i3), mode 2: columns (i1, i3), mode 3: columns (i1, i2).
[[nodiscard]] Eigen::MatrixXd matricize(const Tensor3& t, int mode);

// Inverse of matricize for the given target dims.
[[nodiscard]] Tensor3 fold(const Eigen::MatrixXd& m, int mode, Eigen::Index d1, Eigen::Index d2,
                           Eigen::Index d3);

// t x_mode m: contracts mode `mode` of t with the columns of m, replacing
// that dimension by m.rows(). Satisfies matricize(result, mode) = m * matricize(t, mode).
[[nodiscard]] Tensor3 mode_product(const Tensor3& t, const Eigen::MatrixXd& m, int mode);

// Tucker triple (core; U, V, L). orthonormal marks factors known to have
// orthonormal columns (HOSVD output, rotated bases).
struct TuckerFactors {
    Tensor3 core;
    Eigen::MatrixXd U, V, L;
    bool orthonormal = false;
};

// core x1 U x2 V x3 L.
[[nodiscard]] Tensor3 tucker_reconstruct(const TuckerFactors& f);

// Shorthand used throughout the estimators.
[[nodiscard]] Tensor3 tucker_product(const Tensor3& core, const Eigen::MatrixXd& U,
                                     const Eigen::MatrixXd& V, const Eigen::MatrixXd& L);

// Higher-order SVD truncated to ranks (r1, r2, r3): factor j holds the top
// left singular vectors of matricize(t, j) (deterministic sign rule), and
// core = t x1 U' x2 V' x3 L'. Exact when t has multilinear ranks <= (r1,r2,r3).
[[nodiscard]] TuckerFactors hosvd(const Tensor3& t, Eigen::Index r1, Eigen::Index r2,
                                  Eigen::Index r3);

}  // namespace tlvar
