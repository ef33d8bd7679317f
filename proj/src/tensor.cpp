// SPDX-License-Identifier: MIT
#include "tlvar/tensor.hpp"

#include <stdexcept>
#include <utility>

#include "tlvar/errors.hpp"
#include "tlvar/linalg.hpp"

namespace tlvar {

Tensor3 Tensor3::from_flat(Eigen::Index d1, Eigen::Index d2, Eigen::Index d3,
                           Eigen::VectorXd flat) {
    if (d1 <= 0 || d2 <= 0 || d3 <= 0)
        throw std::invalid_argument("Tensor3: dimensions must be positive");
    if (flat.size() != d1 * d2 * d3)
        throw std::invalid_argument("Tensor3: buffer length does not match dims");
    Tensor3 t;
    t.d1_ = d1;
    t.d2_ = d2;
    t.d3_ = d3;
    t.data_ = std::move(flat);
    return t;
}

Tensor3& Tensor3::operator+=(const Tensor3& o) {
    if (!same_dims(o)) throw std::invalid_argument("Tensor3: dimension mismatch in +=");
    data_ += o.data_;
    return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& o) {
    if (!same_dims(o)) throw std::invalid_argument("Tensor3: dimension mismatch in -=");
    data_ -= o.data_;
    return *this;
}

double dot(const Tensor3& a, const Tensor3& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("dot: dimension mismatch");
    return a.data().dot(b.data());
}

Eigen::MatrixXd matricize(const Tensor3& t, int mode) {
    const Eigen::Index d1 = t.d1(), d2 = t.d2(), d3 = t.d3();
    switch (mode) {
        case 1:
            // Layout is mode-1 fastest: plain reshape.
            return t.mode1();
        case 2: {
            Eigen::MatrixXd m(d2, d1 * d3);
            for (Eigen::Index k = 0; k < d3; ++k)
                for (Eigen::Index j = 0; j < d2; ++j)
                    for (Eigen::Index i = 0; i < d1; ++i) m(j, i + d1 * k) = t(i, j, k);
            return m;
        }
        case 3: {
            Eigen::MatrixXd m(d3, d1 * d2);
            for (Eigen::Index k = 0; k < d3; ++k)
                for (Eigen::Index j = 0; j < d2; ++j)
                    for (Eigen::Index i = 0; i < d1; ++i) m(k, i + d1 * j) = t(i, j, k);
            return m;
        }
        default:
            throw std::invalid_argument("matricize: mode must be 1, 2 or 3");
    }
}

Tensor3 fold(const Eigen::MatrixXd& m, int mode, Eigen::Index d1, Eigen::Index d2,
             Eigen::Index d3) {
    if (mode < 1 || mode > 3) throw std::invalid_argument("fold: mode must be 1, 2 or 3");
    const Eigen::Index rows[4] = {0, d1, d2, d3};
    const Eigen::Index cols[4] = {0, d2 * d3, d1 * d3, d1 * d2};
    if (m.rows() != rows[mode] || m.cols() != cols[mode])
        throw std::invalid_argument("fold: matrix shape inconsistent with target dims");
    Tensor3 t(d1, d2, d3);
    switch (mode) {
        case 1:
            t.data() = Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
            break;
        case 2:
            for (Eigen::Index k = 0; k < d3; ++k)
                for (Eigen::Index j = 0; j < d2; ++j)
                    for (Eigen::Index i = 0; i < d1; ++i) t(i, j, k) = m(j, i + d1 * k);
            break;
        case 3:
            for (Eigen::Index k = 0; k < d3; ++k)
                for (Eigen::Index j = 0; j < d2; ++j)
                    for (Eigen::Index i = 0; i < d1; ++i) t(i, j, k) = m(k, i + d1 * j);
            break;
    }
    return t;
}

Tensor3 mode_product(const Tensor3& t, const Eigen::MatrixXd& m, int mode) {
    if (mode < 1 || mode > 3) throw std::invalid_argument("mode_product: mode must be 1, 2 or 3");
    const Eigen::Index dims[4] = {0, t.d1(), t.d2(), t.d3()};
    if (m.cols() != dims[mode])
        throw std::invalid_argument("mode_product: matrix columns must match the contracted dim");
    Eigen::Index nd[4] = {0, t.d1(), t.d2(), t.d3()};
    nd[mode] = m.rows();
    return fold(m * matricize(t, mode), mode, nd[1], nd[2], nd[3]);
}

Tensor3 tucker_product(const Tensor3& core, const Eigen::MatrixXd& U, const Eigen::MatrixXd& V,
                       const Eigen::MatrixXd& L) {
    return mode_product(mode_product(mode_product(core, U, 1), V, 2), L, 3);
}

Tensor3 tucker_reconstruct(const TuckerFactors& f) {
    return tucker_product(f.core, f.U, f.V, f.L);
}

TuckerFactors hosvd(const Tensor3& t, Eigen::Index r1, Eigen::Index r2, Eigen::Index r3) {
    if (r1 < 1 || r1 > t.d1() || r2 < 1 || r2 > t.d2() || r3 < 1 || r3 > t.d3())
        throw std::invalid_argument("hosvd: rank out of range");
    TuckerFactors f;
    f.U = truncated_svd(matricize(t, 1), r1).U;
    f.V = truncated_svd(matricize(t, 2), r2).U;
    f.L = truncated_svd(matricize(t, 3), r3).U;
    f.core = tucker_product(t, f.U.transpose(), f.V.transpose(), f.L.transpose());
    f.orthonormal = true;
    return f;
}

}  // namespace tlvar
