#pragma once

// Brute-force reference implementations used only by the tests. They share
// no code with the library beyond the value types.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

#include "fattnn/rng.hpp"
#include "fattnn/tensor.hpp"

namespace oracle {

using fattnn::Matrix;
using fattnn::Shape;
using fattnn::Tensor;

inline std::vector<std::size_t> unflatten(std::size_t flat, const Shape& shape) {
    std::vector<std::size_t> idx(shape.size());
    for (std::size_t k = shape.size(); k-- > 0;) {
        idx[k] = flat % shape[k];
        flat /= shape[k];
    }
    return idx;
}

inline std::size_t flatten(const std::vector<std::size_t>& idx, const Shape& shape) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape.size(); ++k) flat = flat * shape[k] + idx[k];
    return flat;
}

inline std::size_t product(const Shape& s) {
    std::size_t p = 1;
    for (auto d : s) p *= d;
    return p;
}

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, std::uint64_t sub = 0) {
    fattnn::CounterRng rng(seed);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(1000, sub, i);
    return t;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            std::uint64_t sub = 0) {
    fattnn::CounterRng rng(seed);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(1001, sub, i);
    return m;
}

/// Random shape with order in [1, max_order] and prod <= max_elems.
inline Shape random_shape(fattnn::CounterRng& rng, std::uint64_t draw, std::size_t max_order,
                          std::size_t max_elems) {
    const std::size_t order = 1 + rng.bits(1002, draw, 0) % max_order;
    Shape s;
    std::size_t total = 1;
    for (std::size_t k = 0; k < order; ++k) {
        const std::size_t cap = std::max<std::size_t>(1, std::min<std::size_t>(4, max_elems / total));
        const std::size_t d = 1 + rng.bits(1002, draw, k + 1) % cap;
        s.push_back(d);
        total *= d;
    }
    return s;
}

/// Unfolding by the cyclic index rule: after mode k come k+1, ..., K-1,
/// 0, ..., k-1, the first of them fastest.
inline Matrix matricize(const Tensor& t, std::size_t k) {
    const Shape& s = t.shape();
    const std::size_t K = s.size();
    Matrix m(s[k], product(s) / s[k]);
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        const auto idx = unflatten(flat, s);
        std::size_t col = 0;
        std::size_t stride = 1;
        for (std::size_t step = 1; step < K; ++step) {
            const std::size_t mode = (k + step) % K;
            col += idx[mode] * stride;
            stride *= s[mode];
        }
        m(idx[k], col) = t[flat];
    }
    return m;
}

/// (t x_k m)_{..i'..} = sum_j m(i', j) t_{..j..}
inline Tensor mode_multiply(const Tensor& t, const Matrix& m, std::size_t k) {
    Shape out_shape = t.shape();
    out_shape[k] = m.rows();
    Tensor out(out_shape);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        auto idx = unflatten(flat, out_shape);
        const std::size_t row = idx[k];
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            idx[k] = j;
            acc += m(row, j) * t[flatten(idx, t.shape())];
        }
        out[flat] = acc;
    }
    return out;
}

/// Sum over the trailing `c` modes of a against the leading `c` modes of b.
inline Tensor contracted_product(const Tensor& a, const Tensor& b, std::size_t c) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const Shape free_a(sa.begin(), sa.end() - static_cast<std::ptrdiff_t>(c));
    const Shape shared(sa.end() - static_cast<std::ptrdiff_t>(c), sa.end());
    const Shape free_b(sb.begin() + static_cast<std::ptrdiff_t>(c), sb.end());
    Shape out_shape = free_a;
    out_shape.insert(out_shape.end(), free_b.begin(), free_b.end());
    Tensor out(out_shape);
    for (std::size_t ia = 0; ia < product(free_a); ++ia) {
        for (std::size_t ib = 0; ib < product(free_b); ++ib) {
            double acc = 0.0;
            for (std::size_t l = 0; l < product(shared); ++l) {
                acc += a[ia * product(shared) + l] * b[l * product(free_b) + ib];
            }
            out[ia * product(free_b) + ib] = acc;
        }
    }
    return out;
}

/// sum_r prod_n m_n(i_n, r)
inline Tensor cp(const std::vector<Matrix>& ms) {
    Shape s;
    for (const auto& m : ms) s.push_back(m.rows());
    Tensor out(s);
    const std::size_t R = ms.front().cols();
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        const auto idx = unflatten(flat, s);
        double acc = 0.0;
        for (std::size_t r = 0; r < R; ++r) {
            double p = 1.0;
            for (std::size_t n = 0; n < ms.size(); ++n) p *= ms[n](idx[n], r);
            acc += p;
        }
        out[flat] = acc;
    }
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = a.shape() == b.shape() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
    return m;
}

/// Top-r left singular vectors by Eigen's two-sided Jacobi SVD.
inline Matrix reference_lsvd(const Matrix& m, std::size_t r) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m), Eigen::ComputeThinU);
    return from_eigen(svd.matrixU().leftCols(static_cast<Eigen::Index>(r)));
}

inline Eigen::VectorXd reference_singular_values(const Matrix& m) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(m)).singularValues();
}

/// ||u u^T - v v^T||_2 by Eigen's self-adjoint solver.
inline double projector_gap(const Matrix& u, const Matrix& v) {
    const Eigen::MatrixXd a = to_eigen(u), b = to_eigen(v);
    const Eigen::MatrixXd d = a * a.transpose() - b * b.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Classical Gram-Schmidt, run twice for stability.
inline Matrix gram_schmidt(const Matrix& m) {
    Matrix q = m;
    for (std::size_t j = 0; j < q.cols(); ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < j; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < q.rows(); ++i) dot += q(i, p) * q(i, j);
                for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) -= dot * q(i, p);
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < q.rows(); ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < q.rows(); ++i) q(i, j) /= norm;
    }
    return q;
}

}  // namespace oracle
