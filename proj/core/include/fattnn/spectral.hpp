#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fattnn/tensor.hpp"

namespace fattnn {

/// Thin SVD m = u diag(s) v^T with r = min(rows, cols).
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;  // nonincreasing
    Matrix v;
};

/// Eigenpairs of a symmetric matrix, eigenvalues in nonincreasing order.
struct SymmetricEigen {
    std::vector<double> values;
    Matrix vectors;  // column j pairs with values[j]
};

/// One-sided (Hestenes) Jacobi SVD.
///
/// Rotations act on the rows of `m`, so the accumulated rotation is an
/// exactly orthogonal rows x rows matrix and the left singular vectors stay
/// orthonormal even for rank-deficient input. Throws NumericalError if the
/// sweep budget of 10 * max(rows, cols) is exhausted.
SvdResult jacobi_svd(const Matrix& m);

std::vector<double> singular_values(const Matrix& m);

/// Cyclic two-sided Jacobi on a symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& m);

/// Top-r left singular vectors (LSVD_r). Deterministic; throws ShapeError
/// for r outside [1, min(rows, cols)].
Matrix top_left_singular_vectors(const Matrix& m, std::size_t r);

/// Thin Householder QR, returning Q with a positive R diagonal. Throws
/// NumericalError when |R_jj| < 1e-12 * ||m_j||.
Matrix qr_orthonormalize(const Matrix& m);

/// Sine of the largest principal angle between span(u) and span(v), i.e.
/// ||u u^T - v v^T||_2 = sqrt(1 - sigma_min(u^T v)^2).
///
/// Evaluated as ||(I - u u^T) v||_2 so small angles keep full relative
/// precision. Both inputs must have orthonormal columns (checked to 1e-8).
double sin_theta_distance(const Matrix& u, const Matrix& v);

/// ||u u^T - v v^T||_2 for possibly different column counts, via the
/// largest-magnitude eigenvalue of the projector difference.
double projector_distance(const Matrix& u, const Matrix& v);

/// max |u^T u - I|.
double orthonormality_defect(const Matrix& u);

/// argmax_{1 <= i <= r_max} s_i / s_{i+1}, ties to the smallest i. The
/// denominator is floored at 1e-300. Returns a 1-based rank.
std::size_t eigen_ratio_rank(std::span<const double> singular_values, std::size_t r_max);

}  // namespace fattnn
