#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "fattnn/tensor.hpp"

namespace fattnn {

/// Orthonormal loading matrices A_k (d_k x r_k), one per covariate mode.
struct LoadingSet {
    std::vector<Matrix> loadings;

    std::size_t order() const noexcept { return loadings.size(); }
    Shape ranks() const;
    Shape dims() const;
};

struct FactorFit {
    LoadingSet loadings;
    TensorSeries factors;
    std::size_t iterations_used = 0;
    /// max_k ||A_k A_k^T - A_k' A_k'^T||_2 between the last two iterates.
    double final_subspace_change = 0.0;
};

struct IterativeFitOptions {
    double eps = 1e-6;
    std::size_t max_iter = 30;
    /// Subtract the time mean before forming second moments.
    bool center = false;
};

/// (1/n) sum_t mat_k(X_t) mat_k(X_t)^T for every mode k.
std::vector<Matrix> tipup_moments(const TensorSeries& series, bool center = false);

/// One-shot TIPUP: each A_k is the top-r_k left singular subspace of the
/// mode-k time-averaged second moment. Throws DataError for an all-zero
/// series and ShapeError for ranks that do not fit the dims.
LoadingSet tipup_fit(const TensorSeries& series, const Shape& ranks, bool center = false);

/// Iterative TIPUP. Starts from tipup_fit, then re-estimates each mode in
/// turn from the series projected on every other mode, always using the
/// freshest estimates. Stops after max_iter passes or once the largest
/// projector change is <= eps. Running out of iterations is not an error.
FactorFit itipup_fit(const TensorSeries& series, const Shape& ranks,
                     const IterativeFitOptions& options = {});

/// F_t = X_t x_1 A_1^T ... x_K A_K^T for every t.
TensorSeries extract_factors(const TensorSeries& series, const LoadingSet& loadings);

/// F_t x_1 A_1 ... x_K A_K for every t.
TensorSeries embed_factors(const TensorSeries& factors, const LoadingSet& loadings);

/// Higher-order SVD of a single tensor (truncated to `ranks`).
TuckerDecomp hosvd(const Tensor& t, const Shape& ranks);

/// Per-mode eigen-ratio rank estimate from the TIPUP second moments.
///
/// r_max[k] must be < d_k, or equal to d_k to allow a full-rank mode. A
/// full-rank candidate is scored against a noise floor: the estimated
/// per-entry noise variance times d_{-k}, where the variance comes from the
/// trailing eigenvalues of the modes that do have a strict upper bound.
Shape select_ranks(const TensorSeries& series, const Shape& r_max);

}  // namespace fattnn
