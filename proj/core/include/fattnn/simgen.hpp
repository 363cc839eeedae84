#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fattnn/factor_model.hpp"
#include "fattnn/tensor.hpp"

namespace fattnn {

/// Entrywise map applied to factor tensors before the response contraction.
enum class Transform { cos, log_abs, softplus, identity };

Transform parse_transform(const std::string& name);
std::string to_string(Transform t);

/// log(|z|) is evaluated as log(max(|z|, kLogAbsFloor)).
inline constexpr double kLogAbsFloor = 1e-300;

double apply_transform(Transform t, double z) noexcept;

struct SimConfig {
    Shape dims{12, 3, 12};
    Shape ranks{4, 3, 4};
    Shape response_dims{3, 3, 3};
    std::size_t n = 100;
    Transform transform = Transform::softplus;
    double sigma_u2 = 0.5;
    std::size_t cp_rank = 6;
    std::size_t burn_in = 500;
    std::uint64_t seed = 1;
    /// Scales Phi; 1 reproduces the undamped recipe.
    double rho = 1.0;
    /// Overrides lambda = sqrt(prod r_k) when set.
    std::optional<double> lambda;
    /// Multiplies the (default or overridden) lambda.
    double lambda_scale = 1.0;
    /// Standard deviations of the factor innovations W_t and covariate noise E_t.
    double factor_noise_sd = 1.0;
    double covariate_noise_sd = 1.0;

    double resolved_lambda() const;
    void validate() const;
};

/// Preset simulation configurations 1, 2 and 3 with the given seed.
SimConfig simulation_config(int which, std::uint64_t seed = 1);

struct SimDataset {
    TensorSeries covariates;
    TensorSeries responses;
    LoadingSet true_loadings;
    TensorSeries true_factors;
    Tensor coefficient;  // Lambda, shape (r..., p...)
    double lambda = 0.0;
};

/// Kronecker product of K QR-orthonormalised Gaussian r_k x r_k blocks,
/// scaled by rho. Q_1 is the outermost block.
Matrix make_phi(const Shape& ranks, std::uint64_t seed, double rho = 1.0);

/// vec(F_t) = Phi vec(F_{t-1}) + vec(W_t) from a standard normal start;
/// the first burn_in states are dropped. vec is the column-major
/// vectorisation. Draws are keyed by absolute time, so a longer n extends
/// the same path.
TensorSeries gen_factor_series(const SimConfig& config);

struct CovariateDraw {
    TensorSeries covariates;
    LoadingSet loadings;
};

/// X_t = lambda F_t x_1 A_1 ... x_K A_K + E_t with QR-orthonormalised
/// Gaussian loadings.
CovariateDraw gen_covariates(const TensorSeries& factors, const SimConfig& config);

/// Lambda = [[U_1..U_K, V_1..V_q]] with N(0,1) factor matrices and R columns.
Tensor make_coefficient(const SimConfig& config);

/// Y_t = <s(F_t), Lambda>_L + U_t with U_t entries N(0, sigma_u2).
TensorSeries gen_responses(const TensorSeries& factors, const Tensor& coefficient,
                           const SimConfig& config);

SimDataset generate(const SimConfig& config);

}  // namespace fattnn
