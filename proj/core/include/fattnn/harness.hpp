#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fattnn/factor_model.hpp"
#include "fattnn/simgen.hpp"
#include "fattnn/tcn.hpp"
#include "fattnn/tensor.hpp"

namespace fattnn {

/// Covariate and response series over the same time points.
struct SeriesPair {
    TensorSeries covariates;
    TensorSeries responses;

    std::size_t length() const noexcept { return covariates.length(); }
    friend bool operator==(const SeriesPair&, const SeriesPair&) = default;
};

/// (n_test * prod p)^-1 sum_i ||Y_i^obs - Y_i^pred||_F^2
double mse(const TensorSeries& observed, const TensorSeries& predicted);

/// ||Y_i^obs - Y_i^pred||_F^2 / prod p for each i; their mean is mse().
std::vector<double> per_sample_errors(const TensorSeries& observed, const TensorSeries& predicted);

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t replications = 0;
};

/// Percentile bootstrap of the mean error: B resamples of the test indices
/// with replacement, interval from the empirical (1-level)/2 and
/// (1+level)/2 quantiles of the resampled means, widened if necessary so it
/// always contains the sample mean.
ConfidenceInterval bootstrap_ci(std::span<const double> errors, std::size_t replications = 100,
                                double level = 0.95, std::uint64_t seed = 0);

/// ceil(ratio * n) points go to training; throws DataError for an empty side.
std::size_t train_length(std::size_t n, double ratio);

/// Contiguous temporal split, never shuffled.
std::pair<SeriesPair, SeriesPair> split(const SeriesPair& data, double ratio);

struct PhaseTimings {
    double factorize = 0.0;
    double train = 0.0;
    double forecast = 0.0;

    double total() const noexcept { return factorize + train + forecast; }
};

struct ExperimentReport {
    std::string method;
    double test_mse = 0.0;
    ConfidenceInterval ci;
    PhaseTimings seconds;
    std::size_t input_width = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    Shape ranks;  // empty for the raw baseline
    std::uint64_t seed = 0;
    double initial_train_loss = 0.0;
    double final_train_loss = 0.0;
    std::size_t epochs_run = 0;
    std::vector<std::pair<std::string, std::string>> config_echo;
    TensorSeries predictions;
    TensorSeries observed;
};

struct RunOptions {
    double split_ratio = 0.7;
    /// Fixed ranks; when empty they are chosen by select_ranks with r_max.
    std::optional<Shape> ranks;
    Shape r_max;
    IterativeFitOptions fit;
    /// Architecture and optimiser; input/output widths are filled in per run.
    TcnConfig tcn;
    std::size_t bootstrap_replications = 100;
    double ci_level = 0.95;
    std::uint64_t seed = 1;
};

/// options.ranks when set, else select_ranks with options.r_max (default
/// max(1, d_k / 2) per mode).
Shape resolve_ranks(const TensorSeries& train_covariates, const RunOptions& options);

/// Untrained forecaster for `feature_width` inputs per step, seeded with
/// options.seed.
TcnModel make_forecaster(const RunOptions& options, std::size_t feature_width,
                         const Shape& response_shape);

/// Factor-augmented pipeline: iTIPUP on the training covariates, factor
/// extraction with frozen loadings, TCN on the factor series, forecast of
/// the test range, test MSE with bootstrap interval and phase timings.
ExperimentReport run_fattnn(const SeriesPair& data, const RunOptions& options);

/// Same pipeline with the flattened raw covariates as TCN inputs.
ExperimentReport run_raw_tcn_baseline(const SeriesPair& data, const RunOptions& options);

struct RateCell {
    double lambda_scale = 1.0;
    std::size_t n = 0;
    double median_error = 0.0;
    std::vector<double> errors;  // per seed, max_k sin-theta
};

/// Median over seeds of max_k sinTheta(A_hat_k, A_k) for iTIPUP on data from
/// `base` at every (lambda_scale, n) cell.
std::vector<RateCell> rate_diagnostic(const SimConfig& base, std::span<const double> lambda_scales,
                                      std::span<const std::size_t> n_values,
                                      std::span<const std::uint64_t> seeds,
                                      const IterativeFitOptions& fit = {});

double median(std::vector<double> values);

}  // namespace fattnn
