#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fattnn/harness.hpp"
#include "fattnn/simgen.hpp"

namespace fattnn {

/// Everything one experiment run needs. Text form is `key = value` per line,
/// `#` starts a comment, lists are comma separated. `preset` is applied
/// before every other key regardless of position. Keys:
///
///   preset                  1 | 2 | 3 (simulation configuration)
///   dims, ranks, response_dims, n, transform, sigma_u2, cp_rank, burn_in,
///   seed, rho, lambda (number | auto), lambda_scale, factor_noise_sd,
///   covariate_noise_sd      data generation
///   split, fit_ranks (list | auto), r_max, eps (number | inf), max_iter,
///   center                  factor stage and split
///   tcn.channels, tcn.kernel_size, tcn.dilations, tcn.activation
///   (relu | linear), tcn.dropout, tcn.lr, tcn.epochs, tcn.batch_length,
///   tcn.patience, tcn.validation_fraction, tcn.lagged_response,
///   tcn.standardize         forecaster
///   bootstrap_b, ci_level, replications
///   rate.lambda_scales, rate.n, rate.seeds   rate diagnostic grid
struct ExperimentConfig {
    SimConfig sim;
    RunOptions run;
    /// Seeds seed, seed + 1, ..., seed + replications - 1.
    std::size_t replications = 5;
    std::vector<double> rate_lambda_scales{1.0, 4.0};
    std::vector<std::size_t> rate_n{100, 200, 400};
    std::size_t rate_seeds = 20;

    /// Range checks only; rank lists are checked against the data at run time.
    void validate() const;
};

/// Applies every key, then validate().
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sets one key; throws ConfigError for unknown keys or malformed values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Every key with its resolved value, in schema order. Feeding the joined
/// lines back to parse_config reproduces the configuration.
std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& config);
std::string config_text(const ExperimentConfig& config);

}  // namespace fattnn
