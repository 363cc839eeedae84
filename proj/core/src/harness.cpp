#include "fattnn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "fattnn/error.hpp"
#include "fattnn/rng.hpp"
#include "fattnn/spectral.hpp"

namespace fattnn {

namespace {

constexpr std::uint64_t kBootstrapStream = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    return static_cast<double>(ms.count()) / 1000.0;
}

void check_pair(const SeriesPair& data) {
    if (data.covariates.length() != data.responses.length()) {
        throw DataError("covariate and response series differ in length (" +
                        std::to_string(data.covariates.length()) + " vs " +
                        std::to_string(data.responses.length()) + ")");
    }
    if (data.covariates.empty()) throw DataError("empty dataset");
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Shared tail of both pipelines: train, forecast the test range, score.
void train_and_score(const SeriesPair& data, const RunOptions& options, std::size_t n_train,
                     const Matrix& train_features, const std::function<Matrix()>& all_features,
                     ExperimentReport& report) {
    const auto& responses = data.responses;
    const std::size_t n = data.length();
    const std::size_t n_test = n - n_train;

    const Matrix train_responses = responses.range(0, n_train).as_rows();
    auto start = Clock::now();
    TcnModel model = make_forecaster(options, train_features.cols(), responses.shape());
    report.input_width = model.config.input_width;
    TrainResult trained = train(std::move(model), train_features, train_responses);
    report.seconds.train = seconds_since(start);
    report.initial_train_loss = trained.initial_loss;
    report.final_train_loss = trained.final_loss;
    report.epochs_run = trained.epochs_run;

    start = Clock::now();
    const Matrix features = all_features();
    report.predictions = forecast(trained.model, features, train_responses, n_test);
    report.seconds.forecast += seconds_since(start);

    report.observed = responses.range(n_train, n);
    report.n_train = n_train;
    report.n_test = n_test;
    report.test_mse = mse(report.observed, report.predictions);
    const auto errors = per_sample_errors(report.observed, report.predictions);
    report.ci = bootstrap_ci(errors, options.bootstrap_replications, options.ci_level, options.seed);
    report.seed = options.seed;
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw DataError("median of an empty set");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<double> per_sample_errors(const TensorSeries& observed, const TensorSeries& predicted) {
    if (observed.length() != predicted.length()) {
        throw ShapeError("mse: series lengths differ (" + std::to_string(observed.length()) +
                         " vs " + std::to_string(predicted.length()) + ")");
    }
    if (observed.shape() != predicted.shape()) {
        throw ShapeError("mse: response shapes differ " + to_string(observed.shape()) + " vs " +
                         to_string(predicted.shape()));
    }
    const double width = static_cast<double>(observed.slice_size());
    std::vector<double> errors(observed.length());
    for (std::size_t i = 0; i < observed.length(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < observed[i].size(); ++j) {
            const double e = observed[i][j] - predicted[i][j];
            s += e * e;
        }
        errors[i] = s / width;
    }
    return errors;
}

double mse(const TensorSeries& observed, const TensorSeries& predicted) {
    const auto errors = per_sample_errors(observed, predicted);
    if (errors.empty()) throw DataError("mse over an empty test set");
    double s = 0.0;
    for (double e : errors) s += e;
    return s / static_cast<double>(errors.size());
}

ConfidenceInterval bootstrap_ci(std::span<const double> errors, std::size_t replications,
                                double level, std::uint64_t seed) {
    if (errors.empty()) throw DataError("bootstrap over an empty error vector");
    if (replications == 0) throw ConfigError("bootstrap needs at least one replication");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");

    const std::size_t n = errors.size();
    double point = 0.0;
    for (double e : errors) point += e;
    point /= static_cast<double>(n);

    const CounterRng rng(seed);
    std::vector<double> means(replications);
    for (std::size_t b = 0; b < replications; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += errors[rng.bits(kBootstrapStream, b, i) % n];
        means[b] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    ConfidenceInterval ci;
    ci.replications = replications;
    ci.lo = std::min(quantile_sorted(means, 0.5 * (1.0 - level)), point);
    ci.hi = std::max(quantile_sorted(means, 0.5 * (1.0 + level)), point);
    return ci;
}

std::size_t train_length(std::size_t n, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
    // The epsilon keeps 0.7 * 100 from rounding up to 71.
    const auto n_train =
        static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
    if (n_train == 0 || n_train >= n) {
        throw DataError("split of " + std::to_string(n) + " points at ratio " +
                        std::to_string(ratio) + " leaves an empty side");
    }
    return n_train;
}

std::pair<SeriesPair, SeriesPair> split(const SeriesPair& data, double ratio) {
    check_pair(data);
    const std::size_t n = data.length();
    const std::size_t n_train = train_length(n, ratio);
    return {SeriesPair{data.covariates.range(0, n_train), data.responses.range(0, n_train)},
            SeriesPair{data.covariates.range(n_train, n), data.responses.range(n_train, n)}};
}

Shape resolve_ranks(const TensorSeries& train_covariates, const RunOptions& options) {
    if (options.ranks) return *options.ranks;
    Shape r_max = options.r_max;
    if (r_max.empty()) {
        for (auto d : train_covariates.shape()) r_max.push_back(std::max<std::size_t>(1, d / 2));
    }
    return select_ranks(train_covariates, r_max);
}

TcnModel make_forecaster(const RunOptions& options, std::size_t feature_width,
                         const Shape& response_shape) {
    TcnConfig cfg = options.tcn;
    cfg.output_width = num_elements(response_shape);
    cfg.input_width = feature_width + (cfg.use_lagged_response ? cfg.output_width : 0);
    TcnModel model = init_model(cfg, options.seed);
    model.response_shape = response_shape;
    return model;
}

ExperimentReport run_fattnn(const SeriesPair& data, const RunOptions& options) {
    check_pair(data);
    ExperimentReport report;
    report.method = "fattnn";
    const std::size_t n = data.length();
    const std::size_t n_train = train_length(n, options.split_ratio);

    auto start = Clock::now();
    const TensorSeries train_cov = data.covariates.range(0, n_train);
    const Shape ranks = resolve_ranks(train_cov, options);
    const FactorFit fit = itipup_fit(train_cov, ranks, options.fit);
    const Matrix train_features = fit.factors.as_rows();
    report.seconds.factorize = seconds_since(start);
    report.ranks = ranks;

    const auto& loadings = fit.loadings;
    train_and_score(data, options, n_train, train_features,
                    [&] { return extract_factors(data.covariates, loadings).as_rows(); }, report);
    return report;
}

ExperimentReport run_raw_tcn_baseline(const SeriesPair& data, const RunOptions& options) {
    check_pair(data);
    ExperimentReport report;
    report.method = "raw-tcn";
    const std::size_t n = data.length();
    const std::size_t n_train = train_length(n, options.split_ratio);
    const Matrix train_features = data.covariates.range(0, n_train).as_rows();
    train_and_score(data, options, n_train, train_features,
                    [&] { return data.covariates.as_rows(); }, report);
    return report;
}

std::vector<RateCell> rate_diagnostic(const SimConfig& base, std::span<const double> lambda_scales,
                                      std::span<const std::size_t> n_values,
                                      std::span<const std::uint64_t> seeds,
                                      const IterativeFitOptions& fit) {
    if (lambda_scales.empty() || n_values.empty() || seeds.empty()) {
        throw ConfigError("rate diagnostic grids must be non-empty");
    }
    std::vector<RateCell> cells;
    for (double scale : lambda_scales) {
        for (std::size_t n : n_values) {
            RateCell cell;
            cell.lambda_scale = scale;
            cell.n = n;
            for (std::uint64_t seed : seeds) {
                SimConfig cfg = base;
                cfg.n = n;
                cfg.seed = seed;
                cfg.lambda_scale = base.lambda_scale * scale;
                const TensorSeries factors = gen_factor_series(cfg);
                const CovariateDraw draw = gen_covariates(factors, cfg);
                const FactorFit est = itipup_fit(draw.covariates, cfg.ranks, fit);
                double worst = 0.0;
                for (std::size_t k = 0; k < cfg.ranks.size(); ++k) {
                    worst = std::max(worst, sin_theta_distance(est.loadings.loadings[k],
                                                               draw.loadings.loadings[k]));
                }
                cell.errors.push_back(worst);
            }
            cell.median_error = median(cell.errors);
            cells.push_back(std::move(cell));
        }
    }
    return cells;
}

}  // namespace fattnn
