// fattnn: simulate data, fit factors, train and evaluate forecasters.
//
// Exit status: 0 success, 2 configuration error, 3 invalid input or file,
// 4 numerical failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fattnn/config.hpp"
#include "fattnn/error.hpp"
#include "fattnn/factor_model.hpp"
#include "fattnn/harness.hpp"
#include "fattnn/io.hpp"
#include "fattnn/simgen.hpp"
#include "fattnn/tcn.hpp"

using namespace fattnn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;

    ExperimentConfig resolve() const {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    }
};

std::string join(const Shape& s) { return s.empty() ? "none" : to_string(s); }

void emit_report(ExperimentReport report, const ExperimentConfig& cfg, const std::string& path,
                 const std::string& csv) {
    report.config_echo = echo_config(cfg);
    if (path.empty()) {
        write_report(std::cout, report);
    } else {
        std::ofstream out(path);
        if (!out) throw IoError(IoErrc::open_failed, "cannot create " + path);
        write_report(out, report);
        std::cout << report.method << ": test_mse=" << report.test_mse << " ci=[" << report.ci.lo
                  << ", " << report.ci.hi << "] -> " << path << "\n";
    }
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw IoError(IoErrc::open_failed, "cannot create " + csv);
        write_predictions_csv(out, report);
    }
}

SeriesPair load_or_simulate(const std::string& data_path, const ExperimentConfig& cfg) {
    if (!data_path.empty()) return read_series(data_path);
    const SimDataset ds = generate(cfg.sim);
    return {ds.covariates, ds.responses};
}

SeriesPair require_responses(SeriesPair data) {
    if (data.responses.length() != data.covariates.length())
        throw DataError("series file carries no responses");
    return data;
}

/// Per-step network features: factors when loadings are given, else raw covariates.
Matrix features_of(const TensorSeries& covariates, const std::optional<LoadingSet>& loadings) {
    return loadings ? extract_factors(covariates, *loadings).as_rows() : covariates.as_rows();
}

int cmd_simulate(const Common& common, const std::string& out, const std::string& loadings_out,
                 const std::string& factors_out) {
    const ExperimentConfig cfg = common.resolve();
    const SimDataset ds = generate(cfg.sim);
    write_series(out, {ds.covariates, ds.responses});
    if (!loadings_out.empty()) save_loadings(loadings_out, ds.true_loadings);
    if (!factors_out.empty()) write_series(factors_out, {ds.true_factors, TensorSeries()});
    std::cout << "wrote " << ds.covariates.length() << " points, covariates " << to_string(cfg.sim.dims)
              << ", responses " << to_string(cfg.sim.response_dims) << ", lambda " << ds.lambda
              << " -> " << out << "\n";
    return 0;
}

int cmd_fit_factors(const Common& common, const std::string& data_path, const std::string& out,
                    const std::string& factors_out) {
    const ExperimentConfig cfg = common.resolve();
    const SeriesPair data = read_series(data_path);
    const std::size_t n_train = train_length(data.length(), cfg.run.split_ratio);
    const TensorSeries train_cov = data.covariates.range(0, n_train);
    const Shape ranks = resolve_ranks(train_cov, cfg.run);
    const FactorFit fit = itipup_fit(train_cov, ranks, cfg.run.fit);
    save_loadings(out, fit.loadings);
    if (!factors_out.empty())
        write_series(factors_out, {extract_factors(data.covariates, fit.loadings), data.responses});
    std::cout << "ranks " << join(ranks) << ", " << fit.iterations_used << " refinement passes, "
              << "final subspace change " << fit.final_subspace_change << ", fitted on " << n_train
              << " of " << data.length() << " points -> " << out << "\n";
    return 0;
}

int cmd_train(const Common& common, const std::string& data_path, const std::string& method,
              const std::string& loadings_path, const std::string& out) {
    const ExperimentConfig cfg = common.resolve();
    const SeriesPair data = require_responses(read_series(data_path));
    const std::size_t n_train = train_length(data.length(), cfg.run.split_ratio);
    const TensorSeries train_cov = data.covariates.range(0, n_train);
    std::optional<LoadingSet> loadings;
    if (method == "fattnn") {
        loadings = loadings_path.empty()
                       ? itipup_fit(train_cov, resolve_ranks(train_cov, cfg.run), cfg.run.fit).loadings
                       : load_loadings(loadings_path);
    } else if (!loadings_path.empty()) {
        throw ConfigError("--loadings only applies to --method fattnn");
    }
    const Matrix features = features_of(train_cov, loadings);
    const Matrix responses = data.responses.range(0, n_train).as_rows();
    TrainResult r = train(make_forecaster(cfg.run, features.cols(), data.responses.shape()), features,
                          responses);
    save_checkpoint(out, r.model);
    std::cout << method << ": input width " << r.model.config.input_width << ", "
              << r.epochs_run << " epochs, training loss " << r.initial_loss << " -> "
              << r.final_loss << " -> " << out << "\n";
    return 0;
}

int cmd_forecast(const Common& common, const std::string& data_path, const std::string& model_path,
                 const std::string& loadings_path, std::optional<std::size_t> horizon,
                 const std::string& report_path, const std::string& csv) {
    const ExperimentConfig cfg = common.resolve();
    const SeriesPair data = read_series(data_path);
    const TcnModel model = load_checkpoint(model_path);
    std::optional<LoadingSet> loadings;
    if (!loadings_path.empty()) loadings = load_loadings(loadings_path);
    const std::size_t n = data.length();
    const std::size_t m = horizon ? *horizon : n - train_length(n, cfg.run.split_ratio);
    if (m == 0 || m >= n) throw DataError("forecast horizon must lie in [1, n)");
    const Matrix features = features_of(data.covariates, loadings);
    const bool have_responses = data.responses.length() == n;
    const Matrix known = have_responses ? data.responses.range(0, n - m).as_rows() : Matrix();
    if (model.config.use_lagged_response && !have_responses)
        throw DataError("model uses lagged responses but the series file has none");

    ExperimentReport report;
    report.method = loadings ? "fattnn" : "raw-tcn";
    report.seed = cfg.run.seed;
    report.input_width = model.config.input_width;
    report.n_train = n - m;
    report.n_test = m;
    if (loadings)
        for (const auto& a : loadings->loadings) report.ranks.push_back(a.cols());
    report.predictions = forecast(model, features, known, m);
    if (have_responses) {
        report.observed = data.responses.range(n - m, n);
        report.test_mse = mse(report.observed, report.predictions);
        report.ci = bootstrap_ci(per_sample_errors(report.observed, report.predictions),
                                 cfg.run.bootstrap_replications, cfg.run.ci_level, cfg.run.seed);
    } else {
        report.observed = TensorSeries(report.predictions.shape());
        for (std::size_t t = 0; t < m; ++t)
            report.observed.push_back(Tensor(report.predictions.shape(),
                                             std::vector<double>(report.predictions.slice_size(), NAN)));
        report.test_mse = NAN;
    }
    emit_report(std::move(report), cfg, report_path, csv);
    return 0;
}

int cmd_evaluate(const Common& common, const std::string& data_path, const std::string& method,
                 const std::string& report_path, const std::string& csv) {
    const ExperimentConfig cfg = common.resolve();
    const SeriesPair data = require_responses(load_or_simulate(data_path, cfg));
    if (method == "fattnn" || method == "both") {
        emit_report(run_fattnn(data, cfg.run), cfg,
                    method == "both" && !report_path.empty() ? report_path + ".fattnn" : report_path,
                    method == "both" && !csv.empty() ? csv + ".fattnn" : csv);
    }
    if (method == "raw" || method == "both") {
        emit_report(run_raw_tcn_baseline(data, cfg.run), cfg,
                    method == "both" && !report_path.empty() ? report_path + ".raw" : report_path,
                    method == "both" && !csv.empty() ? csv + ".raw" : csv);
    }
    return 0;
}

int cmd_bench(const Common& common, const std::string& report_path) {
    const ExperimentConfig cfg = common.resolve();
    double mse_f = 0.0, mse_r = 0.0, sec_f = 0.0, sec_r = 0.0;
    std::printf("%6s %14s %14s %10s %10s\n", "seed", "fattnn_mse", "raw_mse", "fattnn_s", "raw_s");
    for (std::size_t i = 0; i < cfg.replications; ++i) {
        ExperimentConfig run = cfg;
        run.sim.seed = cfg.sim.seed + i;
        run.run.seed = run.run.tcn.seed = run.sim.seed;
        const SimDataset ds = generate(run.sim);
        const SeriesPair data{ds.covariates, ds.responses};
        const ExperimentReport f = run_fattnn(data, run.run);
        const ExperimentReport r = run_raw_tcn_baseline(data, run.run);
        std::printf("%6llu %14.4f %14.4f %10.3f %10.3f\n", static_cast<unsigned long long>(run.sim.seed),
                    f.test_mse, r.test_mse, f.seconds.total(), r.seconds.total());
        mse_f += f.test_mse;
        mse_r += r.test_mse;
        sec_f += f.seconds.total();
        sec_r += r.seconds.total();
    }
    const double k = static_cast<double>(cfg.replications);
    std::printf("%6s %14.4f %14.4f %10.3f %10.3f\n", "mean", mse_f / k, mse_r / k, sec_f / k, sec_r / k);
    std::printf("mse ratio %.4f, wall-clock ratio %.4f\n", mse_f / mse_r, sec_f / sec_r);
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        if (!out) throw IoError(IoErrc::open_failed, "cannot create " + report_path);
        out << "replications = " << cfg.replications << "\n"
            << "fattnn_mean_mse = " << mse_f / k << "\n"
            << "raw_mean_mse = " << mse_r / k << "\n"
            << "mse_ratio = " << mse_f / mse_r << "\n"
            << "fattnn_mean_seconds = " << sec_f / k << "\n"
            << "raw_mean_seconds = " << sec_r / k << "\n"
            << "seconds_ratio = " << sec_f / sec_r << "\n";
        for (const auto& [key, value] : echo_config(cfg)) out << "config." << key << " = " << value << "\n";
    }
    return 0;
}

int cmd_rate_diag(const Common& common) {
    const ExperimentConfig cfg = common.resolve();
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < cfg.rate_seeds; ++i) seeds.push_back(cfg.sim.seed + i);
    const auto cells = rate_diagnostic(cfg.sim, cfg.rate_lambda_scales, cfg.rate_n, seeds, cfg.run.fit);
    std::printf("%12s %8s %16s\n", "lambda_scale", "n", "median_sin_theta");
    for (const auto& c : cells) std::printf("%12g %8zu %16.6e\n", c.lambda_scale, c.n, c.median_error);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tensor time-series forecasting from factor-compressed covariates"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_option("-c,--config", common.config_path, "key = value configuration file");
    app.add_option("-s,--set", common.overrides, "override one configuration key (key=value)")
        ->take_all();

    std::string data, out, loadings, model, report, csv, method = "fattnn", factors_out, loadings_out;
    std::optional<std::size_t> horizon;

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic series file");
    simulate->add_option("-o,--out", out, "series file to write")->required();
    simulate->add_option("--loadings-out", loadings_out, "also write the true loadings");
    simulate->add_option("--factors-out", factors_out, "also write the true factor series");

    auto* fit = app.add_subcommand("fit-factors", "estimate loadings on the training range");
    fit->add_option("-d,--data", data, "series file")->required();
    fit->add_option("-o,--out", out, "loadings file to write")->required();
    fit->add_option("--factors-out", factors_out, "write factor series paired with responses");

    auto* trn = app.add_subcommand("train", "train a forecaster on the training range");
    trn->add_option("-d,--data", data, "series file")->required();
    trn->add_option("-m,--method", method, "fattnn or raw")->check(CLI::IsMember({"fattnn", "raw"}));
    trn->add_option("-l,--loadings", loadings, "frozen loadings (fattnn; fitted when absent)");
    trn->add_option("-o,--out", out, "checkpoint to write")->required();

    auto* fc = app.add_subcommand("forecast", "forecast the trailing points of a series");
    fc->add_option("-d,--data", data, "series file")->required();
    fc->add_option("--model", model, "checkpoint")->required();
    fc->add_option("-l,--loadings", loadings, "loadings the model was trained with");
    fc->add_option("--horizon", horizon, "points to forecast (default: the test range)");
    fc->add_option("-r,--report", report, "report file (default stdout)");
    fc->add_option("--csv", csv, "per-step predictions CSV");

    auto* ev = app.add_subcommand("evaluate", "end-to-end run with test MSE and bootstrap interval");
    ev->add_option("-d,--data", data, "series file (default: simulate from the configuration)");
    ev->add_option("-m,--method", method, "fattnn, raw or both")
        ->check(CLI::IsMember({"fattnn", "raw", "both"}));
    ev->add_option("-r,--report", report, "report file (default stdout)");
    ev->add_option("--csv", csv, "per-step predictions CSV");

    auto* bench = app.add_subcommand("bench", "FATTNN against the raw-covariate baseline over seeds");
    bench->add_option("-r,--report", report, "summary file");

    auto* rate = app.add_subcommand("rate-diag", "loading error against n and signal strength");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(common, out, loadings_out, factors_out);
        if (*fit) return cmd_fit_factors(common, data, out, factors_out);
        if (*trn) return cmd_train(common, data, method, loadings, out);
        if (*fc) return cmd_forecast(common, data, model, loadings, horizon, report, csv);
        if (*ev) return cmd_evaluate(common, data, method, report, csv);
        if (*bench) return cmd_bench(common, report);
        if (*rate) return cmd_rate_diag(common);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitConfig;
}
