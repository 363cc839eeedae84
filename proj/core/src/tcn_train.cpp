#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "fattnn/error.hpp"
#include "fattnn/rng.hpp"
#include "fattnn/tcn.hpp"
#include "tcn_internal.hpp"

namespace fattnn {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr std::uint64_t kWindowStream = 13;

struct Adam {
    std::vector<double> m, v;
    std::size_t step = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void apply(std::vector<double>& w, const std::vector<double>& g, double lr) {
        ++step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
        }
    }
};

void column_stats(const Matrix& m, std::size_t rows, std::vector<double>& mean,
                  std::vector<double>& scale) {
    const std::size_t w = m.cols();
    mean.assign(w, 0.0);
    scale.assign(w, 1.0);
    if (rows == 0) return;
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t j = 0; j < w; ++j) mean[j] += m(t, j);
    for (auto& x : mean) x /= static_cast<double>(rows);
    for (std::size_t j = 0; j < w; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < rows; ++t) s += (m(t, j) - mean[j]) * (m(t, j) - mean[j]);
        const double sd = std::sqrt(s / static_cast<double>(rows));
        scale[j] = sd > 1e-12 ? sd : 1.0;
    }
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, m.cols());
    std::copy(m.data().begin() + static_cast<std::ptrdiff_t>(begin * m.cols()),
              m.data().begin() + static_cast<std::ptrdiff_t>(end * m.cols()), out.data().begin());
    return out;
}

void require_finite(const Matrix& m, const char* what) {
    for (std::size_t t = 0; t < m.rows(); ++t)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (!std::isfinite(m(t, j))) {
                throw NumericalError(std::string("non-finite ") + what + " at time " +
                                     std::to_string(t) + ", column " + std::to_string(j));
            }
}

[[noreturn]] void diverged(std::size_t epoch, double loss, double lr) {
    std::ostringstream os;
    os << "TCN training diverged at epoch " << epoch << " (loss " << loss
       << ", learning rate " << lr << "); check inputs for non-finite values or lower the "
       << "learning rate";
    throw NumericalError(os.str());
}

}  // namespace

TrainResult train(TcnModel model, const Matrix& features, const Matrix& responses,
                  std::size_t max_steps) {
    const TcnConfig& cfg = model.config;
    cfg.validate();
    const std::size_t steps_total = features.rows();
    if (steps_total == 0) throw DataError("cannot train on an empty series");
    if (responses.rows() != steps_total) {
        throw ShapeError("features and responses have different lengths (" +
                         std::to_string(steps_total) + " vs " + std::to_string(responses.rows()) +
                         ")");
    }
    if (responses.cols() != cfg.output_width) throw ShapeError("response width mismatch");
    if (features.cols() != cfg.feature_width()) throw ShapeError("feature width mismatch");
    require_finite(features, "training feature");
    require_finite(responses, "training response");

    std::size_t val = 0;
    if (cfg.patience > 0 && cfg.validation_fraction > 0.0) {
        val = static_cast<std::size_t>(
            std::ceil(cfg.validation_fraction * static_cast<double>(steps_total) - 1e-9));
        if (steps_total < val + 2) val = 0;
    }
    const std::size_t fit_end = steps_total - val;

    if (cfg.standardize) {
        std::vector<double> fmean, fscale;
        column_stats(features, fit_end, fmean, fscale);
        std::copy(fmean.begin(), fmean.end(), model.input_mean.begin());
        std::copy(fscale.begin(), fscale.end(), model.input_scale.begin());
        column_stats(responses, fit_end, model.output_mean, model.output_scale);
        // Lag columns share the response statistics.
        if (cfg.use_lagged_response) {
            for (std::size_t j = 0; j < cfg.output_width; ++j) {
                model.input_mean[cfg.feature_width() + j] = model.output_mean[j];
                model.input_scale[cfg.feature_width() + j] = model.output_scale[j];
            }
        }
    }

    const Matrix inputs = network_inputs(model, features, responses);
    Matrix targets(steps_total, cfg.output_width);
    for (std::size_t t = 0; t < steps_total; ++t)
        for (std::size_t j = 0; j < cfg.output_width; ++j)
            targets(t, j) = (responses(t, j) - model.output_mean[j]) / model.output_scale[j];

    const auto layout = parameter_layout(cfg);
    Adam adam(model.weights.size());
    std::vector<double> grad(model.weights.size());
    const bool full_batch = cfg.batch_length == 0 || cfg.batch_length >= fit_end;
    const std::size_t context = cfg.receptive_field() - 1;

    TrainResult result;
    std::vector<double> best_weights = model.weights;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs && result.optimizer_steps < max_steps; ++epoch) {
        const auto cache = detail::forward_cached(model, layout, inputs, nullptr);
        Matrix d_out;
        const double loss = detail::mse_rows(cache.outputs, targets, 0, fit_end,
                                             full_batch && cfg.dropout == 0.0 ? &d_out : nullptr);
        if (!std::isfinite(loss)) diverged(epoch, loss, cfg.learning_rate);
        result.loss_trace.push_back(loss);
        if (epoch == 0) result.initial_loss = loss;

        if (val > 0) {
            const double vloss = detail::mse_rows(cache.outputs, targets, fit_end, steps_total, nullptr);
            result.validation_trace.push_back(vloss);
            if (vloss < best_val) {
                best_val = vloss;
                best_weights = model.weights;
                result.best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                result.epochs_run = epoch + 1;
                break;
            }
        }

        if (full_batch) {
            std::fill(grad.begin(), grad.end(), 0.0);
            if (cfg.dropout == 0.0) {
                detail::backward(model, layout, cache, d_out, grad);
            } else {
                const detail::DropoutContext drop{cfg.dropout, cfg.seed, result.optimizer_steps};
                const Matrix in = slice_rows(inputs, 0, fit_end);
                const auto tc = detail::forward_cached(model, layout, in, &drop);
                Matrix d;
                detail::mse_rows(tc.outputs, slice_rows(targets, 0, fit_end), 0, fit_end, &d);
                detail::backward(model, layout, tc, d, grad);
            }
            adam.apply(model.weights, grad, cfg.learning_rate);
            ++result.optimizer_steps;
        } else {
            const std::size_t windows = (fit_end + cfg.batch_length - 1) / cfg.batch_length;
            std::vector<std::size_t> order(windows);
            std::iota(order.begin(), order.end(), std::size_t{0});
            const CounterRng rng(cfg.seed);
            for (std::size_t i = windows; i > 1; --i) {
                const std::size_t j = rng.bits(kWindowStream, epoch, i) % i;
                std::swap(order[i - 1], order[j]);
            }
            for (std::size_t w : order) {
                if (result.optimizer_steps >= max_steps) break;
                const std::size_t start = w * cfg.batch_length;
                const std::size_t stop = std::min(fit_end, start + cfg.batch_length);
                const std::size_t lead = start >= context ? start - context : 0;
                const Matrix in = slice_rows(inputs, lead, stop);
                const Matrix tg = slice_rows(targets, lead, stop);
                const detail::DropoutContext drop{cfg.dropout, cfg.seed, result.optimizer_steps};
                const auto tc = detail::forward_cached(model, layout, in, &drop);
                Matrix d;
                detail::mse_rows(tc.outputs, tg, start - lead, stop - lead, &d);
                std::fill(grad.begin(), grad.end(), 0.0);
                detail::backward(model, layout, tc, d, grad);
                adam.apply(model.weights, grad, cfg.learning_rate);
                ++result.optimizer_steps;
            }
        }
        result.epochs_run = epoch + 1;
    }

    if (val > 0 && std::isfinite(best_val)) {
        // Score the final iterate too before settling on the best weights.
        const auto cache = detail::forward_cached(model, layout, inputs, nullptr);
        const double vloss = detail::mse_rows(cache.outputs, targets, fit_end, steps_total, nullptr);
        if (vloss < best_val) best_weights = model.weights;
        model.weights = best_weights;
    }

    const auto final_cache = detail::forward_cached(model, layout, inputs, nullptr);
    result.final_loss = detail::mse_rows(final_cache.outputs, targets, 0, fit_end, nullptr);
    if (!std::isfinite(result.final_loss)) diverged(result.epochs_run, result.final_loss, cfg.learning_rate);
    if (result.loss_trace.empty()) result.initial_loss = result.final_loss;
    result.model = std::move(model);
    return result;
}

}  // namespace fattnn
