#include "fattnn/tcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fattnn/error.hpp"
#include "fattnn/rng.hpp"
#include "tcn_internal.hpp"

namespace fattnn {

namespace {

constexpr std::uint64_t kInitStream = 10;
constexpr std::uint64_t kDropoutStream = 11;
constexpr std::uint64_t kGradCheckStream = 12;

double activate(Activation a, double x) noexcept {
    // Written so that NaN propagates.
    return a == Activation::relu ? (x < 0.0 ? 0.0 : x) : x;
}

double activation_slope(Activation a, double x) noexcept {
    return a == Activation::relu ? (x > 0.0 ? 1.0 : 0.0) : 1.0;
}

// out[t][o] = bias[o] + sum_j sum_i W[j][o][i] in[t - (K-1-j) d][i]
Matrix causal_conv(const Matrix& in, const double* weight, const double* bias,
                   std::size_t out_channels, std::size_t kernel, std::size_t dilation) {
    const std::size_t steps = in.rows();
    const std::size_t in_channels = in.cols();
    Matrix out(steps, out_channels);
    for (std::size_t t = 0; t < steps; ++t) {
        auto orow = out.row(t);
        std::copy(bias, bias + out_channels, orow.begin());
        for (std::size_t j = 0; j < kernel; ++j) {
            const std::size_t back = (kernel - 1 - j) * dilation;
            if (back > t) continue;
            auto irow = in.row(t - back);
            const double* wj = weight + j * out_channels * in_channels;
            for (std::size_t o = 0; o < out_channels; ++o) {
                const double* w = wj + o * in_channels;
                double acc = 0.0;
                for (std::size_t i = 0; i < in_channels; ++i) acc += w[i] * irow[i];
                orow[o] += acc;
            }
        }
    }
    return out;
}

void causal_conv_backward(const Matrix& in, const Matrix& dout, const double* weight,
                          double* dweight, double* dbias, Matrix* din, std::size_t kernel,
                          std::size_t dilation) {
    const std::size_t steps = in.rows();
    const std::size_t in_channels = in.cols();
    const std::size_t out_channels = dout.cols();
    for (std::size_t t = 0; t < steps; ++t) {
        auto grow = dout.row(t);
        for (std::size_t o = 0; o < out_channels; ++o) dbias[o] += grow[o];
        for (std::size_t j = 0; j < kernel; ++j) {
            const std::size_t back = (kernel - 1 - j) * dilation;
            if (back > t) continue;
            auto irow = in.row(t - back);
            const double* wj = weight + j * out_channels * in_channels;
            double* dwj = dweight + j * out_channels * in_channels;
            for (std::size_t o = 0; o < out_channels; ++o) {
                const double g = grow[o];
                if (g == 0.0) continue;
                double* dw = dwj + o * in_channels;
                for (std::size_t i = 0; i < in_channels; ++i) dw[i] += g * irow[i];
                if (din) {
                    auto drow = din->row(t - back);
                    const double* w = wj + o * in_channels;
                    for (std::size_t i = 0; i < in_channels; ++i) drow[i] += g * w[i];
                }
            }
        }
    }
}

// out[t] = W in[t] + b for a W[out][in] block.
Matrix pointwise(const Matrix& in, const double* weight, const double* bias,
                 std::size_t out_channels) {
    Matrix out(in.rows(), out_channels);
    const std::size_t in_channels = in.cols();
    for (std::size_t t = 0; t < in.rows(); ++t) {
        auto irow = in.row(t);
        auto orow = out.row(t);
        for (std::size_t o = 0; o < out_channels; ++o) {
            const double* w = weight + o * in_channels;
            double acc = bias[o];
            for (std::size_t i = 0; i < in_channels; ++i) acc += w[i] * irow[i];
            orow[o] = acc;
        }
    }
    return out;
}

void pointwise_backward(const Matrix& in, const Matrix& dout, const double* weight,
                        double* dweight, double* dbias, Matrix* din) {
    const std::size_t in_channels = in.cols();
    for (std::size_t t = 0; t < in.rows(); ++t) {
        auto irow = in.row(t);
        auto grow = dout.row(t);
        for (std::size_t o = 0; o < dout.cols(); ++o) {
            const double g = grow[o];
            dbias[o] += g;
            if (g == 0.0) continue;
            double* dw = dweight + o * in_channels;
            for (std::size_t i = 0; i < in_channels; ++i) dw[i] += g * irow[i];
            if (din) {
                auto drow = din->row(t);
                const double* w = weight + o * in_channels;
                for (std::size_t i = 0; i < in_channels; ++i) drow[i] += g * w[i];
            }
        }
    }
}

std::vector<double> dropout_mask(const detail::DropoutContext& ctx, std::size_t layer,
                                 std::size_t size) {
    std::vector<double> mask(size);
    const CounterRng rng(ctx.seed);
    const double keep = 1.0 / (1.0 - ctx.rate);
    for (std::size_t i = 0; i < size; ++i) {
        mask[i] = rng.uniform(kDropoutStream, ctx.step * 64 + layer, i) > ctx.rate ? keep : 0.0;
    }
    return mask;
}

void check_inputs(const TcnModel& model, const Matrix& inputs) {
    if (inputs.cols() != model.config.input_width) {
        throw ShapeError("TCN input width " + std::to_string(inputs.cols()) +
                         " != configured " + std::to_string(model.config.input_width));
    }
    if (model.weights.size() != parameter_count(model.config)) {
        throw ShapeError("TCN weight vector does not match its configuration");
    }
}

}  // namespace

std::size_t TcnConfig::receptive_field() const noexcept {
    std::size_t rf = 1;
    for (auto d : dilations) rf += 2 * (kernel_size - 1) * d;
    return rf;
}

void TcnConfig::validate() const {
    if (output_width == 0) throw ConfigError("TCN output width must be positive");
    if (input_width == 0 || (use_lagged_response && input_width <= output_width)) {
        throw ConfigError("TCN input width must be positive (and exceed the output width "
                          "when lagged responses are appended)");
    }
    if (channels.empty()) throw ConfigError("TCN needs at least one residual block");
    if (channels.size() != dilations.size()) {
        throw ConfigError("TCN channels and dilations must have one entry per block");
    }
    for (auto c : channels)
        if (c == 0) throw ConfigError("TCN channel counts must be positive");
    for (auto d : dilations)
        if (d == 0) throw ConfigError("TCN dilations must be positive");
    if (kernel_size < 2) throw ConfigError("TCN kernel size must be >= 2");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in [0, 1)");
    }
    if (receptive_field() < min_history) {
        throw ConfigError("TCN receptive field " + std::to_string(receptive_field()) +
                          " is shorter than the requested history " +
                          std::to_string(min_history));
    }
}

bool operator==(const TcnConfig& a, const TcnConfig& b) {
    return a.input_width == b.input_width && a.output_width == b.output_width &&
           a.channels == b.channels && a.kernel_size == b.kernel_size &&
           a.dilations == b.dilations && a.activation == b.activation &&
           a.dropout == b.dropout && a.learning_rate == b.learning_rate &&
           a.epochs == b.epochs && a.batch_length == b.batch_length &&
           a.patience == b.patience && a.validation_fraction == b.validation_fraction &&
           a.seed == b.seed && a.use_lagged_response == b.use_lagged_response &&
           a.standardize == b.standardize && a.min_history == b.min_history;
}

ParameterLayout parameter_layout(const TcnConfig& config) {
    ParameterLayout layout;
    std::size_t offset = 0;
    std::size_t in = config.input_width;
    const std::size_t k = config.kernel_size;
    for (std::size_t b = 0; b < config.channels.size(); ++b) {
        BlockLayout block;
        const std::size_t out = config.channels[b];
        block.in_channels = in;
        block.out_channels = out;
        block.dilation = config.dilations.at(b);
        block.conv1_weight = offset;
        offset += k * in * out;
        block.conv1_bias = offset;
        offset += out;
        block.conv2_weight = offset;
        offset += k * out * out;
        block.conv2_bias = offset;
        offset += out;
        if (in != out) {
            block.residual_weight = offset;
            offset += in * out;
            block.residual_bias = offset;
            offset += out;
        }
        layout.blocks.push_back(block);
        in = out;
    }
    layout.readout_weight = offset;
    offset += in * config.output_width;
    layout.readout_bias = offset;
    offset += config.output_width;
    layout.total = offset;
    return layout;
}

std::size_t parameter_count(const TcnConfig& config) { return parameter_layout(config).total; }

TcnModel init_model(const TcnConfig& config, std::uint64_t seed) {
    config.validate();
    const auto layout = parameter_layout(config);
    TcnModel model;
    model.config = config;
    model.config.seed = seed;
    model.response_shape = Shape{config.output_width};
    model.weights.assign(layout.total, 0.0);

    const CounterRng rng(seed);
    auto fill = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < count; ++i) {
            const double u = rng.uniform(kInitStream, 0, offset + i);
            model.weights[offset + i] = bound * (2.0 * u - 1.0);
        }
    };
    const std::size_t k = config.kernel_size;
    for (const auto& b : layout.blocks) {
        fill(b.conv1_weight, k * b.in_channels * b.out_channels, k * b.in_channels);
        fill(b.conv2_weight, k * b.out_channels * b.out_channels, k * b.out_channels);
        if (b.has_projection())
            fill(b.residual_weight, b.in_channels * b.out_channels, b.in_channels);
    }
    const std::size_t last = config.channels.back();
    fill(layout.readout_weight, last * config.output_width, last);

    model.input_mean.assign(config.input_width, 0.0);
    model.input_scale.assign(config.input_width, 1.0);
    model.output_mean.assign(config.output_width, 0.0);
    model.output_scale.assign(config.output_width, 1.0);
    return model;
}

namespace detail {

ForwardCache forward_cached(const TcnModel& model, const ParameterLayout& layout,
                            const Matrix& inputs, const DropoutContext* dropout) {
    const auto& cfg = model.config;
    const double* w = model.weights.data();
    const bool drop = dropout && dropout->rate > 0.0;
    ForwardCache cache;
    cache.inputs = inputs;
    cache.blocks.resize(layout.blocks.size());
    const Matrix* x = &cache.inputs;
    for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
        const auto& bl = layout.blocks[b];
        auto& bc = cache.blocks[b];
        bc.pre1 = causal_conv(*x, w + bl.conv1_weight, w + bl.conv1_bias, bl.out_channels,
                              cfg.kernel_size, bl.dilation);
        bc.act1 = bc.pre1;
        for (auto& v : bc.act1.data()) v = activate(cfg.activation, v);
        if (drop) {
            bc.mask1 = dropout_mask(*dropout, 2 * b, bc.act1.size());
            for (std::size_t i = 0; i < bc.act1.size(); ++i) bc.act1.data()[i] *= bc.mask1[i];
        }
        bc.pre2 = causal_conv(bc.act1, w + bl.conv2_weight, w + bl.conv2_bias, bl.out_channels,
                              cfg.kernel_size, bl.dilation);
        bc.act2 = bc.pre2;
        for (auto& v : bc.act2.data()) v = activate(cfg.activation, v);
        if (drop) {
            bc.mask2 = dropout_mask(*dropout, 2 * b + 1, bc.act2.size());
            for (std::size_t i = 0; i < bc.act2.size(); ++i) bc.act2.data()[i] *= bc.mask2[i];
        }
        bc.pre_out = bl.has_projection()
                         ? pointwise(*x, w + bl.residual_weight, w + bl.residual_bias,
                                     bl.out_channels)
                         : *x;
        for (std::size_t i = 0; i < bc.pre_out.size(); ++i)
            bc.pre_out.data()[i] += bc.act2.data()[i];
        bc.output = bc.pre_out;
        for (auto& v : bc.output.data()) v = activate(cfg.activation, v);
        x = &bc.output;
    }
    cache.outputs = pointwise(*x, w + layout.readout_weight, w + layout.readout_bias,
                              cfg.output_width);
    return cache;
}

void backward(const TcnModel& model, const ParameterLayout& layout, const ForwardCache& cache,
              const Matrix& output_grad, std::span<double> gradient) {
    const auto& cfg = model.config;
    const double* w = model.weights.data();
    double* g = gradient.data();

    const Matrix& top = cache.blocks.empty() ? cache.inputs : cache.blocks.back().output;
    Matrix d_x(top.rows(), top.cols());
    pointwise_backward(top, output_grad, w + layout.readout_weight, g + layout.readout_weight,
                       g + layout.readout_bias, &d_x);

    for (std::size_t b = layout.blocks.size(); b-- > 0;) {
        const auto& bl = layout.blocks[b];
        const auto& bc = cache.blocks[b];
        const Matrix& x = b == 0 ? cache.inputs : cache.blocks[b - 1].output;
        const bool need_input_grad = b > 0;

        Matrix d_pre_out = std::move(d_x);
        for (std::size_t i = 0; i < d_pre_out.size(); ++i)
            d_pre_out.data()[i] *= activation_slope(cfg.activation, bc.pre_out.data()[i]);

        Matrix d_pre2 = d_pre_out;
        for (std::size_t i = 0; i < d_pre2.size(); ++i) {
            double s = activation_slope(cfg.activation, bc.pre2.data()[i]);
            if (!bc.mask2.empty()) s *= bc.mask2[i];
            d_pre2.data()[i] *= s;
        }
        Matrix d_act1(bc.act1.rows(), bc.act1.cols());
        causal_conv_backward(bc.act1, d_pre2, w + bl.conv2_weight, g + bl.conv2_weight,
                             g + bl.conv2_bias, &d_act1, cfg.kernel_size, bl.dilation);

        Matrix d_pre1 = std::move(d_act1);
        for (std::size_t i = 0; i < d_pre1.size(); ++i) {
            double s = activation_slope(cfg.activation, bc.pre1.data()[i]);
            if (!bc.mask1.empty()) s *= bc.mask1[i];
            d_pre1.data()[i] *= s;
        }

        Matrix d_in(x.rows(), x.cols());
        causal_conv_backward(x, d_pre1, w + bl.conv1_weight, g + bl.conv1_weight,
                             g + bl.conv1_bias, need_input_grad ? &d_in : nullptr,
                             cfg.kernel_size, bl.dilation);
        if (bl.has_projection()) {
            pointwise_backward(x, d_pre_out, w + bl.residual_weight, g + bl.residual_weight,
                               g + bl.residual_bias, need_input_grad ? &d_in : nullptr);
        } else if (need_input_grad) {
            for (std::size_t i = 0; i < d_in.size(); ++i) d_in.data()[i] += d_pre_out.data()[i];
        }
        d_x = std::move(d_in);
    }
}

double mse_rows(const Matrix& outputs, const Matrix& targets, std::size_t begin,
                std::size_t end, Matrix* output_grad) {
    const std::size_t width = outputs.cols();
    const double count = static_cast<double>((end - begin) * width);
    if (output_grad) *output_grad = Matrix(outputs.rows(), width);
    double sse = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
        auto o = outputs.row(t);
        auto y = targets.row(t);
        for (std::size_t j = 0; j < width; ++j) {
            const double e = o[j] - y[j];
            sse += e * e;
            if (output_grad) (*output_grad)(t, j) = 2.0 * e / count;
        }
    }
    return sse / count;
}

}  // namespace detail

Matrix forward(const TcnModel& model, const Matrix& inputs) {
    check_inputs(model, inputs);
    return detail::forward_cached(model, parameter_layout(model.config), inputs, nullptr).outputs;
}

double loss_and_gradient(const TcnModel& model, const Matrix& inputs, const Matrix& targets,
                         std::span<double> gradient, std::size_t begin, std::size_t end) {
    check_inputs(model, inputs);
    end = std::min(end, inputs.rows());
    if (targets.rows() != inputs.rows() || targets.cols() != model.config.output_width) {
        throw ShapeError("TCN targets do not match inputs/output width");
    }
    if (begin >= end) throw DataError("empty loss range");
    if (gradient.size() != model.weights.size()) throw ShapeError("gradient buffer size");
    const auto layout = parameter_layout(model.config);
    const auto cache = detail::forward_cached(model, layout, inputs, nullptr);
    Matrix d_out;
    const double loss = detail::mse_rows(cache.outputs, targets, begin, end, &d_out);
    std::fill(gradient.begin(), gradient.end(), 0.0);
    detail::backward(model, layout, cache, d_out, gradient);
    return loss;
}

Matrix network_inputs(const TcnModel& model, const Matrix& features, const Matrix& responses) {
    const auto& cfg = model.config;
    const std::size_t fw = cfg.feature_width();
    if (features.cols() != fw) {
        throw ShapeError("feature width " + std::to_string(features.cols()) + " != expected " +
                         std::to_string(fw));
    }
    Matrix in(features.rows(), cfg.input_width);
    for (std::size_t t = 0; t < features.rows(); ++t) {
        auto f = features.row(t);
        auto r = in.row(t);
        for (std::size_t j = 0; j < fw; ++j)
            r[j] = (f[j] - model.input_mean[j]) / model.input_scale[j];
        if (cfg.use_lagged_response && t > 0 && t - 1 < responses.rows()) {
            if (responses.cols() != cfg.output_width) throw ShapeError("lagged response width");
            auto y = responses.row(t - 1);
            for (std::size_t j = 0; j < cfg.output_width; ++j)
                r[fw + j] = (y[j] - model.output_mean[j]) / model.output_scale[j];
        }
    }
    return in;
}

namespace {

void destandardize_row(const TcnModel& model, std::span<double> row) {
    for (std::size_t j = 0; j < row.size(); ++j)
        row[j] = row[j] * model.output_scale[j] + model.output_mean[j];
}

}  // namespace

Matrix predict_sequence(const TcnModel& model, const Matrix& features,
                        const Matrix& known_responses) {
    const auto& cfg = model.config;
    if (!cfg.use_lagged_response || known_responses.rows() >= features.rows()) {
        Matrix out = forward(model, network_inputs(model, features, known_responses));
        for (std::size_t t = 0; t < out.rows(); ++t) destandardize_row(model, out.row(t));
        return out;
    }
    // Recursive: later lags come from the model's own predictions.
    Matrix responses(features.rows(), cfg.output_width);
    for (std::size_t t = 0; t < known_responses.rows(); ++t)
        std::copy(known_responses.row(t).begin(), known_responses.row(t).end(),
                  responses.row(t).begin());
    Matrix out(features.rows(), cfg.output_width);
    Matrix inputs = network_inputs(model, features, known_responses);
    const std::size_t known = known_responses.rows();
    Matrix prefix_out = forward(model, inputs);
    for (std::size_t t = 0; t <= known && t < features.rows(); ++t) {
        std::copy(prefix_out.row(t).begin(), prefix_out.row(t).end(), out.row(t).begin());
        destandardize_row(model, out.row(t));
    }
    for (std::size_t t = known + 1; t < features.rows(); ++t) {
        // Lag for step t is the prediction made at step t - 1.
        std::copy(out.row(t - 1).begin(), out.row(t - 1).end(), responses.row(t - 1).begin());
        const std::size_t fw = cfg.feature_width();
        auto r = inputs.row(t);
        for (std::size_t j = 0; j < cfg.output_width; ++j)
            r[fw + j] = (responses(t - 1, j) - model.output_mean[j]) / model.output_scale[j];
        Matrix prefix(t + 1, cfg.input_width);
        std::copy(inputs.data().begin(),
                  inputs.data().begin() + static_cast<std::ptrdiff_t>((t + 1) * cfg.input_width),
                  prefix.data().begin());
        const Matrix step = forward(model, prefix);
        std::copy(step.row(t).begin(), step.row(t).end(), out.row(t).begin());
        destandardize_row(model, out.row(t));
    }
    return out;
}

Tensor predict(const TcnModel& model, const Matrix& history, const Matrix& known_responses) {
    if (history.rows() == 0) throw DataError("predict needs a non-empty history");
    const Matrix out = predict_sequence(model, history, known_responses);
    auto last = out.row(out.rows() - 1);
    return Tensor(model.response_shape, std::vector<double>(last.begin(), last.end()));
}

TensorSeries forecast(const TcnModel& model, const Matrix& features,
                      const Matrix& known_responses, std::size_t horizon) {
    TensorSeries out(model.response_shape);
    if (horizon == 0) return out;
    if (horizon > features.rows()) throw DataError("forecast horizon exceeds feature history");
    const std::size_t start = features.rows() - horizon;
    Matrix known = known_responses;
    if (known.rows() > start) {
        // Only responses strictly before the forecast range may be used.
        Matrix trimmed(start, known.cols());
        std::copy(known.data().begin(),
                  known.data().begin() + static_cast<std::ptrdiff_t>(start * known.cols()),
                  trimmed.data().begin());
        known = std::move(trimmed);
    }
    const Matrix preds = predict_sequence(model, features, known);
    for (std::size_t t = start; t < preds.rows(); ++t) {
        auto row = preds.row(t);
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw NumericalError("forecast at step " + std::to_string(t) +
                                     " is not finite (non-finite inputs in the forecast range?)");
            }
        }
        out.push_back(Tensor(model.response_shape, std::vector<double>(row.begin(), row.end())));
    }
    return out;
}

namespace {

bool same_relu_pattern(const detail::ForwardCache& a, const detail::ForwardCache& b) {
    auto same = [](const Matrix& x, const Matrix& y) {
        for (std::size_t i = 0; i < x.size(); ++i)
            if ((x.data()[i] > 0.0) != (y.data()[i] > 0.0)) return false;
        return true;
    };
    for (std::size_t k = 0; k < a.blocks.size(); ++k) {
        const auto& p = a.blocks[k];
        const auto& q = b.blocks[k];
        if (!same(p.pre1, q.pre1) || !same(p.pre2, q.pre2) || !same(p.pre_out, q.pre_out))
            return false;
    }
    return true;
}

}  // namespace

double grad_check(const TcnModel& model, const Matrix& inputs, const Matrix& targets,
                  double epsilon, std::size_t samples, std::uint64_t seed) {
    std::vector<double> grad(model.weights.size());
    loss_and_gradient(model, inputs, targets, grad);

    // Counter-based shuffle; weights are consumed in this order.
    const std::size_t total = model.weights.size();
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const CounterRng rng(seed);
    for (std::size_t i = 0; i + 1 < total; ++i) {
        const std::size_t j = i + rng.bits(kGradCheckStream, 0, i) % (total - i);
        std::swap(order[i], order[j]);
    }

    const auto layout = parameter_layout(model.config);
    const bool relu = model.config.activation == Activation::relu;
    const double count = static_cast<double>(targets.size());
    TcnModel probe = model;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t idx : order) {
        if (checked == samples) break;
        const double w0 = probe.weights[idx];
        probe.weights[idx] = w0 + epsilon;
        const auto plus = detail::forward_cached(probe, layout, inputs, nullptr);
        probe.weights[idx] = w0 - epsilon;
        const auto minus = detail::forward_cached(probe, layout, inputs, nullptr);
        probe.weights[idx] = w0;
        // A ReLU switching state inside [w - eps, w + eps] makes the
        // difference quotient meaningless; such weights are skipped.
        if (relu && !same_relu_pattern(plus, minus)) continue;
        // L+ - L- summed as (o+ - o-)(o+ + o- - 2y) avoids cancelling two
        // nearly equal losses.
        double diff = 0.0;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const double op = plus.outputs.data()[i];
            const double om = minus.outputs.data()[i];
            diff += (op - om) * (op + om - 2.0 * targets.data()[i]);
        }
        const double fd = diff / count / (2.0 * epsilon);
        const double denom = std::max({std::abs(grad[idx]), std::abs(fd), 1e-8});
        worst = std::max(worst, std::abs(grad[idx] - fd) / denom);
        ++checked;
    }
    return worst;
}

}  // namespace fattnn
