#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "fattnn/tensor.hpp"

namespace fattnn {

enum class Activation { relu, linear };

/// Hyperparameters of the dilated causal convolutional forecaster.
///
/// The network is a stack of residual blocks followed by a per-time-step
/// linear read-out. Block b holds two causal convolutions with kernel
/// `kernel_size` and dilation `dilations[b]`, each followed by the
/// activation (and dropout while training), plus a residual path that is a
/// 1x1 convolution whenever the channel count changes. The block output is
/// activation(conv path + residual).
struct TcnConfig {
    /// Network input width: feature width, plus output_width when lagged
    /// responses are appended.
    std::size_t input_width = 0;
    std::size_t output_width = 0;
    std::vector<std::size_t> channels{32, 32, 32};
    std::size_t kernel_size = 3;
    std::vector<std::size_t> dilations{1, 2, 4};
    Activation activation = Activation::relu;
    double dropout = 0.0;
    double learning_rate = 1e-3;
    std::size_t epochs = 200;
    /// 0 trains on the full sequence each step; otherwise contiguous windows.
    std::size_t batch_length = 0;
    /// Early stopping patience in epochs; 0 disables early stopping.
    std::size_t patience = 20;
    /// Tail of the training range held out for early stopping.
    double validation_fraction = 0.1;
    std::uint64_t seed = 0;
    bool use_lagged_response = false;
    /// Standardise features and targets with training-range statistics.
    bool standardize = true;
    /// Smallest history the receptive field must cover.
    std::size_t min_history = 0;

    std::size_t feature_width() const noexcept {
        return input_width - (use_lagged_response ? output_width : 0);
    }
    /// 1 + sum_b 2 (kernel_size - 1) dilations[b]
    std::size_t receptive_field() const noexcept;
    void validate() const;
};

/// Offsets of each parameter group inside the flat weight vector.
///
/// Convolution kernels are stored tap-major: W[tap][out][in]. Tap
/// kernel_size - 1 multiplies the current time step; tap j reaches back
/// (kernel_size - 1 - j) * dilation steps. The read-out is W[out][in].
struct BlockLayout {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t dilation = 1;
    std::size_t conv1_weight = 0;
    std::size_t conv1_bias = 0;
    std::size_t conv2_weight = 0;
    std::size_t conv2_bias = 0;
    std::size_t residual_weight = kNone;
    std::size_t residual_bias = kNone;

    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    bool has_projection() const noexcept { return residual_weight != kNone; }
};

struct ParameterLayout {
    std::vector<BlockLayout> blocks;
    std::size_t readout_weight = 0;
    std::size_t readout_bias = 0;
    std::size_t total = 0;
};

/// Per block: K*Cin*Cout + Cout + K*Cout*Cout + Cout (+ Cin*Cout + Cout when
/// Cin != Cout); read-out: C_last*out + out.
ParameterLayout parameter_layout(const TcnConfig& config);
std::size_t parameter_count(const TcnConfig& config);

struct TcnModel {
    TcnConfig config;
    /// Shape each output row is reshaped to; defaults to {output_width}.
    Shape response_shape;
    std::vector<double> weights;
    /// Standardisation statistics (identity until trained).
    std::vector<double> input_mean;
    std::vector<double> input_scale;
    std::vector<double> output_mean;
    std::vector<double> output_scale;

    friend bool operator==(const TcnModel&, const TcnModel&) = default;
};

bool operator==(const TcnConfig& a, const TcnConfig& b);

/// Fan-in scaled uniform weights, zero biases, identity standardisation.
TcnModel init_model(const TcnConfig& config, std::uint64_t seed);

/// Raw network map on a time-major input (rows = time steps). Causal:
/// row t of the result depends only on input rows 0..t.
Matrix forward(const TcnModel& model, const Matrix& inputs);

/// Mean squared error over rows [begin, end) and its gradient with respect
/// to every weight. Dropout is off.
double loss_and_gradient(const TcnModel& model, const Matrix& inputs, const Matrix& targets,
                         std::span<double> gradient, std::size_t begin = 0,
                         std::size_t end = std::numeric_limits<std::size_t>::max());

struct TrainResult {
    TcnModel model;
    /// Training loss (standardised scale) at the start of every epoch.
    std::vector<double> loss_trace;
    std::vector<double> validation_trace;
    double initial_loss = 0.0;
    /// Training loss of the returned weights.
    double final_loss = 0.0;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    std::size_t optimizer_steps = 0;
};

/// Adam on the mean squared error between network outputs and responses.
///
/// `features` and `responses` are time-major with equal row counts. The
/// returned model carries the standardisation statistics of this training
/// range. Throws NumericalError when the loss becomes non-finite.
TrainResult train(TcnModel model, const Matrix& features, const Matrix& responses,
                  std::size_t max_steps = std::numeric_limits<std::size_t>::max());

/// Network inputs for a feature history: standardised features, plus the
/// standardised previous response when lagged inputs are enabled (zero at
/// t = 0). `responses` may be shorter than `features`; missing lags are 0.
Matrix network_inputs(const TcnModel& model, const Matrix& features, const Matrix& responses);

/// De-standardised predictions for every row of `features`. With lagged
/// inputs, rows at or beyond known_responses.rows() feed back the model's
/// own earlier predictions.
Matrix predict_sequence(const TcnModel& model, const Matrix& features,
                        const Matrix& known_responses = {});

/// Prediction for the last row of `history`, reshaped to response_shape.
Tensor predict(const TcnModel& model, const Matrix& history,
               const Matrix& known_responses = {});

/// Forecasts for the trailing `horizon` rows of `features`; the leading
/// rows pair with `known_responses`.
TensorSeries forecast(const TcnModel& model, const Matrix& features,
                      const Matrix& known_responses, std::size_t horizon);

/// Max relative error between reverse-mode and central-difference gradients
/// of the mean squared error, over `samples` randomly chosen weights.
/// relative error = |g - g_fd| / max(|g|, |g_fd|, 1e-8). With ReLU, weights
/// whose +-epsilon perturbation switches any unit are skipped and replaced.
double grad_check(const TcnModel& model, const Matrix& inputs, const Matrix& targets,
                  double epsilon = 1e-5, std::size_t samples = 200, std::uint64_t seed = 0);

}  // namespace fattnn
