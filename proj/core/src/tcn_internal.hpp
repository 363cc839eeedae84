#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fattnn/tcn.hpp"

namespace fattnn::detail {

/// Dropout masks for one training pass; empty when dropout is off.
struct DropoutContext {
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

struct BlockCache {
    Matrix pre1, act1, pre2, act2, pre_out, output;
    std::vector<double> mask1, mask2;
};

struct ForwardCache {
    Matrix inputs;
    std::vector<BlockCache> blocks;
    Matrix outputs;
};

ForwardCache forward_cached(const TcnModel& model, const ParameterLayout& layout,
                            const Matrix& inputs, const DropoutContext* dropout);

/// Accumulates d(loss)/d(weights) into `gradient` given d(loss)/d(outputs).
void backward(const TcnModel& model, const ParameterLayout& layout, const ForwardCache& cache,
              const Matrix& output_grad, std::span<double> gradient);

/// Sum of squared errors over rows [begin, end); fills output_grad with the
/// gradient of the mean (over (end - begin) * width entries) when non-null.
double mse_rows(const Matrix& outputs, const Matrix& targets, std::size_t begin,
                std::size_t end, Matrix* output_grad);

}  // namespace fattnn::detail
