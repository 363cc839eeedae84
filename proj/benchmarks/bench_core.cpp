#include <benchmark/benchmark.h>

#include "fattnn/factor_model.hpp"
#include "fattnn/rng.hpp"
#include "fattnn/simgen.hpp"
#include "fattnn/spectral.hpp"
#include "fattnn/tcn.hpp"
#include "fattnn/tensor.hpp"

using namespace fattnn;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    const CounterRng rng(seed);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0, 0, i);
    return m;
}

Tensor gaussian(const Shape& shape, std::uint64_t seed) {
    const CounterRng rng(seed);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal(1, 0, i);
    return t;
}

// Range argument: edge length d of a d x d x d tensor; multiplies mode 1 by a (d/2) x d matrix.
void BM_ModeMultiply(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const Tensor t = gaussian(Shape{d, d, d}, 1);
    const Matrix m = gaussian(d / 2, d, 2);
    for (auto _ : state) benchmark::DoNotOptimize(mode_multiply(t, m, 1));
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * d * d * d * (d / 2)));
}
BENCHMARK(BM_ModeMultiply)->Arg(8)->Arg(16)->Arg(32);

void BM_JacobiSvd(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix m = gaussian(n, 2 * n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(jacobi_svd(m));
}
BENCHMARK(BM_JacobiSvd)->Arg(12)->Arg(25)->Arg(50);

SimDataset dataset(int which) {
    SimConfig c = simulation_config(which, 1);
    return generate(c);
}

// Range argument: simulation configuration 1, 2 or 3.
void BM_Tipup(benchmark::State& state) {
    const int which = static_cast<int>(state.range(0));
    const SimDataset ds = dataset(which);
    const Shape ranks = simulation_config(which).ranks;
    for (auto _ : state) benchmark::DoNotOptimize(tipup_fit(ds.covariates, ranks));
}
BENCHMARK(BM_Tipup)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

void BM_Itipup(benchmark::State& state) {
    const int which = static_cast<int>(state.range(0));
    const SimDataset ds = dataset(which);
    const Shape ranks = simulation_config(which).ranks;
    for (auto _ : state) benchmark::DoNotOptimize(itipup_fit(ds.covariates, ranks));
}
BENCHMARK(BM_Itipup)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

// Range argument: input width per time step (48 = factors of configuration 3, 432 = raw covariates).
TcnModel default_model(std::size_t input_width) {
    TcnConfig c;
    c.input_width = input_width;
    c.output_width = 27;
    return init_model(c, 1);
}

void BM_TcnForward(benchmark::State& state) {
    const auto w = static_cast<std::size_t>(state.range(0));
    const TcnModel m = default_model(w);
    const Matrix x = gaussian(70, w, 4);
    for (auto _ : state) benchmark::DoNotOptimize(forward(m, x));
}
BENCHMARK(BM_TcnForward)->Arg(48)->Arg(432)->Unit(benchmark::kMicrosecond);

void BM_TcnForwardBackward(benchmark::State& state) {
    const auto w = static_cast<std::size_t>(state.range(0));
    const TcnModel m = default_model(w);
    const Matrix x = gaussian(70, w, 5), y = gaussian(70, 27, 6);
    std::vector<double> g(m.weights.size());
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradient(m, x, y, g));
}
BENCHMARK(BM_TcnForwardBackward)->Arg(48)->Arg(432)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
