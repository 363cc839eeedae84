#include "fattnn/simgen.hpp"

#include <cmath>

#include "fattnn/error.hpp"
#include "fattnn/rng.hpp"
#include "fattnn/spectral.hpp"

namespace fattnn {

namespace {

// Independent random streams; substreams separate modes within a stream.
enum Stream : std::uint64_t {
    kPhiStream = 1,
    kLoadingStream = 2,
    kFactorStream = 3,
    kCovariateNoiseStream = 4,
    kCoefficientStream = 5,
    kResponseNoiseStream = 6,
};

Matrix gaussian_matrix(const CounterRng& rng, std::uint64_t stream, std::uint64_t substream,
                       std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(stream, substream, i);
    return m;
}

}  // namespace

Transform parse_transform(const std::string& name) {
    if (name == "cos") return Transform::cos;
    if (name == "log-abs" || name == "log_abs" || name == "logabs") return Transform::log_abs;
    if (name == "softplus") return Transform::softplus;
    if (name == "identity") return Transform::identity;
    throw ConfigError("unknown transform '" + name + "' (cos, log-abs, softplus, identity)");
}

std::string to_string(Transform t) {
    switch (t) {
        case Transform::cos: return "cos";
        case Transform::log_abs: return "log-abs";
        case Transform::softplus: return "softplus";
        case Transform::identity: return "identity";
    }
    return "?";
}

double apply_transform(Transform t, double z) noexcept {
    switch (t) {
        case Transform::cos: return std::cos(z);
        case Transform::log_abs: return std::log(std::max(std::abs(z), kLogAbsFloor));
        case Transform::softplus: return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
        case Transform::identity: return z;
    }
    return z;
}

double SimConfig::resolved_lambda() const {
    const double base = lambda ? *lambda : std::sqrt(static_cast<double>(num_elements(ranks)));
    return base * lambda_scale;
}

void SimConfig::validate() const {
    if (dims.empty()) throw ConfigError("dims must be non-empty");
    if (ranks.size() != dims.size()) throw ConfigError("ranks must have one entry per mode");
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (ranks[k] == 0 || ranks[k] > dims[k])
            throw ConfigError("rank " + std::to_string(ranks[k]) + " invalid for dim " +
                              std::to_string(dims[k]));
    }
    for (auto p : response_dims)
        if (p == 0) throw ConfigError("response dims must be positive");
    if (n < 2) throw ConfigError("n must be >= 2");
    if (!(sigma_u2 >= 0.0)) throw ConfigError("sigma_u2 must be >= 0");
    if (cp_rank == 0) throw ConfigError("cp_rank must be positive");
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
    if (!(factor_noise_sd >= 0.0) || !(covariate_noise_sd >= 0.0))
        throw ConfigError("noise standard deviations must be >= 0");
}

SimConfig simulation_config(int which, std::uint64_t seed) {
    SimConfig c;
    c.seed = seed;
    switch (which) {
        case 1:
            c.dims = {25, 25, 12};
            c.ranks = {3, 3, 2};
            c.response_dims = {6, 8, 6};
            c.n = 500;
            c.transform = Transform::cos;
            c.sigma_u2 = 1.0;
            break;
        case 2:
            c.dims = {30, 6, 12};
            c.ranks = {6, 3, 2};
            c.response_dims = {8, 6, 4};
            c.n = 400;
            c.transform = Transform::log_abs;
            c.sigma_u2 = 1.0;
            break;
        case 3:
            c.dims = {12, 3, 12};
            c.ranks = {4, 3, 4};
            c.response_dims = {3, 3, 3};
            c.n = 100;
            c.transform = Transform::softplus;
            c.sigma_u2 = 0.5;
            break;
        default:
            throw ConfigError("simulation config must be 1, 2 or 3");
    }
    return c;
}

Matrix make_phi(const Shape& ranks, std::uint64_t seed, double rho) {
    if (ranks.empty()) throw ConfigError("make_phi: no ranks");
    const CounterRng rng(seed);
    Matrix phi = Matrix::identity(1);
    for (std::size_t k = 0; k < ranks.size(); ++k) {
        if (ranks[k] == 0) throw ConfigError("make_phi: ranks must be positive");
        const Matrix q = qr_orthonormalize(gaussian_matrix(rng, kPhiStream, k, ranks[k], ranks[k]));
        phi = kronecker(phi, q);
    }
    return rho == 1.0 ? phi : rho * phi;
}

TensorSeries gen_factor_series(const SimConfig& config) {
    config.validate();
    const CounterRng rng(config.seed);
    const Matrix phi = make_phi(config.ranks, config.seed, config.rho);
    const std::size_t width = num_elements(config.ranks);

    std::vector<double> state(width);
    for (std::size_t i = 0; i < width; ++i) state[i] = rng.normal(kFactorStream, 0, i);

    TensorSeries out(config.ranks);
    const std::size_t steps = config.burn_in + config.n;
    std::vector<double> next(width);
    for (std::size_t s = 1; s <= steps; ++s) {
        for (std::size_t i = 0; i < width; ++i) {
            double acc = 0.0;
            auto prow = phi.row(i);
            for (std::size_t j = 0; j < width; ++j) acc += prow[j] * state[j];
            const double w = config.factor_noise_sd == 0.0
                                 ? 0.0
                                 : config.factor_noise_sd * rng.normal(kFactorStream, 0, s * width + i);
            next[i] = acc + w;
        }
        state.swap(next);
        if (s > config.burn_in) out.push_back(unvectorize(state, config.ranks));
    }
    return out;
}

CovariateDraw gen_covariates(const TensorSeries& factors, const SimConfig& config) {
    config.validate();
    if (factors.shape() != config.ranks) {
        throw ShapeError("gen_covariates: factor shape " + to_string(factors.shape()) +
                         " != ranks " + to_string(config.ranks));
    }
    const CounterRng rng(config.seed);
    CovariateDraw out;
    for (std::size_t k = 0; k < config.dims.size(); ++k) {
        out.loadings.loadings.push_back(qr_orthonormalize(
            gaussian_matrix(rng, kLoadingStream, k, config.dims[k], config.ranks[k])));
    }
    const double lambda = config.resolved_lambda();
    const std::size_t size = num_elements(config.dims);
    out.covariates = embed_factors(factors, out.loadings);
    for (std::size_t t = 0; t < out.covariates.length(); ++t) {
        Tensor& x = out.covariates[t];
        x *= lambda;
        if (config.covariate_noise_sd != 0.0) {
            for (std::size_t i = 0; i < size; ++i)
                x[i] += config.covariate_noise_sd * rng.normal(kCovariateNoiseStream, 0, t * size + i);
        }
    }
    return out;
}

Tensor make_coefficient(const SimConfig& config) {
    const CounterRng rng(config.seed);
    std::vector<Matrix> factors;
    std::uint64_t sub = 0;
    for (auto r : config.ranks)
        factors.push_back(gaussian_matrix(rng, kCoefficientStream, sub++, r, config.cp_rank));
    for (auto p : config.response_dims)
        factors.push_back(gaussian_matrix(rng, kCoefficientStream, sub++, p, config.cp_rank));
    return cp_from_factors(factors);
}

TensorSeries gen_responses(const TensorSeries& factors, const Tensor& coefficient,
                           const SimConfig& config) {
    if (factors.shape() != config.ranks) throw ShapeError("gen_responses: factor shape mismatch");
    const CounterRng rng(config.seed);
    const double sd = std::sqrt(config.sigma_u2);
    const std::size_t size = num_elements(config.response_dims);
    TensorSeries out(config.response_dims);
    for (std::size_t t = 0; t < factors.length(); ++t) {
        Tensor s = factors[t];
        for (auto& z : s.data()) z = apply_transform(config.transform, z);
        Tensor y = contracted_product(s, coefficient, config.ranks.size());
        if (sd != 0.0) {
            for (std::size_t i = 0; i < size; ++i)
                y[i] += sd * rng.normal(kResponseNoiseStream, 0, t * size + i);
        }
        out.push_back(std::move(y));
    }
    return out;
}

SimDataset generate(const SimConfig& config) {
    config.validate();
    SimDataset ds;
    ds.true_factors = gen_factor_series(config);
    auto cov = gen_covariates(ds.true_factors, config);
    ds.covariates = std::move(cov.covariates);
    ds.true_loadings = std::move(cov.loadings);
    ds.coefficient = make_coefficient(config);
    ds.responses = gen_responses(ds.true_factors, ds.coefficient, config);
    ds.lambda = config.resolved_lambda();
    return ds;
}

}  // namespace fattnn
