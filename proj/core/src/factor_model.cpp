#include "fattnn/factor_model.hpp"

#include <algorithm>
#include <cmath>

#include "fattnn/error.hpp"
#include "fattnn/spectral.hpp"

namespace fattnn {

namespace {

void check_ranks(const Shape& dims, const Shape& ranks) {
    if (ranks.size() != dims.size()) {
        throw ShapeError("expected " + std::to_string(dims.size()) + " ranks, got " +
                         std::to_string(ranks.size()));
    }
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (ranks[k] == 0 || ranks[k] > dims[k]) {
            throw ShapeError("rank " + std::to_string(ranks[k]) + " invalid for mode " +
                             std::to_string(k) + " of extent " + std::to_string(dims[k]));
        }
    }
}

Tensor time_mean(const TensorSeries& series) {
    Tensor mean(series.shape());
    for (const auto& x : series) mean += x;
    mean *= 1.0 / static_cast<double>(series.length());
    return mean;
}

// Second moment of mode k over the series after projecting every other mode.
Matrix projected_moment(const TensorSeries& series, const std::vector<Matrix>& loadings,
                        std::size_t mode, const Tensor* mean) {
    const std::size_t d = series.shape()[mode];
    Matrix acc(d, d);
    for (const auto& x : series) {
        Tensor z = mean ? x - *mean : x;
        for (std::size_t l = 0; l < loadings.size(); ++l) {
            if (l != mode) z = mode_multiply_transposed(z, loadings[l], l);
        }
        const Matrix g = mode_gram(z, mode);
        for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += g.data()[i];
    }
    return (1.0 / static_cast<double>(series.length())) * acc;
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data().begin(), m.data().end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Shape LoadingSet::ranks() const {
    Shape r;
    for (const auto& a : loadings) r.push_back(a.cols());
    return r;
}

Shape LoadingSet::dims() const {
    Shape d;
    for (const auto& a : loadings) d.push_back(a.rows());
    return d;
}

std::vector<Matrix> tipup_moments(const TensorSeries& series, bool center) {
    if (series.empty()) throw DataError("TIPUP needs at least one time point");
    const std::size_t order = series.shape().size();
    if (order == 0) throw ShapeError("TIPUP needs tensors of order >= 1");
    const Tensor mean = center ? time_mean(series) : Tensor();

    std::vector<Matrix> moments;
    moments.reserve(order);
    for (std::size_t k = 0; k < order; ++k) {
        Matrix acc(series.shape()[k], series.shape()[k]);
        for (const auto& x : series) {
            const Matrix g = center ? mode_gram(x - mean, k) : mode_gram(x, k);
            for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += g.data()[i];
        }
        moments.push_back((1.0 / static_cast<double>(series.length())) * acc);
    }
    return moments;
}

LoadingSet tipup_fit(const TensorSeries& series, const Shape& ranks, bool center) {
    check_ranks(series.shape(), ranks);
    const auto moments = tipup_moments(series, center);
    LoadingSet out;
    for (std::size_t k = 0; k < moments.size(); ++k) {
        if (!all_finite(moments[k])) {
            throw DataError("TIPUP: series contains non-finite values");
        }
        double trace = 0.0;
        for (std::size_t i = 0; i < moments[k].rows(); ++i) trace += moments[k](i, i);
        if (trace <= 0.0) throw DataError("TIPUP: degenerate (all-zero) series");
        out.loadings.push_back(top_left_singular_vectors(moments[k], ranks[k]));
    }
    return out;
}

FactorFit itipup_fit(const TensorSeries& series, const Shape& ranks,
                     const IterativeFitOptions& options) {
    if (!(options.eps > 0.0)) throw ConfigError("iTIPUP tolerance must be positive");
    FactorFit fit;
    fit.loadings = tipup_fit(series, ranks, options.center);
    const Tensor mean = options.center ? time_mean(series) : Tensor();
    const Tensor* mean_ptr = options.center ? &mean : nullptr;

    if (std::isfinite(options.eps)) {
        auto& current = fit.loadings.loadings;
        for (std::size_t j = 1; j <= options.max_iter; ++j) {
            const std::vector<Matrix> previous = current;
            for (std::size_t k = 0; k < current.size(); ++k) {
                const Matrix moment = projected_moment(series, current, k, mean_ptr);
                current[k] = top_left_singular_vectors(moment, ranks[k]);
            }
            double change = 0.0;
            for (std::size_t k = 0; k < current.size(); ++k)
                change = std::max(change, projector_distance(current[k], previous[k]));
            fit.iterations_used = j;
            fit.final_subspace_change = change;
            if (change <= options.eps) break;
        }
    }
    fit.factors = extract_factors(series, fit.loadings);
    return fit;
}

TensorSeries extract_factors(const TensorSeries& series, const LoadingSet& loadings) {
    if (loadings.dims() != series.shape()) {
        throw ShapeError("extract_factors: loadings for " + to_string(loadings.dims()) +
                         " applied to series of shape " + to_string(series.shape()));
    }
    TensorSeries out(loadings.ranks());
    for (const auto& x : series) {
        Tensor f = x;
        for (std::size_t k = 0; k < loadings.order(); ++k)
            f = mode_multiply_transposed(f, loadings.loadings[k], k);
        out.push_back(std::move(f));
    }
    return out;
}

TensorSeries embed_factors(const TensorSeries& factors, const LoadingSet& loadings) {
    if (loadings.ranks() != factors.shape()) {
        throw ShapeError("embed_factors: loadings ranks " + to_string(loadings.ranks()) +
                         " do not match factor shape " + to_string(factors.shape()));
    }
    TensorSeries out(loadings.dims());
    for (const auto& f : factors) {
        Tensor x = f;
        for (std::size_t k = 0; k < loadings.order(); ++k)
            x = mode_multiply(x, loadings.loadings[k], k);
        out.push_back(std::move(x));
    }
    return out;
}

TuckerDecomp hosvd(const Tensor& t, const Shape& ranks) {
    check_ranks(t.shape(), ranks);
    TuckerDecomp out;
    Tensor core = t;
    for (std::size_t k = 0; k < t.order(); ++k) {
        out.factors.push_back(top_left_singular_vectors(matricize(t, k), ranks[k]));
    }
    for (std::size_t k = 0; k < t.order(); ++k)
        core = mode_multiply_transposed(core, out.factors[k], k);
    out.core = std::move(core);
    return out;
}

Shape select_ranks(const TensorSeries& series, const Shape& r_max) {
    const Shape& dims = series.shape();
    if (r_max.size() != dims.size()) throw ShapeError("select_ranks: r_max order mismatch");
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (r_max[k] == 0 || r_max[k] > dims[k]) {
            throw ShapeError("select_ranks: r_max[" + std::to_string(k) + "]=" +
                             std::to_string(r_max[k]) + " outside [1, " +
                             std::to_string(dims[k]) + "]");
        }
    }
    const auto moments = tipup_moments(series);
    const std::size_t total = num_elements(dims);

    Shape ranks(dims.size(), 1);
    std::vector<std::vector<double>> spectra(dims.size());
    std::vector<double> noise_estimates;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        spectra[k] = singular_values(moments[k]);
        if (dims[k] == 1 || r_max[k] == dims[k]) continue;
        ranks[k] = eigen_ratio_rank(spectra[k], r_max[k]);
        const auto& s = spectra[k];
        double tail = 0.0;
        for (std::size_t i = ranks[k]; i < s.size(); ++i) tail += s[i];
        tail /= static_cast<double>(s.size() - ranks[k]);
        noise_estimates.push_back(tail / static_cast<double>(total / dims[k]));
    }

    double noise = 0.0;
    if (!noise_estimates.empty()) {
        auto mid = noise_estimates.begin() + static_cast<std::ptrdiff_t>(noise_estimates.size() / 2);
        std::nth_element(noise_estimates.begin(), mid, noise_estimates.end());
        noise = *mid;
    }
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (dims[k] == 1 || r_max[k] != dims[k]) continue;
        if (noise_estimates.empty()) {
            ranks[k] = dims[k] == 1 ? 1 : eigen_ratio_rank(spectra[k], dims[k] - 1);
            continue;
        }
        std::vector<double> extended = spectra[k];
        extended.push_back(noise * static_cast<double>(total / dims[k]));
        ranks[k] = eigen_ratio_rank(extended, r_max[k]);
    }
    return ranks;
}

}  // namespace fattnn
