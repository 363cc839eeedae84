#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fattnn/error.hpp"
#include "fattnn/factor_model.hpp"
#include "fattnn/simgen.hpp"
#include "fattnn/spectral.hpp"
#include "oracles.hpp"

using namespace fattnn;

namespace {

struct LowRankSeries {
    TensorSeries series;
    LoadingSet loadings;
};

/// X_t = F_t x_k A_k with Gaussian factors and orthonormal loadings.
LowRankSeries low_rank_series(const Shape& dims, const Shape& ranks, std::size_t n,
                              std::uint64_t seed) {
    LowRankSeries out{TensorSeries(dims), {}};
    for (std::size_t k = 0; k < dims.size(); ++k)
        out.loadings.loadings.push_back(
            oracle::gram_schmidt(oracle::random_matrix(dims[k], ranks[k], seed, k)));
    for (std::size_t t = 0; t < n; ++t) {
        Tensor x = oracle::random_tensor(ranks, seed, 100 + t);
        for (std::size_t k = 0; k < dims.size(); ++k) x = oracle::mode_multiply(x, out.loadings.loadings[k], k);
        out.series.push_back(std::move(x));
    }
    return out;
}

double worst_sin_theta(const LoadingSet& a, const LoadingSet& b) {
    double worst = 0.0;
    for (std::size_t k = 0; k < a.order(); ++k)
        worst = std::max(worst, sin_theta_distance(a.loadings[k], b.loadings[k]));
    return worst;
}

TensorSeries with_noise(const TensorSeries& s, double sd, std::uint64_t seed) {
    TensorSeries out(s.shape());
    for (std::size_t t = 0; t < s.length(); ++t) {
        Tensor x = s[t];
        const Tensor e = oracle::random_tensor(s.shape(), seed, 5000 + t);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += sd * e[i];
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace

TEST(TipupFit, NoiselessRecovery) {
    const auto data = low_rank_series({12, 3, 12}, {4, 3, 4}, 60, 1);
    const LoadingSet est = tipup_fit(data.series, {4, 3, 4});
    EXPECT_LT(worst_sin_theta(est, data.loadings), 1e-8);
    for (const auto& a : est.loadings) EXPECT_LT(orthonormality_defect(a), 1e-10);
}

TEST(TipupFit, OrderOneIsPca) {
    TensorSeries s(Shape{6});
    for (std::size_t t = 0; t < 40; ++t) s.push_back(oracle::random_tensor({6}, 2, t));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(6, 6);
    for (const auto& x : s) {
        Eigen::VectorXd v(6);
        for (int i = 0; i < 6; ++i) v(i) = x[static_cast<std::size_t>(i)];
        m += v * v.transpose() / 40.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Matrix top = oracle::from_eigen(es.eigenvectors().rightCols(2));
    EXPECT_LT(sin_theta_distance(tipup_fit(s, {2}).loadings[0], top), 1e-8);
}

TEST(TipupFit, SinglePointEqualsHosvd) {
    TensorSeries s(Shape{5, 4, 3});
    s.push_back(oracle::random_tensor({5, 4, 3}, 3));
    const LoadingSet est = tipup_fit(s, {2, 2, 2});
    const TuckerDecomp td = hosvd(s[0], {2, 2, 2});
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_LT(sin_theta_distance(est.loadings[k], td.factors[k]), 1e-10);
}

TEST(TipupFit, RotationEquivariance) {
    const auto data = low_rank_series({6, 5, 4}, {2, 2, 2}, 30, 4);
    const TensorSeries noisy = with_noise(data.series, 0.3, 4);
    std::vector<Matrix> rot;
    for (std::size_t k = 0; k < 3; ++k)
        rot.push_back(oracle::gram_schmidt(oracle::random_matrix(noisy.shape()[k], noisy.shape()[k], 40, k)));
    TensorSeries rotated(noisy.shape());
    for (const auto& x : noisy) {
        Tensor y = x;
        for (std::size_t k = 0; k < 3; ++k) y = mode_multiply(y, rot[k], k);
        rotated.push_back(std::move(y));
    }
    const LoadingSet a = tipup_fit(noisy, {2, 2, 2});
    const LoadingSet b = tipup_fit(rotated, {2, 2, 2});
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_LT(sin_theta_distance(rot[k] * a.loadings[k], b.loadings[k]), 1e-8);
}

TEST(TipupFit, ScaleInvariance) {
    const auto data = low_rank_series({5, 6}, {2, 3}, 20, 5);
    const TensorSeries noisy = with_noise(data.series, 0.5, 5);
    TensorSeries scaled(noisy.shape());
    for (const auto& x : noisy) scaled.push_back(7.5 * x);
    EXPECT_LT(worst_sin_theta(tipup_fit(noisy, {2, 3}), tipup_fit(scaled, {2, 3})), 1e-10);
}

TEST(TipupFit, DegenerateInputIsAnError) {
    TensorSeries zeros(Shape{3, 3});
    for (int t = 0; t < 4; ++t) zeros.push_back(Tensor({3, 3}));
    EXPECT_THROW(tipup_fit(zeros, {1, 1}), DataError);
    TensorSeries bad(Shape{2, 2});
    bad.push_back(Tensor({2, 2}, std::vector<double>{1, std::nan(""), 0, 1}));
    EXPECT_THROW(tipup_fit(bad, {1, 1}), DataError);
    EXPECT_THROW(tipup_fit(TensorSeries(Shape{2, 2}), {1, 1}), DataError);
}

TEST(TipupFit, RejectsRanksThatDoNotFit) {
    const auto data = low_rank_series({4, 3}, {2, 2}, 5, 6);
    EXPECT_THROW(tipup_fit(data.series, {5, 2}), ShapeError);
    EXPECT_THROW(tipup_fit(data.series, {2}), ShapeError);
}

TEST(TipupFit, CenteringRemovesTheMean) {
    const auto data = low_rank_series({5, 4}, {2, 2}, 30, 7);
    TensorSeries shifted(data.series.shape());
    Tensor mean({5, 4});
    for (const auto& x : data.series) mean += x;
    mean *= 1.0 / 30.0;
    const Tensor offset = oracle::random_tensor({5, 4}, 70);
    for (const auto& x : data.series) shifted.push_back(x - mean + 100.0 * offset);
    TensorSeries centred(data.series.shape());
    for (const auto& x : data.series) centred.push_back(x - mean);
    const auto a = tipup_moments(shifted, true);
    const auto b = tipup_moments(centred, false);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_LT(max_abs_diff(a[k], b[k]), 1e-9);
}

TEST(ItipupFit, NoiselessConvergesInOnePass) {
    const auto data = low_rank_series({12, 3, 12}, {4, 3, 4}, 60, 8);
    const FactorFit fit = itipup_fit(data.series, {4, 3, 4});
    EXPECT_EQ(fit.iterations_used, 1u);
    EXPECT_LT(fit.final_subspace_change, 1e-10);
    EXPECT_LT(worst_sin_theta(fit.loadings, data.loadings), 1e-8);
}

TEST(ItipupFit, InfiniteToleranceOrZeroPassesEqualsTipup) {
    const auto data = low_rank_series({6, 5, 4}, {2, 2, 2}, 25, 9);
    const TensorSeries noisy = with_noise(data.series, 0.5, 9);
    const LoadingSet tip = tipup_fit(noisy, {2, 2, 2});
    IterativeFitOptions inf;
    inf.eps = std::numeric_limits<double>::infinity();
    const FactorFit a = itipup_fit(noisy, {2, 2, 2}, inf);
    EXPECT_EQ(a.iterations_used, 0u);
    IterativeFitOptions none;
    none.max_iter = 0;
    const FactorFit b = itipup_fit(noisy, {2, 2, 2}, none);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_EQ(a.loadings.loadings[k], tip.loadings[k]);
        EXPECT_EQ(b.loadings.loadings[k], tip.loadings[k]);
    }
}

TEST(ItipupFit, FactorsMatchRecomputation) {
    const auto data = low_rank_series({5, 4, 3}, {2, 2, 2}, 12, 10);
    const TensorSeries noisy = with_noise(data.series, 0.2, 10);
    const FactorFit fit = itipup_fit(noisy, {2, 2, 2});
    ASSERT_EQ(fit.factors.length(), 12u);
    for (std::size_t t = 0; t < 12; ++t) {
        Tensor f = noisy[t];
        for (std::size_t k = 0; k < 3; ++k) f = oracle::mode_multiply(f, fit.loadings.loadings[k].transpose(), k);
        EXPECT_LT(oracle::max_abs_diff(f, fit.factors[t]), 1e-10);
    }
}

TEST(ItipupFit, NonConvergenceIsNotAnError) {
    const auto data = low_rank_series({6, 6}, {2, 2}, 15, 11);
    const TensorSeries noisy = with_noise(data.series, 2.0, 11);
    IterativeFitOptions opts;
    opts.eps = 1e-300;
    opts.max_iter = 2;
    const FactorFit fit = itipup_fit(noisy, {2, 2}, opts);
    EXPECT_EQ(fit.iterations_used, 2u);
    EXPECT_GE(fit.final_subspace_change, 0.0);
}

TEST(ItipupFit, RejectsNonPositiveTolerance) {
    const auto data = low_rank_series({4, 4}, {2, 2}, 5, 12);
    IterativeFitOptions opts;
    opts.eps = 0.0;
    EXPECT_THROW(itipup_fit(data.series, {2, 2}, opts), ConfigError);
}

TEST(ItipupFit, RefinementDoesNotHurtOnSimulatedData) {
    std::vector<double> tip_err, it_err;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const SimConfig cfg = simulation_config(3, seed);
        const auto draw = gen_covariates(gen_factor_series(cfg), cfg);
        tip_err.push_back(worst_sin_theta(tipup_fit(draw.covariates, cfg.ranks), draw.loadings));
        it_err.push_back(worst_sin_theta(itipup_fit(draw.covariates, cfg.ranks).loadings, draw.loadings));
    }
    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[9] + v[10]);
    };
    EXPECT_LE(med(it_err), med(tip_err));
}

TEST(ExtractFactors, IdentityLoadingsReturnTheSeries) {
    const auto data = low_rank_series({3, 4}, {2, 2}, 5, 13);
    LoadingSet id{{Matrix::identity(3), Matrix::identity(4)}};
    EXPECT_EQ(extract_factors(data.series, id), data.series);
}

TEST(ExtractFactors, ReembeddingIsAnOrthogonalProjection) {
    const auto data = low_rank_series({6, 5, 4}, {2, 2, 2}, 10, 14);
    const TensorSeries noisy = with_noise(data.series, 0.7, 14);
    const LoadingSet est = tipup_fit(noisy, {2, 2, 2});
    const TensorSeries proj = embed_factors(extract_factors(noisy, est), est);
    for (std::size_t t = 0; t < noisy.length(); ++t) {
        const Tensor resid = noisy[t] - proj[t];
        double dot = 0.0;
        for (std::size_t i = 0; i < resid.size(); ++i) dot += resid[i] * proj[t][i];
        EXPECT_LT(std::abs(dot), 1e-10 * frobenius_norm(noisy[t]) * frobenius_norm(noisy[t]));
        EXPECT_LE(frobenius_norm(proj[t]), frobenius_norm(noisy[t]) * (1 + 1e-14));
    }
}

TEST(ExtractFactors, ExactLowRankIsReproduced) {
    const auto data = low_rank_series({6, 5, 4}, {2, 2, 2}, 10, 15);
    const LoadingSet est = tipup_fit(data.series, {2, 2, 2});
    const TensorSeries back = embed_factors(extract_factors(data.series, est), est);
    for (std::size_t t = 0; t < 10; ++t)
        EXPECT_LT(oracle::max_abs_diff(back[t], data.series[t]), 1e-10);
}

TEST(ExtractFactors, RejectsShapeMismatch) {
    const auto data = low_rank_series({6, 5}, {2, 2}, 3, 16);
    LoadingSet wrong{{Matrix::identity(6), Matrix::identity(4)}};
    EXPECT_THROW(extract_factors(data.series, wrong), ShapeError);
}

TEST(SelectRanks, NoiselessMatrixSeries) {
    const auto data = low_rank_series({7, 6}, {2, 2}, 30, 17);
    EXPECT_EQ(select_ranks(data.series, {5, 5}), (Shape{2, 2}));
}

TEST(SelectRanks, HighSnrSimulation) {
    SimConfig cfg = simulation_config(3, 3);
    cfg.lambda_scale = 10.0;
    const auto draw = gen_covariates(gen_factor_series(cfg), cfg);
    EXPECT_EQ(select_ranks(draw.covariates, {6, 3, 6}), (Shape{4, 3, 4}));
}

TEST(SelectRanks, PureNoiseReturnsValidRanks) {
    // Documented behaviour only: small ranks, within bounds.
    TensorSeries noise(Shape{6, 6});
    for (std::size_t t = 0; t < 50; ++t) noise.push_back(oracle::random_tensor({6, 6}, 18, t));
    const Shape r = select_ranks(noise, {4, 4});
    for (auto v : r) {
        EXPECT_GE(v, 1u);
        EXPECT_LE(v, 4u);
    }
}

TEST(SelectRanks, RejectsBoundAboveDimension) {
    const auto data = low_rank_series({4, 4}, {2, 2}, 5, 19);
    EXPECT_THROW(select_ranks(data.series, {5, 2}), ShapeError);
}

TEST(Hosvd, ExactTuckerTensor) {
    Tensor x = oracle::random_tensor({2, 3, 2}, 20);
    std::vector<Matrix> u;
    for (std::size_t k = 0; k < 3; ++k) {
        u.push_back(oracle::gram_schmidt(oracle::random_matrix(5, x.dim(k), 20, k)));
        x = mode_multiply(x, u.back(), k);
    }
    const TuckerDecomp td = hosvd(x, {2, 3, 2});
    EXPECT_LT(oracle::max_abs_diff(td.reconstruct(), x), 1e-10);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_LT(orthonormality_defect(td.factors[k]), 1e-10);
        EXPECT_LT(sin_theta_distance(td.factors[k], u[k]), 1e-8);
    }
}
