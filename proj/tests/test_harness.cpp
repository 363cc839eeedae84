#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fattnn/error.hpp"
#include "fattnn/harness.hpp"
#include "fattnn/rng.hpp"
#include "fattnn/simgen.hpp"
#include "oracles.hpp"

using namespace fattnn;

namespace {

TensorSeries series_of(const Shape& shape, std::size_t n, std::uint64_t seed) {
    TensorSeries s(shape);
    for (std::size_t t = 0; t < n; ++t) s.push_back(oracle::random_tensor(shape, seed, t));
    return s;
}

SeriesPair pair_from(const SimDataset& ds) { return {ds.covariates, ds.responses}; }

RunOptions quick_options() {
    RunOptions o;
    o.ranks = Shape{2, 2, 1};
    o.tcn.channels = {8, 8};
    o.tcn.dilations = {1, 2};
    o.tcn.epochs = 30;
    o.bootstrap_replications = 50;
    o.seed = 3;
    return o;
}

SimConfig small_sim(std::uint64_t seed) {
    SimConfig c;
    c.dims = {6, 4, 3};
    c.ranks = {2, 2, 1};
    c.response_dims = {2, 2};
    c.n = 60;
    c.burn_in = 50;
    c.rho = 0.8;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Mse, HandExamples) {
    const TensorSeries a = series_of({2, 3}, 4, 1);
    EXPECT_EQ(mse(a, a), 0.0);

    TensorSeries obs(Shape{1, 1, 1}), pred(Shape{1, 1, 1});
    obs.push_back(Tensor({1, 1, 1}, std::vector<double>{2.0}));
    pred.push_back(Tensor({1, 1, 1}, std::vector<double>{0.0}));
    EXPECT_EQ(mse(obs, pred), 4.0);

    TensorSeries shifted(a.shape());
    for (const auto& x : a) {
        Tensor y = x;
        for (auto& v : y.data()) v += 0.75;
        shifted.push_back(y);
    }
    EXPECT_NEAR(mse(a, shifted), 0.5625, 1e-14);
}

TEST(Mse, MatchesNaiveDoubleLoop) {
    const TensorSeries a = series_of({3, 2, 2}, 9, 2), b = series_of({3, 2, 2}, 9, 3);
    double acc = 0.0;
    for (std::size_t t = 0; t < 9; ++t)
        for (std::size_t i = 0; i < 12; ++i) acc += (a[t][i] - b[t][i]) * (a[t][i] - b[t][i]);
    EXPECT_NEAR(mse(a, b), acc / (9.0 * 12.0), 1e-12);
    const auto e = per_sample_errors(a, b);
    ASSERT_EQ(e.size(), 9u);
    double mean = 0.0;
    for (double v : e) mean += v / 9.0;
    EXPECT_NEAR(mean, mse(a, b), 1e-12);
}

TEST(Mse, RejectsMismatch) {
    EXPECT_THROW(mse(series_of({2}, 3, 1), series_of({2}, 4, 1)), ShapeError);
    EXPECT_THROW(mse(series_of({2}, 3, 1), series_of({3}, 3, 1)), ShapeError);
}

TEST(Bootstrap, ConstantErrorsGiveDegenerateInterval) {
    const std::vector<double> e(17, 2.5);
    const ConfidenceInterval ci = bootstrap_ci(e, 100, 0.95, 4);
    EXPECT_EQ(ci.lo, 2.5);
    EXPECT_EQ(ci.hi, 2.5);
    EXPECT_EQ(ci.replications, 100u);
}

TEST(Bootstrap, ContainsThePointAndIsDeterministic) {
    const CounterRng rng(5);
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::vector<double> e(12);
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = std::exp(2.0 * rng.normal(s, 0, i));
        double mean = 0.0;
        for (double v : e) mean += v / static_cast<double>(e.size());
        const ConfidenceInterval a = bootstrap_ci(e, 100, 0.95, s);
        EXPECT_LE(a.lo, mean);
        EXPECT_GE(a.hi, mean);
        const ConfidenceInterval b = bootstrap_ci(e, 100, 0.95, s);
        EXPECT_EQ(a.lo, b.lo);
        EXPECT_EQ(a.hi, b.hi);
    }
}

TEST(Bootstrap, WidthShrinksWithMoreTestPoints) {
    const CounterRng rng(6);
    std::vector<double> ratio;
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::vector<double> small(30), large(120);
        for (std::size_t i = 0; i < large.size(); ++i) {
            const double z = rng.normal(s, 1, i);
            large[i] = z * z;
            if (i < small.size()) small[i] = large[i];
        }
        const auto a = bootstrap_ci(small, 100, 0.95, s);
        const auto b = bootstrap_ci(large, 100, 0.95, s);
        ratio.push_back((b.hi - b.lo) / (a.hi - a.lo));
    }
    EXPECT_LE(median(ratio), 0.7);
}

TEST(Bootstrap, RejectsBadArguments) {
    const std::vector<double> e{1.0, 2.0};
    EXPECT_THROW(bootstrap_ci(std::vector<double>{}, 10), DataError);
    EXPECT_THROW(bootstrap_ci(e, 0), ConfigError);
    EXPECT_THROW(bootstrap_ci(e, 10, 1.0), ConfigError);
    EXPECT_THROW(bootstrap_ci(e, 10, 0.0), ConfigError);
}

TEST(Split, ContiguousProportions) {
    EXPECT_EQ(train_length(100, 0.7), 70u);
    EXPECT_EQ(train_length(100, 0.8), 80u);
    EXPECT_EQ(train_length(2, 0.5), 1u);
    EXPECT_EQ(train_length(10, 0.75), 8u);

    const SeriesPair data{series_of({2}, 10, 7), series_of({1}, 10, 8)};
    const auto [tr, te] = split(data, 0.7);
    ASSERT_EQ(tr.length(), 7u);
    ASSERT_EQ(te.length(), 3u);
    for (std::size_t t = 0; t < 7; ++t) EXPECT_EQ(tr.covariates[t], data.covariates[t]);
    for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(te.responses[t], data.responses[7 + t]);
}

TEST(Split, RejectsDegenerateSplits) {
    EXPECT_THROW(train_length(100, 0.0), ConfigError);
    EXPECT_THROW(train_length(100, 1.0), ConfigError);
    EXPECT_THROW(train_length(1, 0.5), DataError);
    EXPECT_THROW(train_length(5, 0.99), DataError);
    const SeriesPair bad{series_of({2}, 10, 7), series_of({1}, 9, 8)};
    EXPECT_THROW(split(bad, 0.5), DataError);
}

TEST(Median, EvenAndOdd) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_THROW(median({}), DataError);
}

TEST(RunFattnn, NoiselessLinearResponsesAreForecastAccurately) {
    SimConfig c = small_sim(9);
    c.n = 200;
    c.response_dims = {2};
    c.transform = Transform::identity;
    c.sigma_u2 = 0.0;
    c.covariate_noise_sd = 0.0;
    const SimDataset ds = generate(c);
    RunOptions o = quick_options();
    o.tcn.activation = Activation::linear;
    o.tcn.learning_rate = 1e-2;
    o.tcn.epochs = 3000;
    o.tcn.patience = 0;
    const ExperimentReport r = run_fattnn(pair_from(ds), o);
    EXPECT_EQ(r.n_train, 140u);
    EXPECT_EQ(r.n_test, 60u);
    EXPECT_LT(r.test_mse, 1e-2);
}

TEST(RunFattnn, PoisonedTestRangeFailsOnlyAtForecast) {
    SimDataset ds = generate(small_sim(10));
    for (std::size_t t = 42; t < 60; ++t) ds.covariates[t][0] = std::numeric_limits<double>::quiet_NaN();
    try {
        run_fattnn(pair_from(ds), quick_options());
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("forecast"), std::string::npos) << e.what();
    }
    // Training-range poison is caught before any fitting.
    SimDataset early = generate(small_sim(10));
    early.covariates[5][0] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(run_fattnn(pair_from(early), quick_options()), DataError);
}

TEST(RunFattnn, ReportsAreReproducible) {
    const SeriesPair data = pair_from(generate(small_sim(11)));
    const RunOptions o = quick_options();
    const ExperimentReport a = run_fattnn(data, o), b = run_fattnn(data, o);
    EXPECT_EQ(a.test_mse, b.test_mse);
    EXPECT_EQ(a.ci.lo, b.ci.lo);
    EXPECT_EQ(a.ci.hi, b.ci.hi);
    EXPECT_EQ(a.predictions, b.predictions);
    EXPECT_LE(a.ci.lo, a.test_mse);
    EXPECT_GE(a.ci.hi, a.test_mse);
    EXPECT_EQ(a.input_width, 4u);
    EXPECT_EQ(a.ranks, (Shape{2, 2, 1}));
    EXPECT_EQ(a.predictions.length(), a.n_test);
    EXPECT_EQ(a.predictions.shape(), (Shape{2, 2}));
    EXPECT_NEAR(mse(a.observed, a.predictions), a.test_mse, 1e-12);
}

TEST(RunFattnn, AutomaticRanksStayWithinBounds) {
    SimConfig c = small_sim(12);
    c.lambda_scale = 10.0;
    RunOptions o = quick_options();
    o.ranks.reset();
    o.r_max = {3, 2, 2};
    const ExperimentReport r = run_fattnn(pair_from(generate(c)), o);
    ASSERT_EQ(r.ranks.size(), 3u);
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_GE(r.ranks[k], 1u);
        EXPECT_LE(r.ranks[k], o.r_max[k]);
    }
}

TEST(RawBaseline, UsesFlattenedCovariates) {
    const SeriesPair data = pair_from(generate(small_sim(13)));
    const RunOptions o = quick_options();
    const ExperimentReport a = run_raw_tcn_baseline(data, o), b = run_raw_tcn_baseline(data, o);
    EXPECT_EQ(a.input_width, 6u * 4u * 3u);
    EXPECT_TRUE(a.ranks.empty());
    EXPECT_EQ(a.test_mse, b.test_mse);
    EXPECT_EQ(a.seconds.factorize, 0.0);
}

TEST(RateDiagnostic, CellsCoverTheGrid) {
    const SimConfig base = small_sim(1);
    const std::vector<double> scales{1.0, 4.0};
    const std::vector<std::size_t> ns{40, 80};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto cells = rate_diagnostic(base, scales, ns, seeds);
    ASSERT_EQ(cells.size(), 4u);
    for (const auto& cell : cells) {
        EXPECT_EQ(cell.errors.size(), 3u);
        EXPECT_EQ(cell.median_error, median(cell.errors));
        for (double e : cell.errors) {
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, 1.0 + 1e-12);
        }
    }
}
