#include <gtest/gtest.h>

#include <cmath>

#include "fattnn/error.hpp"
#include "fattnn/spectral.hpp"
#include "fattnn/tensor.hpp"
#include "oracles.hpp"

using namespace fattnn;

namespace {

Tensor iota_tensor(const Shape& s) {
    Tensor t(s);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    return t;
}

}  // namespace

TEST(Matricize, AppendixExampleRowOne) {
    // A_ijk = 4(i-1) + 2(j-1) + (k-1); column j + 2(k-1).
    Tensor a({2, 2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t k = 0; k < 2; ++k) a.at({i, j, k}) = 4.0 * i + 2.0 * j + k;
    const Matrix m = matricize(a, 0);
    ASSERT_EQ(m.rows(), 2u);
    ASSERT_EQ(m.cols(), 4u);
    EXPECT_EQ(std::vector<double>(m.row(0).begin(), m.row(0).end()),
              (std::vector<double>{0, 2, 1, 3}));
}

TEST(Matricize, OrderOneIsAColumn) {
    const Tensor v({3}, std::vector<double>{1, 2, 3});
    const Matrix m = matricize(v, 0);
    EXPECT_EQ(m.rows(), 3u);
    EXPECT_EQ(m.cols(), 1u);
    EXPECT_EQ(m(2, 0), 3.0);
}

TEST(Matricize, PreservesFrobeniusNorm) {
    const Tensor t = oracle::random_tensor({3, 4, 5}, 11);
    double direct = 0.0;
    for (double x : t.data()) direct += x * x;
    direct = std::sqrt(direct);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(frobenius_norm(matricize(t, k)), direct, 1e-12);
}

TEST(Matricize, FourWayCyclicOrderGolden) {
    // Mode 1 of a 2x3x2x2 tensor: columns run over modes 2, 3, 0 with mode 2 fastest.
    const Tensor t = iota_tensor({2, 3, 2, 2});
    const Matrix m = matricize(t, 1);
    ASSERT_EQ(m.rows(), 3u);
    ASSERT_EQ(m.cols(), 8u);
    // Entry (i0, i1, i2, i3) sits at row i1, column i2 + 2 i3 + 4 i0.
    EXPECT_EQ(m(1, 0), t.at({0, 1, 0, 0}));
    EXPECT_EQ(m(1, 1), t.at({0, 1, 1, 0}));
    EXPECT_EQ(m(1, 2), t.at({0, 1, 0, 1}));
    EXPECT_EQ(m(2, 5), t.at({1, 2, 1, 0}));
    EXPECT_EQ(m(0, 7), t.at({1, 0, 1, 1}));
}

TEST(Matricize, MatchesOracleAndFoldsBack) {
    CounterRng rng(5);
    for (std::uint64_t draw = 0; draw < 50; ++draw) {
        const Shape s = oracle::random_shape(rng, draw, 5, 64);
        const Tensor t = oracle::random_tensor(s, draw);
        for (std::size_t k = 0; k < s.size(); ++k) {
            const Matrix m = matricize(t, k);
            EXPECT_EQ(m, oracle::matricize(t, k));
            EXPECT_EQ(fold(m, k, s), t);
        }
    }
}

TEST(Matricize, RejectsBadMode) {
    EXPECT_THROW(matricize(Tensor({2, 2}), 2), ShapeError);
}

TEST(ModeMultiply, IdentityIsNoOp) {
    const Tensor t = oracle::random_tensor({3, 2, 4}, 3);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(mode_multiply(t, Matrix::identity(t.dim(k)), k), t);
}

TEST(ModeMultiply, MatrixCaseIsAXBt) {
    const Tensor x = oracle::random_tensor({3, 4}, 1);
    const Matrix a = oracle::random_matrix(2, 3, 2);
    const Matrix b = oracle::random_matrix(5, 4, 3);
    const Tensor got = mode_multiply(mode_multiply(x, a, 0), b, 1);
    Matrix xm(3, 4, std::vector<double>(x.data().begin(), x.data().end()));
    const Matrix want = a * xm * b.transpose();
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(got.at({i, j}), want(i, j), 1e-12);
}

TEST(ModeMultiply, DistinctModesCommute) {
    const Tensor t = oracle::random_tensor({3, 3, 3}, 9);
    const Matrix a = oracle::random_matrix(3, 3, 1);
    const Matrix b = oracle::random_matrix(3, 3, 2);
    const Tensor ab = mode_multiply(mode_multiply(t, a, 0), b, 1);
    const Tensor ba = mode_multiply(mode_multiply(t, b, 1), a, 0);
    EXPECT_LT(oracle::max_abs_diff(ab, ba), 1e-12);
}

TEST(ModeMultiply, UnfoldingIdentityAndOracle) {
    CounterRng rng(6);
    for (std::uint64_t draw = 0; draw < 50; ++draw) {
        const Shape s = oracle::random_shape(rng, draw, 4, 64);
        const Tensor t = oracle::random_tensor(s, draw);
        for (std::size_t k = 0; k < s.size(); ++k) {
            const Matrix a = oracle::random_matrix(1 + draw % 3, s[k], draw, k);
            const Tensor got = mode_multiply(t, a, k);
            EXPECT_LT(oracle::max_abs_diff(got, oracle::mode_multiply(t, a, k)), 1e-12);
            EXPECT_LT(max_abs_diff(matricize(got, k), a * matricize(t, k)), 1e-12);
            EXPECT_LT(oracle::max_abs_diff(mode_multiply_transposed(t, a.transpose(), k), got), 1e-12);
        }
    }
}

TEST(ModeMultiply, RejectsMismatch) {
    EXPECT_THROW(mode_multiply(Tensor({2, 3}), Matrix(2, 2), 1), ShapeError);
    EXPECT_THROW(mode_multiply_transposed(Tensor({2, 3}), Matrix(2, 2), 1), ShapeError);
}

TEST(MultiModeMultiply, EmptyAndIdentity) {
    const Tensor t = oracle::random_tensor({2, 3, 4}, 4);
    EXPECT_EQ(multi_mode_multiply(t, {}), t);
    const Matrix i2 = Matrix::identity(2), i3 = Matrix::identity(3), i4 = Matrix::identity(4);
    const std::vector<ModeFactor> ids{{i2, 0}, {i3, 1}, {i4, 2}};
    EXPECT_EQ(multi_mode_multiply(t, ids), t);
}

TEST(MultiModeMultiply, OrderDoesNotMatter) {
    const Tensor t = oracle::random_tensor({2, 3, 4}, 8);
    const Matrix a = oracle::random_matrix(3, 2, 1), b = oracle::random_matrix(2, 3, 2),
                 c = oracle::random_matrix(5, 4, 3);
    const std::vector<ModeFactor> f1{{a, 0}, {b, 1}, {c, 2}};
    const std::vector<ModeFactor> f2{{c, 2}, {a, 0}, {b, 1}};
    const Tensor seq = oracle::mode_multiply(
        oracle::mode_multiply(oracle::mode_multiply(t, a, 0), b, 1), c, 2);
    EXPECT_LT(oracle::max_abs_diff(multi_mode_multiply(t, f1), seq), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(multi_mode_multiply(t, f2), seq), 1e-12);
}

TEST(MultiModeMultiply, RejectsRepeatedMode) {
    const Matrix i2 = Matrix::identity(2);
    const std::vector<ModeFactor> twice{{i2, 0}, {i2, 0}};
    EXPECT_THROW(multi_mode_multiply(Tensor({2, 2}), twice), ShapeError);
}

TEST(FrobeniusNorm, Basics) {
    EXPECT_EQ(frobenius_norm(Tensor({3, 3})), 0.0);
    Tensor hot({2, 3, 2});
    hot.at({1, 2, 0}) = 1.0;
    EXPECT_EQ(frobenius_norm(hot), 1.0);
    const Tensor t = oracle::random_tensor({4, 4, 4}, 2);
    double s = 0.0;
    for (double x : t.data()) s += x * x;
    EXPECT_NEAR(frobenius_norm(t), std::sqrt(s), 1e-12);
}

TEST(Vectorize, DocumentedOrdering) {
    const Tensor m({2, 2}, std::vector<double>{1, 2, 3, 4});
    EXPECT_EQ(vectorize(m), (std::vector<double>{1, 3, 2, 4}));
    const Tensor v({3}, std::vector<double>{5, 6, 7});
    EXPECT_EQ(vectorize(v), (std::vector<double>{5, 6, 7}));
}

TEST(Vectorize, EqualsStackedModeOneColumnsAndRoundTrips) {
    const Tensor t = oracle::random_tensor({3, 2, 4}, 7);
    const auto v = vectorize(t);
    const Matrix m = matricize(t, 0);
    for (std::size_t c = 0; c < m.cols(); ++c)
        for (std::size_t r = 0; r < m.rows(); ++r) EXPECT_EQ(v[c * m.rows() + r], m(r, c));
    EXPECT_EQ(unvectorize(v, t.shape()), t);
}

TEST(Kronecker, IdentityGivesBlockDiagonal) {
    const Matrix b = Matrix::from_rows({{1, 2}, {3, 4}});
    const Matrix k = kronecker(Matrix::identity(2), b);
    const Matrix want = Matrix::from_rows({{1, 2, 0, 0}, {3, 4, 0, 0}, {0, 0, 1, 2}, {0, 0, 3, 4}});
    EXPECT_EQ(k, want);
}

TEST(Kronecker, MixedProduct) {
    const Matrix a = oracle::random_matrix(2, 2, 1), b = oracle::random_matrix(2, 2, 2),
                 c = oracle::random_matrix(2, 2, 3), d = oracle::random_matrix(2, 2, 4);
    EXPECT_LT(max_abs_diff(kronecker(a, b) * kronecker(c, d), kronecker(a * c, b * d)), 1e-12);
}

TEST(Kronecker, OrthonormalFactorsGiveUnitSingularValues) {
    const Matrix q1 = qr_orthonormalize(oracle::random_matrix(3, 3, 5));
    const Matrix q2 = qr_orthonormalize(oracle::random_matrix(2, 2, 6));
    for (double s : singular_values(kronecker(q1, q2))) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(OuterProduct, ScalarUnitAndNorms) {
    const Tensor a = oracle::random_tensor({2, 3}, 1);
    EXPECT_EQ(outer_product(a, Tensor::scalar(1.0)), a);
    const Tensor b = oracle::random_tensor({4}, 2);
    const Tensor ab = outer_product(a, b);
    EXPECT_EQ(ab.shape(), (Shape{2, 3, 4}));
    EXPECT_NEAR(frobenius_norm(ab), frobenius_norm(a) * frobenius_norm(b), 1e-12);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 4; ++k)
                EXPECT_EQ(ab.at({i, j, k}), a.at({i, j}) * b.at({k}));
}

TEST(OuterProduct, VectorsMatchKronecker) {
    const Tensor u = oracle::random_tensor({3}, 1), v = oracle::random_tensor({2}, 2);
    const Matrix ku = kronecker(Matrix(3, 1, std::vector<double>(u.data().begin(), u.data().end())),
                                Matrix(2, 1, std::vector<double>(v.data().begin(), v.data().end())));
    const Tensor uv = outer_product(u, v);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(uv[i], ku(i, 0));
}

TEST(CpFromFactors, RankOneIsOuterProduct) {
    const Matrix a = oracle::random_matrix(2, 1, 1), b = oracle::random_matrix(3, 1, 2);
    const std::vector<Matrix> ms{a, b};
    const Tensor t = cp_from_factors(ms);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t.at({i, j}), a(i, 0) * b(j, 0));
}

TEST(CpFromFactors, RankAdditivityAndLinearity) {
    const Matrix a = oracle::random_matrix(3, 2, 1), b = oracle::random_matrix(2, 2, 2),
                 c = oracle::random_matrix(4, 2, 3);
    const std::vector<Matrix> both{a, b, c};
    std::vector<Matrix> first, second;
    for (const Matrix* m : {&a, &b, &c}) {
        first.push_back(Matrix(m->rows(), 1, m->col(0)));
        second.push_back(Matrix(m->rows(), 1, m->col(1)));
    }
    EXPECT_LT(oracle::max_abs_diff(cp_from_factors(both), cp_from_factors(first) + cp_from_factors(second)),
              1e-12);
    const std::vector<Matrix> scaled{2.5 * a, b, c};
    EXPECT_LT(oracle::max_abs_diff(cp_from_factors(scaled), 2.5 * cp_from_factors(both)), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(cp_from_factors(both), oracle::cp(both)), 1e-12);
}

TEST(CpFromFactors, SixColumnCoefficientShape) {
    std::vector<Matrix> ms;
    for (std::size_t d : {4, 3, 4, 3, 3, 3}) ms.push_back(oracle::random_matrix(d, 6, d));
    EXPECT_EQ(cp_from_factors(ms).shape(), (Shape{4, 3, 4, 3, 3, 3}));
}

TEST(CpFromFactors, RejectsColumnMismatch) {
    const std::vector<Matrix> ms{Matrix(2, 2), Matrix(2, 3)};
    EXPECT_THROW(cp_from_factors(ms), ShapeError);
}

TEST(ContractedProduct, DeltaCoreReproduces) {
    const Tensor a = oracle::random_tensor({3, 2, 2}, 1);
    Tensor delta({2, 2, 2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) delta.at({i, j, i, j}) = 1.0;
    EXPECT_EQ(contracted_product(a, delta, 2), a);
}

TEST(ContractedProduct, SingleModeIsMatrixProduct) {
    const Matrix a = oracle::random_matrix(3, 4, 1), b = oracle::random_matrix(4, 2, 2);
    const Tensor ta({3, 4}, std::vector<double>(a.data().begin(), a.data().end()));
    const Tensor tb({4, 2}, std::vector<double>(b.data().begin(), b.data().end()));
    const Tensor got = contracted_product(ta, tb, 1);
    const Matrix want = a * b;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(got.at({i, j}), want(i, j), 1e-12);
}

TEST(ContractedProduct, MatchesNestedLoops) {
    const Tensor a = oracle::random_tensor({2, 2, 2, 2}, 3);
    const Tensor b = oracle::random_tensor({2, 2, 2, 2}, 4);
    const Tensor got = contracted_product(a, b, 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            for (std::size_t p = 0; p < 2; ++p)
                for (std::size_t q = 0; q < 2; ++q) {
                    double acc = 0.0;
                    for (std::size_t l1 = 0; l1 < 2; ++l1)
                        for (std::size_t l2 = 0; l2 < 2; ++l2)
                            acc += a.at({i, j, l1, l2}) * b.at({l1, l2, p, q});
                    worst = std::max(worst, std::abs(acc - got.at({i, j, p, q})));
                }
    EXPECT_LT(worst, 1e-12);
}

TEST(ContractedProduct, RejectsShapeMismatch) {
    EXPECT_THROW(contracted_product(Tensor({2, 3}), Tensor({2, 3}), 1), ShapeError);
}

TEST(Tensor, RejectsZeroExtentAndWrongDataLength) {
    EXPECT_THROW(Tensor({2, 0}), ShapeError);
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), ShapeError);
}

TEST(TuckerDecomp, ReconstructShape) {
    TuckerDecomp td{oracle::random_tensor({2, 2}, 1),
                    {qr_orthonormalize(oracle::random_matrix(5, 2, 1)),
                     qr_orthonormalize(oracle::random_matrix(4, 2, 2))}};
    EXPECT_EQ(td.reconstruct().shape(), (Shape{5, 4}));
}

TEST(TensorSeries, ShapeChecksRangesAndRows) {
    TensorSeries s(Shape{2, 2});
    for (int t = 0; t < 5; ++t) s.push_back(oracle::random_tensor({2, 2}, 1, t));
    EXPECT_THROW(s.push_back(Tensor({3})), ShapeError);
    const TensorSeries mid = s.range(1, 4);
    EXPECT_EQ(mid.length(), 3u);
    EXPECT_EQ(mid[0], s[1]);
    EXPECT_THROW(s.range(3, 6), ShapeError);
    const Matrix rows = s.as_rows();
    EXPECT_EQ(rows.rows(), 5u);
    EXPECT_EQ(rows.cols(), 4u);
    EXPECT_EQ(TensorSeries::from_rows(rows, {2, 2}), s);
}
