#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fattnn {

using Shape = std::vector<std::size_t>;

/// Product of the extents; 1 for the empty (scalar) shape.
std::size_t num_elements(const Shape& shape) noexcept;
std::string to_string(const Shape& shape);

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::vector<double> col(std::size_t j) const;
    void set_col(std::size_t j, std::span<const double> values);

    Matrix transpose() const;
    /// First `n` columns.
    Matrix left_cols(std::size_t n) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// a^T b without forming the transpose.
Matrix transpose_times(const Matrix& a, const Matrix& b);
Matrix kronecker(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m) noexcept;
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Dense order-K tensor, last index fastest in memory.
///
/// The order-0 tensor (empty shape) holds a single scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);

    std::size_t order() const noexcept { return shape_.size(); }
    const Shape& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t mode) const { return shape_.at(mode); }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    double& operator[](std::size_t flat) noexcept { return data_[flat]; }
    double operator[](std::size_t flat) const noexcept { return data_[flat]; }

    std::size_t flat_index(std::span<const std::size_t> index) const;
    double& at(std::initializer_list<std::size_t> index);
    double at(std::initializer_list<std::size_t> index) const;

    Tensor& operator+=(const Tensor& other);
    Tensor& operator-=(const Tensor& other);
    Tensor& operator*=(double s) noexcept;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double s, Tensor a);

/// Mode-k unfolding (0-based mode) into a d_k x prod_{j!=k} d_j matrix.
///
/// Columns enumerate the remaining modes in cyclic order k+1, ..., K-1, 0,
/// ..., k-1 with the first of them varying fastest. For K = 3 this is the
/// classic convention mat_1 column j + d_2 (l - 1) for entry (i, j, l).
Matrix matricize(const Tensor& t, std::size_t mode);
/// Inverse of matricize.
Tensor fold(const Matrix& m, std::size_t mode, const Shape& shape);

/// t x_mode m: replaces extent d_mode by m.rows(); requires m.cols() == d_mode.
Tensor mode_multiply(const Tensor& t, const Matrix& m, std::size_t mode);

/// Same as mode_multiply with m^T, without materialising the transpose.
Tensor mode_multiply_transposed(const Tensor& t, const Matrix& m, std::size_t mode);

struct ModeFactor {
    std::reference_wrapper<const Matrix> matrix;
    std::size_t mode;
};

/// Sequential mode products on distinct modes (order does not matter).
Tensor multi_mode_multiply(const Tensor& t, std::span<const ModeFactor> factors);

/// mat_k(t) mat_k(t)^T, a d_k x d_k Gram matrix.
Matrix mode_gram(const Tensor& t, std::size_t mode);

double frobenius_norm(const Tensor& t) noexcept;

/// Column-major flattening: first index fastest. Equals the columns of
/// matricize(t, 0) stacked left to right.
std::vector<double> vectorize(const Tensor& t);
Tensor unvectorize(std::span<const double> v, const Shape& shape);

/// (a o b)_{i..., j...} = a_{i...} b_{j...}
Tensor outer_product(const Tensor& a, const Tensor& b);

/// sum_r m_{1r} o m_{2r} o ... o m_{Nr} over the shared column count R.
Tensor cp_from_factors(std::span<const Matrix> factors);

/// Contracts the trailing `contracted` modes of a with the leading
/// `contracted` modes of b; result shape is a's leading modes then b's
/// trailing modes.
Tensor contracted_product(const Tensor& a, const Tensor& b, std::size_t contracted);

/// Tucker form core x_1 U_1 ... x_K U_K.
struct TuckerDecomp {
    Tensor core;
    std::vector<Matrix> factors;

    Tensor reconstruct() const;
};

/// Ordered sequence of equally shaped tensors.
class TensorSeries {
public:
    TensorSeries() = default;
    explicit TensorSeries(Shape shape) : shape_(std::move(shape)) {}
    TensorSeries(Shape shape, std::vector<Tensor> slices);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t length() const noexcept { return slices_.size(); }
    bool empty() const noexcept { return slices_.empty(); }
    std::size_t slice_size() const noexcept { return num_elements(shape_); }

    const Tensor& operator[](std::size_t t) const noexcept { return slices_[t]; }
    Tensor& operator[](std::size_t t) noexcept { return slices_[t]; }

    void push_back(Tensor slice);
    /// Time range [begin, end).
    TensorSeries range(std::size_t begin, std::size_t end) const;

    auto begin() const noexcept { return slices_.begin(); }
    auto end() const noexcept { return slices_.end(); }

    /// Time-major matrix, one row per slice, each row in canonical layout.
    Matrix as_rows() const;
    static TensorSeries from_rows(const Matrix& rows, const Shape& shape);

    friend bool operator==(const TensorSeries&, const TensorSeries&) = default;

private:
    Shape shape_;
    std::vector<Tensor> slices_;
};

}  // namespace fattnn
