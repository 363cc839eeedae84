#include "fattnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fattnn/error.hpp"

namespace fattnn {

namespace {

// Splits a last-index-fastest tensor around `mode` into (outer, extent, inner).
struct ModeView {
    std::size_t outer = 1;
    std::size_t extent = 1;
    std::size_t inner = 1;
};

ModeView mode_view(const Shape& shape, std::size_t mode) {
    if (mode >= shape.size()) {
        throw ShapeError("mode " + std::to_string(mode) + " out of range for order-" +
                         std::to_string(shape.size()) + " tensor");
    }
    ModeView v;
    for (std::size_t j = 0; j < mode; ++j) v.outer *= shape[j];
    v.extent = shape[mode];
    for (std::size_t j = mode + 1; j < shape.size(); ++j) v.inner *= shape[j];
    return v;
}

void check_positive(const Shape& shape) {
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor extents must be positive: " + to_string(shape));
    }
}

// Column stride of every mode inside mat_k; the unfolded mode gets 0.
std::vector<std::size_t> unfolding_strides(const Shape& shape, std::size_t mode) {
    const std::size_t order = shape.size();
    std::vector<std::size_t> stride(order, 0);
    std::size_t s = 1;
    for (std::size_t step = 1; step < order; ++step) {
        const std::size_t m = (mode + step) % order;
        stride[m] = s;
        s *= shape[m];
    }
    return stride;
}

// Advances a last-index-fastest multi-index; returns false after the last one.
bool next_index(std::vector<std::size_t>& idx, const Shape& shape) {
    for (std::size_t j = shape.size(); j-- > 0;) {
        if (++idx[j] < shape[j]) return true;
        idx[j] = 0;
    }
    return false;
}

}  // namespace

std::size_t num_elements(const Shape& shape) noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ')';
    return os.str();
}

// ---------------------------------------------------------------- Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged matrix initializer");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::col(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

void Matrix::set_col(std::size_t j, std::span<const double> values) {
    if (values.size() != rows_) throw ShapeError("set_col length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix Matrix::left_cols(std::size_t n) const {
    if (n > cols_) throw ShapeError("left_cols beyond column count");
    Matrix out(rows_, n);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = (*this)(i, j);
    return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix transpose_times(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("transpose_times: row count mismatch");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            auto crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix add mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix sub mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (auto& x : c.data()) x *= s;
    return c;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    k(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
        }
    return k;
}

double frobenius_norm(const Matrix& m) noexcept {
    double s = 0.0;
    for (double x : m.data()) s += x * x;
    return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_abs_diff mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_positive(shape_);
    data_.assign(num_elements(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_positive(shape_);
    if (data_.size() != num_elements(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + to_string(shape_));
    }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

std::size_t Tensor::flat_index(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) throw ShapeError("index order mismatch");
    std::size_t flat = 0;
    for (std::size_t j = 0; j < shape_.size(); ++j) {
        if (index[j] >= shape_[j]) throw ShapeError("index out of range");
        flat = flat * shape_[j] + index[j];
    }
    return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
    return data_[flat_index({index.begin(), index.size()})];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    return data_[flat_index({index.begin(), index.size()})];
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.shape_ != shape_) throw ShapeError("tensor add shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
    if (other.shape_ != shape_) throw ShapeError("tensor sub shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Tensor& Tensor::operator*=(double s) noexcept {
    for (auto& x : data_) x *= s;
    return *this;
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double s, Tensor a) { return a *= s; }

// ------------------------------------------------------- multilinear ops

Matrix matricize(const Tensor& t, std::size_t mode) {
    const auto& shape = t.shape();
    mode_view(shape, mode);
    const auto stride = unfolding_strides(shape, mode);
    const std::size_t d = shape[mode];
    Matrix m(d, t.size() / d);

    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t flat = 0;
    do {
        std::size_t col = 0;
        for (std::size_t j = 0; j < shape.size(); ++j) col += idx[j] * stride[j];
        m(idx[mode], col) = t[flat++];
    } while (next_index(idx, shape));
    return m;
}

Tensor fold(const Matrix& m, std::size_t mode, const Shape& shape) {
    mode_view(shape, mode);
    if (m.rows() != shape[mode] || m.size() != num_elements(shape)) {
        throw ShapeError("fold: matrix does not match shape " + to_string(shape));
    }
    const auto stride = unfolding_strides(shape, mode);
    Tensor t(shape);
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t flat = 0;
    do {
        std::size_t col = 0;
        for (std::size_t j = 0; j < shape.size(); ++j) col += idx[j] * stride[j];
        t[flat++] = m(idx[mode], col);
    } while (next_index(idx, shape));
    return t;
}

Tensor mode_multiply(const Tensor& t, const Matrix& m, std::size_t mode) {
    const auto v = mode_view(t.shape(), mode);
    if (m.cols() != v.extent) {
        throw ShapeError("mode_multiply: matrix has " + std::to_string(m.cols()) +
                         " columns but mode " + std::to_string(mode) + " has extent " +
                         std::to_string(v.extent));
    }
    Shape out_shape = t.shape();
    out_shape[mode] = m.rows();
    Tensor out(out_shape);
    const std::size_t rows = m.rows();
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = t.data().data() + o * v.extent * v.inner;
        double* dst = out.data().data() + o * rows * v.inner;
        for (std::size_t j = 0; j < rows; ++j) {
            double* drow = dst + j * v.inner;
            for (std::size_t i = 0; i < v.extent; ++i) {
                const double w = m(j, i);
                const double* srow = src + i * v.inner;
                for (std::size_t p = 0; p < v.inner; ++p) drow[p] += w * srow[p];
            }
        }
    }
    return out;
}

Tensor mode_multiply_transposed(const Tensor& t, const Matrix& m, std::size_t mode) {
    const auto v = mode_view(t.shape(), mode);
    if (m.rows() != v.extent) {
        throw ShapeError("mode_multiply_transposed: matrix has " + std::to_string(m.rows()) +
                         " rows but mode " + std::to_string(mode) + " has extent " +
                         std::to_string(v.extent));
    }
    Shape out_shape = t.shape();
    out_shape[mode] = m.cols();
    Tensor out(out_shape);
    const std::size_t cols = m.cols();
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* src = t.data().data() + o * v.extent * v.inner;
        double* dst = out.data().data() + o * cols * v.inner;
        for (std::size_t i = 0; i < v.extent; ++i) {
            const double* srow = src + i * v.inner;
            for (std::size_t j = 0; j < cols; ++j) {
                const double w = m(i, j);
                double* drow = dst + j * v.inner;
                for (std::size_t p = 0; p < v.inner; ++p) drow[p] += w * srow[p];
            }
        }
    }
    return out;
}

Tensor multi_mode_multiply(const Tensor& t, std::span<const ModeFactor> factors) {
    std::vector<bool> seen(t.order(), false);
    for (const auto& f : factors) {
        if (f.mode >= t.order()) throw ShapeError("multi_mode_multiply: mode out of range");
        if (seen[f.mode]) {
            throw ShapeError("multi_mode_multiply: repeated mode " + std::to_string(f.mode));
        }
        seen[f.mode] = true;
    }
    Tensor out = t;
    for (const auto& f : factors) out = mode_multiply(out, f.matrix.get(), f.mode);
    return out;
}

Matrix mode_gram(const Tensor& t, std::size_t mode) {
    const auto v = mode_view(t.shape(), mode);
    Matrix g(v.extent, v.extent);
    for (std::size_t o = 0; o < v.outer; ++o) {
        const double* base = t.data().data() + o * v.extent * v.inner;
        for (std::size_t a = 0; a < v.extent; ++a) {
            const double* ra = base + a * v.inner;
            for (std::size_t b = a; b < v.extent; ++b) {
                const double* rb = base + b * v.inner;
                double s = 0.0;
                for (std::size_t p = 0; p < v.inner; ++p) s += ra[p] * rb[p];
                g(a, b) += s;
            }
        }
    }
    for (std::size_t a = 0; a < v.extent; ++a)
        for (std::size_t b = 0; b < a; ++b) g(a, b) = g(b, a);
    return g;
}

double frobenius_norm(const Tensor& t) noexcept {
    double s = 0.0;
    for (double x : t.data()) s += x * x;
    return std::sqrt(s);
}

std::vector<double> vectorize(const Tensor& t) {
    const auto& shape = t.shape();
    std::vector<double> v(t.size());
    if (shape.empty()) {
        v[0] = t[0];
        return v;
    }
    // Column-major position of each canonical entry.
    std::vector<std::size_t> cm_stride(shape.size());
    std::size_t s = 1;
    for (std::size_t j = 0; j < shape.size(); ++j) {
        cm_stride[j] = s;
        s *= shape[j];
    }
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t flat = 0;
    do {
        std::size_t pos = 0;
        for (std::size_t j = 0; j < shape.size(); ++j) pos += idx[j] * cm_stride[j];
        v[pos] = t[flat++];
    } while (next_index(idx, shape));
    return v;
}

Tensor unvectorize(std::span<const double> v, const Shape& shape) {
    if (v.size() != num_elements(shape)) throw ShapeError("unvectorize: length mismatch");
    Tensor t(shape);
    if (shape.empty()) {
        t[0] = v[0];
        return t;
    }
    std::vector<std::size_t> cm_stride(shape.size());
    std::size_t s = 1;
    for (std::size_t j = 0; j < shape.size(); ++j) {
        cm_stride[j] = s;
        s *= shape[j];
    }
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t flat = 0;
    do {
        std::size_t pos = 0;
        for (std::size_t j = 0; j < shape.size(); ++j) pos += idx[j] * cm_stride[j];
        t[flat++] = v[pos];
    } while (next_index(idx, shape));
    return t;
}

Tensor outer_product(const Tensor& a, const Tensor& b) {
    Shape shape = a.shape();
    shape.insert(shape.end(), b.shape().begin(), b.shape().end());
    Tensor out(shape);
    std::size_t flat = 0;
    for (double x : a.data())
        for (double y : b.data()) out[flat++] = x * y;
    return out;
}

Tensor cp_from_factors(std::span<const Matrix> factors) {
    if (factors.empty()) throw ShapeError("cp_from_factors: no factor matrices");
    const std::size_t rank = factors.front().cols();
    Shape shape;
    for (const auto& m : factors) {
        if (m.cols() != rank) {
            throw ShapeError("cp_from_factors: column counts differ (" + std::to_string(rank) +
                             " vs " + std::to_string(m.cols()) + ")");
        }
        shape.push_back(m.rows());
    }
    Tensor out(shape);
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t flat = 0;
    do {
        double s = 0.0;
        for (std::size_t r = 0; r < rank; ++r) {
            double p = 1.0;
            for (std::size_t k = 0; k < factors.size(); ++k) p *= factors[k](idx[k], r);
            s += p;
        }
        out[flat++] = s;
    } while (next_index(idx, shape));
    return out;
}

Tensor contracted_product(const Tensor& a, const Tensor& b, std::size_t contracted) {
    if (contracted > a.order() || contracted > b.order()) {
        throw ShapeError("contracted_product: contraction order exceeds tensor order");
    }
    const std::size_t lead = a.order() - contracted;
    for (std::size_t j = 0; j < contracted; ++j) {
        if (a.shape()[lead + j] != b.shape()[j]) {
            throw ShapeError("contracted_product: trailing modes of " + to_string(a.shape()) +
                             " do not match leading modes of " + to_string(b.shape()));
        }
    }
    Shape out_shape(a.shape().begin(), a.shape().begin() + static_cast<std::ptrdiff_t>(lead));
    out_shape.insert(out_shape.end(), b.shape().begin() + static_cast<std::ptrdiff_t>(contracted),
                     b.shape().end());

    // Canonical layout makes both operands row-major matrices.
    Shape inner(b.shape().begin(), b.shape().begin() + static_cast<std::ptrdiff_t>(contracted));
    const std::size_t inner_n = num_elements(inner);
    const std::size_t rows = a.size() / inner_n;
    const std::size_t cols = b.size() / inner_n;
    Tensor out(out_shape);
    for (std::size_t i = 0; i < rows; ++i) {
        double* orow = out.data().data() + i * cols;
        for (std::size_t l = 0; l < inner_n; ++l) {
            const double w = a[i * inner_n + l];
            if (w == 0.0) continue;
            const double* brow = b.data().data() + l * cols;
            for (std::size_t j = 0; j < cols; ++j) orow[j] += w * brow[j];
        }
    }
    return out;
}

Tensor TuckerDecomp::reconstruct() const {
    if (factors.size() != core.order()) throw ShapeError("Tucker: factor count != core order");
    Tensor out = core;
    for (std::size_t k = 0; k < factors.size(); ++k) out = mode_multiply(out, factors[k], k);
    return out;
}

// ---------------------------------------------------------- TensorSeries

TensorSeries::TensorSeries(Shape shape, std::vector<Tensor> slices)
    : shape_(std::move(shape)), slices_(std::move(slices)) {
    for (const auto& s : slices_) {
        if (s.shape() != shape_) {
            throw ShapeError("series slice shape " + to_string(s.shape()) + " != " +
                             to_string(shape_));
        }
    }
}

void TensorSeries::push_back(Tensor slice) {
    if (slice.shape() != shape_) {
        throw ShapeError("series slice shape " + to_string(slice.shape()) + " != " +
                         to_string(shape_));
    }
    slices_.push_back(std::move(slice));
}

TensorSeries TensorSeries::range(std::size_t begin, std::size_t end) const {
    if (begin > end || end > slices_.size()) throw ShapeError("series range out of bounds");
    return TensorSeries(shape_, std::vector<Tensor>(slices_.begin() + static_cast<std::ptrdiff_t>(begin),
                                                    slices_.begin() + static_cast<std::ptrdiff_t>(end)));
}

Matrix TensorSeries::as_rows() const {
    const std::size_t w = slice_size();
    Matrix m(slices_.size(), w);
    for (std::size_t t = 0; t < slices_.size(); ++t)
        std::copy(slices_[t].data().begin(), slices_[t].data().end(), m.row(t).begin());
    return m;
}

TensorSeries TensorSeries::from_rows(const Matrix& rows, const Shape& shape) {
    if (rows.cols() != num_elements(shape)) throw ShapeError("from_rows: width mismatch");
    TensorSeries s(shape);
    for (std::size_t t = 0; t < rows.rows(); ++t) {
        auto r = rows.row(t);
        s.push_back(Tensor(shape, std::vector<double>(r.begin(), r.end())));
    }
    return s;
}

}  // namespace fattnn
