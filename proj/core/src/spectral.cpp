#include "fattnn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fattnn/error.hpp"

namespace fattnn {

namespace {

constexpr double kRotateThreshold = 1e-15;
constexpr double kConvergedOffDiagonal = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void rotate_rows(Matrix& m, std::size_t i, std::size_t j, double c, double s) {
    auto ri = m.row(i);
    auto rj = m.row(j);
    for (std::size_t p = 0; p < ri.size(); ++p) {
        const double a = ri[p];
        const double b = rj[p];
        ri[p] = c * a - s * b;
        rj[p] = s * a + c * b;
    }
}

std::size_t sweep_budget(const Matrix& m) { return 10 * std::max(m.rows(), m.cols()); }

}  // namespace

SvdResult jacobi_svd(const Matrix& m) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    if (rows == 0 || cols == 0) throw ShapeError("jacobi_svd: empty matrix");
    if (rows > cols) {
        // More rows than the row space can hold orthogonally; factor the
        // transpose so the rotated set is the smaller one.
        SvdResult t = jacobi_svd(m.transpose());
        return SvdResult{std::move(t.v), std::move(t.singular_values), std::move(t.u)};
    }

    Matrix w = m;                        // rows are rotated until mutually orthogonal
    Matrix ut = Matrix::identity(rows);  // row i of ut is column i of U

    const std::size_t budget = sweep_budget(m);
    bool converged = false;
    double worst = 0.0;
    for (std::size_t sweep = 0; sweep < budget && !converged; ++sweep) {
        worst = 0.0;
        for (std::size_t i = 0; i + 1 < rows; ++i) {
            for (std::size_t j = i + 1; j < rows; ++j) {
                const double alpha = dot(w.row(i), w.row(i));
                const double beta = dot(w.row(j), w.row(j));
                const double gamma = dot(w.row(i), w.row(j));
                const double scale = std::sqrt(alpha) * std::sqrt(beta);
                if (scale == 0.0 || gamma == 0.0) continue;
                const double rel = std::abs(gamma) / scale;
                worst = std::max(worst, rel);
                if (rel <= kRotateThreshold) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate_rows(w, i, j, c, s);
                rotate_rows(ut, i, j, c, s);
            }
        }
        converged = worst <= kConvergedOffDiagonal;
    }
    if (!converged) {
        std::ostringstream os;
        os << "jacobi_svd: no convergence after " << budget << " sweeps on " << rows << "x"
           << cols << " matrix (max relative off-diagonal " << worst << ")";
        throw NumericalError(os.str());
    }

    std::vector<double> norms(rows);
    for (std::size_t i = 0; i < rows; ++i) norms[i] = std::sqrt(dot(w.row(i), w.row(i)));
    std::vector<std::size_t> order(rows);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    const std::size_t r = std::min(rows, cols);
    SvdResult out{Matrix(rows, r), std::vector<double>(r), Matrix(cols, r)};
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t src = order[k];
        out.singular_values[k] = norms[src];
        auto urow = ut.row(src);
        for (std::size_t p = 0; p < rows; ++p) out.u(p, k) = urow[p];
    }

    // Right vectors from normalised rows; zero singular values get an
    // orthonormal completion by Gram-Schmidt over the standard basis.
    const double cutoff = (norms[order[0]] > 0.0 ? norms[order[0]] : 1.0) * 1e-300;
    std::size_t next_basis = 0;
    for (std::size_t k = 0; k < r; ++k) {
        std::vector<double> v(cols);
        const double sigma = out.singular_values[k];
        if (sigma > cutoff) {
            auto wrow = w.row(order[k]);
            for (std::size_t p = 0; p < cols; ++p) v[p] = wrow[p] / sigma;
        } else {
            for (;;) {
                std::fill(v.begin(), v.end(), 0.0);
                v[next_basis++ % cols] = 1.0;
                for (int pass = 0; pass < 2; ++pass)
                    for (std::size_t q = 0; q < k; ++q) {
                        double proj = 0.0;
                        for (std::size_t p = 0; p < cols; ++p) proj += out.v(p, q) * v[p];
                        for (std::size_t p = 0; p < cols; ++p) v[p] -= proj * out.v(p, q);
                    }
                const double nv = std::sqrt(dot(v, v));
                if (nv > 1e-8) {
                    for (auto& x : v) x /= nv;
                    break;
                }
            }
        }
        out.v.set_col(k, v);
    }
    return out;
}

std::vector<double> singular_values(const Matrix& m) { return jacobi_svd(m).singular_values; }

SymmetricEigen symmetric_eigen(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n == 0 || m.cols() != n) throw ShapeError("symmetric_eigen: matrix must be square");
    Matrix a = m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            const double avg = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = a(j, i) = avg;
        }
    Matrix vt = Matrix::identity(n);  // row i of vt is eigenvector i

    const double norm = frobenius_norm(a);
    const std::size_t budget = sweep_budget(m);
    bool converged = false;
    double off = 0.0;
    for (std::size_t sweep = 0; sweep <= budget; ++sweep) {
        off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
        off = std::sqrt(off);
        if (off <= kConvergedOffDiagonal * norm || off == 0.0) {
            converged = true;
            break;
        }
        if (sweep == budget) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                // A <- J^T A J with J acting on (p, q).
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                rotate_rows(vt, p, q, c, s);
            }
        }
    }
    if (!converged) {
        std::ostringstream os;
        os << "symmetric_eigen: no convergence after " << budget << " sweeps (off-diagonal "
           << off << ", norm " << norm << ")";
        throw NumericalError(os.str());
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        out.vectors.set_col(k, vt.row(order[k]));
    }
    return out;
}

Matrix top_left_singular_vectors(const Matrix& m, std::size_t r) {
    if (r == 0 || r > std::min(m.rows(), m.cols())) {
        throw ShapeError("top_left_singular_vectors: r=" + std::to_string(r) +
                         " outside [1, " + std::to_string(std::min(m.rows(), m.cols())) + "]");
    }
    return jacobi_svd(m).u.left_cols(r);
}

Matrix qr_orthonormalize(const Matrix& m) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    if (cols == 0 || rows < cols) {
        throw ShapeError("qr_orthonormalize: need rows >= cols > 0, got " + std::to_string(rows) +
                         "x" + std::to_string(cols));
    }
    std::vector<double> col_norm(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rows; ++i) s += m(i, j) * m(i, j);
        col_norm[j] = std::sqrt(s);
    }

    Matrix a = m;
    std::vector<std::vector<double>> reflectors;
    std::vector<double> rdiag(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double s = 0.0;
        for (std::size_t i = j; i < rows; ++i) s += a(i, j) * a(i, j);
        const double norm = std::sqrt(s);
        const double alpha = a(j, j) > 0.0 ? -norm : norm;
        std::vector<double> v(rows - j);
        for (std::size_t i = j; i < rows; ++i) v[i - j] = a(i, j);
        v[0] -= alpha;
        const double vnorm2 = dot(v, v);
        if (vnorm2 > 0.0) {
            for (std::size_t c = j; c < cols; ++c) {
                double proj = 0.0;
                for (std::size_t i = j; i < rows; ++i) proj += v[i - j] * a(i, c);
                proj *= 2.0 / vnorm2;
                for (std::size_t i = j; i < rows; ++i) a(i, c) -= proj * v[i - j];
            }
        }
        rdiag[j] = a(j, j);
        if (!(std::abs(rdiag[j]) >= 1e-12 * col_norm[j]) || col_norm[j] == 0.0) {
            throw NumericalError("qr_orthonormalize: rank deficient at column " +
                                 std::to_string(j) + " (|R_jj|=" +
                                 std::to_string(std::abs(rdiag[j])) + ")");
        }
        reflectors.push_back(std::move(v));
    }

    // Q = H_0 H_1 ... H_{c-1} applied to the first `cols` unit vectors.
    Matrix q(rows, cols);
    for (std::size_t j = 0; j < cols; ++j) q(j, j) = 1.0;
    for (std::size_t jj = cols; jj-- > 0;) {
        const auto& v = reflectors[jj];
        const double vnorm2 = dot(v, v);
        if (vnorm2 == 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c) {
            double proj = 0.0;
            for (std::size_t i = jj; i < rows; ++i) proj += v[i - jj] * q(i, c);
            proj *= 2.0 / vnorm2;
            for (std::size_t i = jj; i < rows; ++i) q(i, c) -= proj * v[i - jj];
        }
    }
    for (std::size_t j = 0; j < cols; ++j) {
        if (rdiag[j] < 0.0)
            for (std::size_t i = 0; i < rows; ++i) q(i, j) = -q(i, j);
    }
    return q;
}

double orthonormality_defect(const Matrix& u) {
    const Matrix g = transpose_times(u, u);
    return max_abs_diff(g, Matrix::identity(u.cols()));
}

double sin_theta_distance(const Matrix& u, const Matrix& v) {
    if (u.rows() != v.rows() || u.cols() != v.cols()) {
        throw ShapeError("sin_theta_distance: shapes differ");
    }
    if (orthonormality_defect(u) > 1e-8 || orthonormality_defect(v) > 1e-8) {
        throw ShapeError("sin_theta_distance: inputs must have orthonormal columns");
    }
    const Matrix residual = v - u * transpose_times(u, v);
    const auto eig = symmetric_eigen(transpose_times(residual, residual));
    const double top = std::max(0.0, eig.values.front());
    return std::min(1.0, std::sqrt(top));
}

double projector_distance(const Matrix& u, const Matrix& v) {
    if (u.rows() != v.rows()) throw ShapeError("projector_distance: row counts differ");
    const Matrix diff = u * u.transpose() - v * v.transpose();
    const auto eig = symmetric_eigen(diff);
    return std::max(std::abs(eig.values.front()), std::abs(eig.values.back()));
}

std::size_t eigen_ratio_rank(std::span<const double> values, std::size_t r_max) {
    if (values.empty()) throw ShapeError("eigen_ratio_rank: empty input");
    if (r_max == 0 || r_max >= values.size()) {
        throw ShapeError("eigen_ratio_rank: r_max must lie in [1, " +
                         std::to_string(values.size() - 1) + "]");
    }
    constexpr double kFloor = 1e-300;
    std::size_t best = 1;
    double best_ratio = -1.0;
    for (std::size_t i = 0; i < r_max; ++i) {
        const double ratio = values[i] / std::max(values[i + 1], kFloor);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = i + 1;
        }
    }
    return best;
}

}  // namespace fattnn
