// SPDX-License-Identifier: Apache-2.0
#include "hpft/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hpft {

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector Matrix::row(int r) const {
    require(r >= 0 && r < rows, "Matrix::row: index out of range");
    return Vector(data.begin() + static_cast<size_t>(r) * cols,
                  data.begin() + static_cast<size_t>(r + 1) * cols);
}

void Matrix::set_row(int r, const Vector& v) {
    require(r >= 0 && r < rows, "Matrix::set_row: index out of range");
    require(static_cast<int>(v.size()) == cols, "Matrix::set_row: length mismatch");
    std::copy(v.begin(), v.end(), data.begin() + static_cast<size_t>(r) * cols);
}

// ---------------------------------------------------------------------------
// basic ops
// ---------------------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols == b.rows, "matmul: inner dimensions differ");
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        double* crow = &c.data[static_cast<size_t>(i) * c.cols];
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows, "matmul_tn: row counts differ");
    Matrix c(a.cols, b.cols);
    for (int k = 0; k < a.rows; ++k) {
        const double* arow = &a.data[static_cast<size_t>(k) * a.cols];
        const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
        for (int i = 0; i < a.cols; ++i) {
            double* crow = &c.data[static_cast<size_t>(i) * c.cols];
            const double aki = arow[i];
            for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    require(a.cols == b.cols, "matmul_nt: column counts differ");
    Matrix c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = &b.data[static_cast<size_t>(j) * b.cols];
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            c(i, j) = s;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows && a.cols == b.cols, "add: shape mismatch");
    Matrix c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require(a.rows == b.rows && a.cols == b.cols, "sub: shape mismatch");
    Matrix c = a;
    for (size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix scale(const Matrix& a, double s) {
    Matrix c = a;
    for (double& x : c.data) x *= s;
    return c;
}

Vector matvec(const Matrix& a, const Vector& x) {
    require(a.cols == static_cast<int>(x.size()), "matvec: length mismatch");
    Vector y(a.rows, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        double s = 0.0;
        for (int j = 0; j < a.cols; ++j) s += arow[j] * x[j];
        y[i] = s;
    }
    return y;
}

Vector matvec_t(const Matrix& a, const Vector& x) {
    require(a.rows == static_cast<int>(x.size()), "matvec_t: length mismatch");
    Vector y(a.cols, 0.0);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
        const double xi = x[i];
        for (int j = 0; j < a.cols; ++j) y[j] += arow[j] * xi;
    }
    return y;
}

Matrix outer(const Vector& x, const Vector& y) {
    Matrix c(static_cast<int>(x.size()), static_cast<int>(y.size()));
    for (int i = 0; i < c.rows; ++i)
        for (int j = 0; j < c.cols; ++j) c(i, j) = x[i] * y[j];
    return c;
}

double trace(const Matrix& a) {
    require(a.rows == a.cols, "trace: matrix not square");
    double s = 0.0;
    for (int i = 0; i < a.rows; ++i) s += a(i, i);
    return s;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double x : a.data) s += x * x;
    return std::sqrt(s);
}

double dot(const Vector& x, const Vector& y) {
    require(x.size() == y.size(), "dot: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

Vector vadd(const Vector& x, const Vector& y) {
    require(x.size() == y.size(), "vadd: length mismatch");
    Vector z = x;
    for (size_t i = 0; i < z.size(); ++i) z[i] += y[i];
    return z;
}

Vector vsub(const Vector& x, const Vector& y) {
    require(x.size() == y.size(), "vsub: length mismatch");
    Vector z = x;
    for (size_t i = 0; i < z.size(); ++i) z[i] -= y[i];
    return z;
}

Vector vscale(const Vector& x, double s) {
    Vector z = x;
    for (double& v : z) v *= s;
    return z;
}

bool all_finite(const Matrix& a) {
    for (double x : a.data)
        if (!std::isfinite(x)) return false;
    return true;
}

bool all_finite(const Vector& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

Vector softmax(const Vector& q) {
    require(!q.empty(), "softmax: empty input");
    require(all_finite(q), "softmax: non-finite input");
    const double m = *std::max_element(q.begin(), q.end());
    Vector p(q.size());
    double z = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        p[i] = std::exp(q[i] - m);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

// ---------------------------------------------------------------------------
// cyclic Jacobi eigendecomposition
// ---------------------------------------------------------------------------

SymEigen jacobi_eigen(const Matrix& in) {
    require(in.rows == in.cols, "jacobi_eigen: matrix not square");
    const int n = in.rows;
    const double fro = frobenius_norm(in);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            require(std::abs(in(i, j) - in(j, i)) <= 1e-9 * (fro > 0 ? fro : 1.0),
                    "jacobi_eigen: matrix not symmetric");

    Matrix a = in;
    Matrix v = Matrix::identity(n);
    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(2.0 * off) <= 1e-14 * (fro > 0 ? fro : 1.0)) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0)
                                     ? 1.0 / (theta + std::sqrt(1.0 + theta * theta))
                                     : 1.0 / (theta - std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i) > a(j, j); });

    SymEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int c = 0; c < n; ++c) {
        out.values[c] = a(order[c], order[c]);
        for (int r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

Pca2 pca_top2(const Matrix& samples) {
    require(samples.rows >= 2, "pca_top2: need at least 2 samples");
    require(samples.cols >= 1, "pca_top2: need at least 1 feature");
    require(all_finite(samples), "pca_top2: non-finite input");
    const int n = samples.rows, d = samples.cols;

    Pca2 out;
    out.mean.assign(d, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) out.mean[j] += samples(i, j);
    for (double& m : out.mean) m /= n;

    Matrix centered(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) centered(i, j) = samples(i, j) - out.mean[j];

    Matrix cov = scale(matmul_tn(centered, centered), 1.0 / (n - 1));
    SymEigen eig = jacobi_eigen(cov);

    out.total_var = 0.0;
    for (double lam : eig.values) out.total_var += std::max(lam, 0.0);
    out.var1 = std::max(eig.values[0], 0.0);
    out.var2 = d >= 2 ? std::max(eig.values[1], 0.0) : 0.0;

    out.components = Matrix(2, d);
    for (int j = 0; j < d; ++j) out.components(0, j) = eig.vectors(j, 0);
    if (d >= 2 && out.var2 > 1e-12 * std::max(out.var1, 1e-300)) {
        for (int j = 0; j < d; ++j) out.components(1, j) = eig.vectors(j, 1);
    } else {
        out.degenerate = true;  // rank < 2: keep the second row at zero
    }

    // Deterministic sign: flip each component so its largest-|.| entry is > 0.
    for (int r = 0; r < 2; ++r) {
        int arg = 0;
        double best = 0.0;
        for (int j = 0; j < d; ++j) {
            if (std::abs(out.components(r, j)) > best) {
                best = std::abs(out.components(r, j));
                arg = j;
            }
        }
        if (best > 0.0 && out.components(r, arg) < 0.0)
            for (int j = 0; j < d; ++j) out.components(r, j) = -out.components(r, j);
    }

    out.projection = matmul_nt(centered, out.components);
    return out;
}

// ---------------------------------------------------------------------------
// Cholesky
// ---------------------------------------------------------------------------

double effective_jitter(const Matrix& k, double jitter) {
    if (jitter <= 0.0) return 0.0;
    double mean_diag = 0.0;
    for (int i = 0; i < k.rows; ++i) mean_diag += k(i, i);
    mean_diag /= k.rows;
    return jitter * std::abs(mean_diag);
}

static bool try_factor(const Matrix& k, double shift, Matrix& l) {
    const int n = k.rows;
    l = Matrix(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = k(i, j) + (i == j ? shift : 0.0);
            for (int t = 0; t < j; ++t) s -= l(i, t) * l(j, t);
            if (i == j) {
                if (s <= 0.0 || !std::isfinite(s)) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

Cholesky cholesky(const Matrix& k, double jitter) {
    require(k.rows == k.cols, "cholesky: matrix not square");
    require(k.rows >= 1, "cholesky: empty matrix");
    Cholesky f;
    f.applied_jitter = effective_jitter(k, jitter);
    if (try_factor(k, f.applied_jitter, f.l)) return f;
    throw SingularKernelError("cholesky: matrix not positive definite (jitter " +
                              std::to_string(f.applied_jitter) + ")");
}

Vector Cholesky::solve(const Vector& rhs) const {
    const int n = l.rows;
    require(static_cast<int>(rhs.size()) == n, "Cholesky::solve: length mismatch");
    Vector y(n), x(n);
    for (int i = 0; i < n; ++i) {  // forward: L y = rhs
        double s = rhs[i];
        for (int j = 0; j < i; ++j) s -= l(i, j) * y[j];
        y[i] = s / l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {  // backward: L^T x = y
        double s = y[i];
        for (int j = i + 1; j < n; ++j) s -= l(j, i) * x[j];
        x[i] = s / l(i, i);
    }
    return x;
}

Matrix Cholesky::solve(const Matrix& rhs) const {
    require(rhs.rows == l.rows, "Cholesky::solve: row mismatch");
    Matrix x(rhs.rows, rhs.cols);
    Vector col(rhs.rows);
    for (int c = 0; c < rhs.cols; ++c) {
        for (int r = 0; r < rhs.rows; ++r) col[r] = rhs(r, c);
        Vector sol = solve(col);
        for (int r = 0; r < rhs.rows; ++r) x(r, c) = sol[r];
    }
    return x;
}

Vector solve_spd(const Matrix& k, const Vector& rhs, double jitter) {
    return cholesky(k, jitter).solve(rhs);
}

Matrix spd_inverse(const Matrix& k, double jitter) {
    return cholesky(k, jitter).solve(Matrix::identity(k.rows));
}

}  // namespace hpft
