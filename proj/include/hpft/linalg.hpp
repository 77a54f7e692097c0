// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense row-major linear algebra: the minimal kernel the rest of the code
// builds on. Deliberately dependency-free and sequential so that results are
// reproducible bit-for-bit for a fixed seed and toolchain.

#include <cstdint>
#include <vector>

#include "hpft/errors.hpp"

namespace hpft {

using Vector = std::vector<double>;

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major, data[r * cols + c]

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
        require(r >= 0 && c >= 0, "Matrix: negative dimension");
    }

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    static Matrix identity(int n);

    Vector row(int r) const;
    void set_row(int r, const Vector& v);
};

// ---------------------------------------------------------------------------
// basic ops
// ---------------------------------------------------------------------------

Matrix matmul(const Matrix& a, const Matrix& b);            // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);         // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);         // a * b^T
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Vector matvec(const Matrix& a, const Vector& x);            // a * x
Vector matvec_t(const Matrix& a, const Vector& x);          // a^T * x
Matrix outer(const Vector& x, const Vector& y);             // x y^T

double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double dot(const Vector& x, const Vector& y);
double norm2(const Vector& x);
Vector vadd(const Vector& x, const Vector& y);
Vector vsub(const Vector& x, const Vector& y);
Vector vscale(const Vector& x, double s);

bool all_finite(const Matrix& a);
bool all_finite(const Vector& x);

// Numerically shifted softmax: subtracts the row max before exponentiating.
// Output sums to 1 within 1e-12 for any finite input.
Vector softmax(const Vector& q);

// ---------------------------------------------------------------------------
// symmetric eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

// Eigenvalues sorted descending; vectors.col(i) is the unit eigenvector for
// values[i]. Input must be symmetric (checked up to 1e-9 relative).
struct SymEigen {
    Vector values;
    Matrix vectors;  // n x n, column i <-> values[i]
};
SymEigen jacobi_eigen(const Matrix& a);

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

// Top-2 principal components of row-wise samples. Components have a
// deterministic sign convention: the entry of largest magnitude is positive.
// If the covariance has rank < 2 the second component is zeroed and
// `degenerate` is set instead of failing.
struct Pca2 {
    Matrix projection;   // n x 2 (centered data projected on components)
    Matrix components;   // 2 x d (rows are unit-norm principal directions)
    Vector mean;         // column means used for centering
    double var1 = 0.0;   // leading eigenvalue of the covariance
    double var2 = 0.0;   // second eigenvalue
    double total_var = 0.0;
    bool degenerate = false;
};
Pca2 pca_top2(const Matrix& samples);

// ---------------------------------------------------------------------------
// SPD solves (Cholesky with diagonal jitter)
// ---------------------------------------------------------------------------

// Jitter actually applied is `jitter * mean(diag(k))`, making the knob scale
// free. Pass jitter <= 0 to request a raw factorization.
double effective_jitter(const Matrix& k, double jitter);

struct Cholesky {
    Matrix l;        // lower triangular, k + jitter*I = l l^T
    double applied_jitter = 0.0;
    Vector solve(const Vector& rhs) const;
    Matrix solve(const Matrix& rhs) const;   // column-wise solves
};

// Throws SingularKernelError if the factorization fails even with jitter.
Cholesky cholesky(const Matrix& k, double jitter = 1e-10);

Vector solve_spd(const Matrix& k, const Vector& rhs, double jitter = 1e-10);
Matrix spd_inverse(const Matrix& k, double jitter = 1e-10);

}  // namespace hpft
