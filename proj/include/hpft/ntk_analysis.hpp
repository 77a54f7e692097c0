// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-form analysis of the bias-free two-layer linear model q = v^T B x
// under the constant-kernel (lazy) approximation: the empirical kernels at
// initialization, converged parameters in closed form, the quadratic trend
// curves of the feature-adaptation metrics as a function of the initial
// prediction q0 = beta * Y, their critical points, the balance conservation
// law v v^T - B B^T under gradient descent, and the phase classification of
// feature change along the beta ray.

#include <string>
#include <vector>

#include "hpft/model.hpp"

namespace hpft {

// ---------------------------------------------------------------------------
// instances
// ---------------------------------------------------------------------------

// An overparameterized regression problem (n <= d, X full row rank) together
// with the initial parameters of the two-layer linear model.
struct LinearInstance {
    Matrix b0;  // h x d
    Vector v0;  // h
    Matrix x;   // n x d
    Vector y;   // n
    double jitter = 1e-10;  // relative diagonal jitter for kernel solves

    int h() const { return b0.rows; }
    int d() const { return b0.cols; }
    int n() const { return x.rows; }
};

// Seeded random instance. X has standard normal entries (redrawn, at most 3
// times, until X X^T is numerically full rank); Y entries are bounded away
// from zero by construction (sign * (0.3 + |normal|)) so coordinate ratios
// against Y are well defined; B0 entries are b_scale * normal / sqrt(d) and
// v0 entries v_scale * normal / sqrt(h).
LinearInstance make_random_instance(int h, int d, int n, double b_scale, double v_scale,
                                    RngState& rng);

// q0_n = x_n^T B0^T v0 for every row of X
Vector instance_q0(const LinearInstance& inst);
LinearTwoLayer instance_model(const LinearInstance& inst);

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

// K0      = X (B0^T B0 + ||v0||^2 I) X^T   (full-parameter kernel)
// Ktilde0 = X B0^T B0 X^T                  (head-parameter kernel)
// C1      = K0^-1,  C2 = K0^-1 Ktilde0 K0^-1
struct KernelPair {
    Matrix k0;       // n x n
    Matrix ktilde0;  // n x n
    Matrix c1;       // n x n
    Matrix c2;       // n x n
};

// Throws SingularKernelError when K0 is singular beyond the instance jitter.
KernelPair build_kernels(const LinearInstance& inst);

// ---------------------------------------------------------------------------
// stacked backbone parameters and closed forms
// ---------------------------------------------------------------------------

// Stacking convention for the backbone parameter vector b: entry l = i*h + j
// corresponds to B(j, i) — column-major over B, so b is the concatenation of
// B's columns.
Vector stack_b(const Matrix& b);
Matrix unstack_b(const Vector& vb, int h, int d);

// Jacobian of q w.r.t. the stacked b at initialization: n x (h*d), row m is
// the stack of v0 x_m^T. Satisfies grad_b_q0 * stack(B0) = q0 exactly
// (q is linear in b for fixed v).
Matrix grad_b_q0(const LinearInstance& inst);
// Jacobian of q w.r.t. v at initialization: n x h, row m = B0 x_m.
Matrix grad_v_q0(const LinearInstance& inst);

// max elementwise |grad_b_q0 * stack(B0) - X B0^T v0| (the two sides computed
// independently)
double verify_lemma_grad_identity(const LinearInstance& inst);

// Converged stacked backbone parameters under the constant-kernel
// approximation when training starts with prediction q0:
//   b_inf = stack(B0) - grad_b_q0^T K0^-1 (q0 - Y)
Vector closed_form_b_infinity(const LinearInstance& inst, const Vector& q0);

// Converged head under head-only training (exact, the model is linear in v):
//   v_inf = v0 - grad_v_q0^T Ktilde0^-1 (q0 - Y)
Vector closed_form_v_infinity(const LinearInstance& inst, const Vector& q0);

// Scales B0 and v0 by `factor` while keeping the initial residual q0 - Y
// unchanged (Y is moved to the new q0 minus the old residual). Larger factors
// put gradient descent deeper into the lazy regime, where the closed forms
// above become accurate.
LinearInstance make_lazy_instance(const LinearInstance& inst, double factor = 10.0);

// ---------------------------------------------------------------------------
// gradient-descent oracle runs
// ---------------------------------------------------------------------------

struct GdRun {
    std::vector<LinearTwoLayer> trajectory;  // always includes initial and final
    int steps = 0;                           // steps actually taken
    double final_loss = 0.0;                 // mean squared-error loss at the end
    double initial_residual = 0.0;           // ||q0 - Y||_2
    double final_residual = 0.0;
    bool converged = false;
};

// Full-batch GD on the mean squared error with step size gamma. Stops when
// ||q - Y|| <= tol * ||q0 - Y|| (converged) or after max_steps. keep_every
// <= 0 stores only the initial and final models. Throws DivergenceError when
// the residual grows past 1e8 times its initial value or turns non-finite.
GdRun lin2_gd(const LinearInstance& inst, double gamma, int max_steps, double tol, bool train_b,
              bool train_v, int keep_every = 0);

// ---------------------------------------------------------------------------
// conservation law
// ---------------------------------------------------------------------------

// drift[t] = || (v_t v_t^T - B_t B_t^T) - (v_0 v_0^T - B_0 B_0^T) ||_F.
// Exactly conserved under gradient flow; under discrete GD the drift is a
// step-size artifact that shrinks with gamma.
struct ConservationReport {
    Vector drift;
    double max_drift = 0.0;
};

ConservationReport conservation_check(const std::vector<LinearTwoLayer>& trajectory);

// Runs GD to convergence at gamma (max_steps cap) and at gamma/2 (2x cap) and
// returns max_drift(gamma/2) / max_drift(gamma). Near 0.5 for small gamma.
double conservation_gamma_ratio(const LinearInstance& inst, double gamma, int max_steps);

// ---------------------------------------------------------------------------
// critical points and trend curves along q0 = beta * Y
// ---------------------------------------------------------------------------

struct CriticalPoints {
    // vertex of a least-squares quadratic fit to the computed d_dot curve;
    // analytically 0.5 for every instance
    double beta_dot_star = 0.0;
    // critical point of the feature-norm trend: q0* = (I + (C2-2C1)^-1 C1) Y
    Vector q0_norm_star;
    // scalar summary: mean over coordinates of q0_norm_star / Y, with the
    // largest absolute deviation from that mean (the critical point is only
    // approximately a multiple of Y)
    double alpha_summary = 0.0;
    double alpha_spread = 0.0;
    // vertex of the feature-norm trend restricted to the beta ray
    double beta_norm_star_ray = 0.0;
    bool c2m2c1_invertible = false;  // (C2 - 2C1) invertible; the flags below
    bool dot_curvature_ok = false;   // -2 C1 negative definite (maximum)
    bool norm_curvature_ok = false;  // 2 C2 - 4 C1 negative definite (maximum)
};

CriticalPoints critical_points(const LinearInstance& inst);

enum class PhaseTag { collapse, rotate, stretch, tiny_side, unknown };
std::string to_string(PhaseTag tag);

// Phase of feature change at q0 = beta * Y, using the computed critical
// points as boundaries: collapse on [0, alpha), rotate on [alpha, 0.5),
// stretch on [0.5, tiny_threshold), tiny-side at beta >= tiny_threshold.
// `unknown` when alpha is not computable or not inside (0, 0.5), or beta < 0.
PhaseTag classify_phase(double beta, const CriticalPoints& cp, double tiny_threshold = 0.95);
PhaseTag classify_phase(double beta, const LinearInstance& inst);

// Closed-form metric trends at q0 = beta * Y, in absolute units of the
// stacked parameter vector (a = Y^T C1 Y, c = Y^T C2 Y, t0 = ||B0||_F^2):
//   d_dot(beta)   = t0 - a * beta * (beta - 1)         (feature dot product)
//   zt_norm(beta) = t0 + 2 beta (a - c) + beta^2 (c - 2a) + c   (final norm)
//   d_euc(beta)   = c * (beta - 1)^2                   (squared displacement)
//   d_cos(beta)   = d_dot / (sqrt(zt_norm) * sqrt(t0))
// At beta = 1 these sit at their zero-adaptation values (0, t0, t0, 1).
struct TrendCurve {
    Vector beta;
    Vector d_euc;
    Vector d_dot;
    Vector zt_norm;
    Vector d_cos;
    std::vector<PhaseTag> phase;
};

// Grid must be strictly increasing. Throws ContractViolation if zt_norm is
// not positive somewhere on the grid (d_cos undefined there).
TrendCurve trend_curves(const LinearInstance& inst, const Vector& beta_grid);

// columns: beta, d_euc, d_dot, zt_norm, d_cos, phase
std::string trend_curve_to_csv(const TrendCurve& curve);

}  // namespace hpft
