// SPDX-License-Identifier: Apache-2.0
#include "hpft/ntk_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpft/csv.hpp"

namespace hpft {

namespace {

Matrix symmetrize(const Matrix& a) {
    Matrix out(a.rows, a.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out(i, j) = 0.5 * (a(i, j) + a(j, i));
    return out;
}

double quad_form(const Matrix& m, const Vector& y) { return dot(y, matvec(m, y)); }

// Solve M w = rhs for symmetric (possibly indefinite) M via eigendecomposition.
// Returns false when M is numerically singular.
bool sym_solve(const Matrix& m, const Vector& rhs, Vector& out) {
    const SymEigen eig = jacobi_eigen(m);
    double max_abs = 0.0, min_abs = std::numeric_limits<double>::infinity();
    for (double v : eig.values) {
        max_abs = std::max(max_abs, std::fabs(v));
        min_abs = std::min(min_abs, std::fabs(v));
    }
    if (max_abs == 0.0 || min_abs <= 1e-10 * max_abs) return false;
    const Vector c = matvec_t(eig.vectors, rhs);  // V^T rhs
    Vector scaled(c.size());
    for (size_t i = 0; i < c.size(); ++i) scaled[i] = c[i] / eig.values[i];
    out = matvec(eig.vectors, scaled);
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// instances
// ---------------------------------------------------------------------------

LinearInstance make_random_instance(int h, int d, int n, double b_scale, double v_scale,
                                    RngState& rng) {
    require(h >= 1 && d >= 1 && n >= 1, "make_random_instance: dimensions must be positive");
    require(n <= d, "make_random_instance: need n <= d (overparameterized regime)");

    LinearInstance inst;
    bool full_rank = false;
    for (int attempt = 0; attempt < 4 && !full_rank; ++attempt) {
        inst.x = Matrix(n, d);
        for (double& e : inst.x.data) e = rng.next_normal();
        const SymEigen eig = jacobi_eigen(symmetrize(matmul_nt(inst.x, inst.x)));
        full_rank = eig.values.front() > 0.0 && eig.values.back() > 1e-8 * eig.values.front();
    }
    require(full_rank, "make_random_instance: could not draw a full-rank input matrix");

    inst.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_normal();
        inst.y[i] = (g < 0.0 ? -1.0 : 1.0) * (0.3 + std::fabs(g));
    }
    inst.b0 = Matrix(h, d);
    const double bs = b_scale / std::sqrt(static_cast<double>(d));
    for (double& e : inst.b0.data) e = bs * rng.next_normal();
    inst.v0.resize(h);
    const double vs = v_scale / std::sqrt(static_cast<double>(h));
    for (double& e : inst.v0) e = vs * rng.next_normal();
    return inst;
}

Vector instance_q0(const LinearInstance& inst) {
    return matvec(matmul_nt(inst.x, inst.b0), inst.v0);  // (X B0^T) v0
}

LinearTwoLayer instance_model(const LinearInstance& inst) { return {inst.b0, inst.v0}; }

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

KernelPair build_kernels(const LinearInstance& inst) {
    const Matrix btb = matmul_tn(inst.b0, inst.b0);  // d x d
    const double v2 = dot(inst.v0, inst.v0);
    Matrix m = btb;
    for (int i = 0; i < m.rows; ++i) m(i, i) += v2;

    KernelPair kp;
    kp.k0 = symmetrize(matmul_nt(matmul(inst.x, m), inst.x));
    kp.ktilde0 = symmetrize(matmul_nt(matmul(inst.x, btb), inst.x));
    kp.c1 = symmetrize(spd_inverse(kp.k0, inst.jitter));
    kp.c2 = symmetrize(matmul(matmul(kp.c1, kp.ktilde0), kp.c1));
    return kp;
}

// ---------------------------------------------------------------------------
// stacked parameters and closed forms
// ---------------------------------------------------------------------------

Vector stack_b(const Matrix& b) {
    Vector out(static_cast<size_t>(b.rows) * b.cols);
    for (int i = 0; i < b.cols; ++i)
        for (int j = 0; j < b.rows; ++j) out[static_cast<size_t>(i) * b.rows + j] = b(j, i);
    return out;
}

Matrix unstack_b(const Vector& vb, int h, int d) {
    require(static_cast<int>(vb.size()) == h * d, "unstack_b: size mismatch");
    Matrix out(h, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < h; ++j) out(j, i) = vb[static_cast<size_t>(i) * h + j];
    return out;
}

Matrix grad_b_q0(const LinearInstance& inst) {
    const int h = inst.h(), d = inst.d(), n = inst.n();
    Matrix g(n, h * d);
    for (int m = 0; m < n; ++m)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < h; ++j) g(m, i * h + j) = inst.v0[j] * inst.x(m, i);
    return g;
}

Matrix grad_v_q0(const LinearInstance& inst) { return matmul_nt(inst.x, inst.b0); }

double verify_lemma_grad_identity(const LinearInstance& inst) {
    const Vector lhs = matvec(grad_b_q0(inst), stack_b(inst.b0));
    const Vector rhs = instance_q0(inst);
    double gap = 0.0;
    for (size_t i = 0; i < lhs.size(); ++i) gap = std::max(gap, std::fabs(lhs[i] - rhs[i]));
    return gap;
}

Vector closed_form_b_infinity(const LinearInstance& inst, const Vector& q0) {
    require(static_cast<int>(q0.size()) == inst.n(), "closed_form_b_infinity: q0 length mismatch");
    const KernelPair kp = build_kernels(inst);
    const Vector s = solve_spd(kp.k0, vsub(q0, inst.y), inst.jitter);
    return vsub(stack_b(inst.b0), matvec_t(grad_b_q0(inst), s));
}

Vector closed_form_v_infinity(const LinearInstance& inst, const Vector& q0) {
    require(static_cast<int>(q0.size()) == inst.n(), "closed_form_v_infinity: q0 length mismatch");
    const Matrix z = grad_v_q0(inst);  // n x h
    const Matrix ktilde = symmetrize(matmul_nt(z, z));
    const Vector s = solve_spd(ktilde, vsub(q0, inst.y), inst.jitter);
    return vsub(inst.v0, matvec_t(z, s));
}

LinearInstance make_lazy_instance(const LinearInstance& inst, double factor) {
    require(factor > 0.0, "make_lazy_instance: factor must be positive");
    LinearInstance out = inst;
    out.b0 = scale(inst.b0, factor);
    out.v0 = vscale(inst.v0, factor);
    const Vector residual = vsub(instance_q0(inst), inst.y);
    out.y = vsub(instance_q0(out), residual);
    return out;
}

// ---------------------------------------------------------------------------
// gradient-descent oracle runs
// ---------------------------------------------------------------------------

GdRun lin2_gd(const LinearInstance& inst, double gamma, int max_steps, double tol, bool train_b,
              bool train_v, int keep_every) {
    require(gamma >= 0.0, "lin2_gd: negative step size");
    require(max_steps >= 0, "lin2_gd: negative step cap");
    require(train_b || train_v, "lin2_gd: nothing to train");

    GdRun run;
    LinearTwoLayer m = instance_model(inst);
    run.trajectory.push_back(m);
    Vector q = lin2_predict(m, inst.x);
    double res = norm2(vsub(q, inst.y));
    run.initial_residual = res;
    const double target = tol * res;
    const double limit = 1e8 * res + 1e-300;

    bool last_kept = true;
    while (run.steps < max_steps && res > target) {
        const Lin2Grads g = lin2_loss_grads(m, inst.x, inst.y);
        if (train_b)
            for (size_t i = 0; i < m.b.data.size(); ++i) m.b.data[i] -= gamma * g.db.data[i];
        if (train_v)
            for (size_t i = 0; i < m.v.size(); ++i) m.v[i] -= gamma * g.dv[i];
        ++run.steps;
        last_kept = keep_every > 0 && run.steps % keep_every == 0;
        if (last_kept) run.trajectory.push_back(m);

        q = lin2_predict(m, inst.x);
        res = norm2(vsub(q, inst.y));
        if (!all_finite(q) || !std::isfinite(res) || res > limit)
            throw DivergenceError("lin2_gd: residual diverged at step " +
                                      std::to_string(run.steps),
                                  run.steps);
    }
    if (!last_kept) run.trajectory.push_back(m);
    run.final_residual = res;
    run.converged = res <= target;
    double loss = 0.0;
    for (int i = 0; i < inst.n(); ++i) {
        const double gp = q[i] - inst.y[i];
        loss += 0.5 * gp * gp;
    }
    run.final_loss = loss / inst.n();
    return run;
}

// ---------------------------------------------------------------------------
// conservation law
// ---------------------------------------------------------------------------

ConservationReport conservation_check(const std::vector<LinearTwoLayer>& trajectory) {
    require(!trajectory.empty(), "conservation_check: empty trajectory");
    auto balance = [](const LinearTwoLayer& m) {
        return sub(outer(m.v, m.v), matmul_nt(m.b, m.b));
    };
    const Matrix base = balance(trajectory.front());
    ConservationReport rep;
    rep.drift.reserve(trajectory.size());
    for (const LinearTwoLayer& m : trajectory) {
        rep.drift.push_back(frobenius_norm(sub(balance(m), base)));
        rep.max_drift = std::max(rep.max_drift, rep.drift.back());
    }
    return rep;
}

double conservation_gamma_ratio(const LinearInstance& inst, double gamma, int max_steps) {
    const GdRun full = lin2_gd(inst, gamma, max_steps, 1e-10, true, true, 1);
    const GdRun half = lin2_gd(inst, gamma / 2.0, 2 * max_steps, 1e-10, true, true, 1);
    const double m1 = conservation_check(full.trajectory).max_drift;
    const double m2 = conservation_check(half.trajectory).max_drift;
    if (m1 == 0.0) return 0.0;  // exact conservation at both scales
    return m2 / m1;
}

// ---------------------------------------------------------------------------
// critical points and trends
// ---------------------------------------------------------------------------

namespace {

struct RayCoefficients {
    double a = 0.0;   // Y^T C1 Y
    double c = 0.0;   // Y^T C2 Y
    double t0 = 0.0;  // ||B0||_F^2
};

RayCoefficients ray_coefficients(const LinearInstance& inst, const KernelPair& kp) {
    RayCoefficients rc;
    rc.a = quad_form(kp.c1, inst.y);
    rc.c = quad_form(kp.c2, inst.y);
    const double f = frobenius_norm(inst.b0);
    rc.t0 = f * f;
    return rc;
}

double dot_trend(const RayCoefficients& rc, double beta) {
    return rc.t0 - rc.a * beta * (beta - 1.0);
}

double norm_trend(const RayCoefficients& rc, double beta) {
    return rc.t0 + 2.0 * beta * (rc.a - rc.c) + beta * beta * (rc.c - 2.0 * rc.a) + rc.c;
}

// least-squares quadratic fit y ~ c0 + c1 u + c2 u^2 (u centered), vertex
double quadratic_vertex(const Vector& beta, const Vector& f) {
    const size_t n = beta.size();
    long double mean = 0.0L;
    for (double b : beta) mean += b;
    mean /= n;
    long double s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
    for (size_t i = 0; i < n; ++i) {
        const long double u = beta[i] - mean;
        const long double u2 = u * u;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += f[i];
        t1 += f[i] * u;
        t2 += f[i] * u2;
    }
    // normal equations for (c0, c1, c2)
    long double m[3][4] = {{static_cast<long double>(n), s1, s2, t0},
                           {s1, s2, s3, t1},
                           {s2, s3, s4, t2}};
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(static_cast<double>(m[r][col])) >
                std::fabs(static_cast<double>(m[piv][col])))
                piv = r;
        std::swap(m[col], m[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const long double fac = m[r][col] / m[col][col];
            for (int cc = col; cc < 4; ++cc) m[r][cc] -= fac * m[col][cc];
        }
    }
    long double coef[3];
    for (int r = 2; r >= 0; --r) {
        long double acc = m[r][3];
        for (int cc = r + 1; cc < 3; ++cc) acc -= m[r][cc] * coef[cc];
        coef[r] = acc / m[r][r];
    }
    if (coef[2] == 0.0L) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(mean - coef[1] / (2.0L * coef[2]));
}

}  // namespace

CriticalPoints critical_points(const LinearInstance& inst) {
    const KernelPair kp = build_kernels(inst);
    const RayCoefficients rc = ray_coefficients(inst, kp);

    CriticalPoints cp;
    // re-derive the dot-trend vertex from the curve itself
    const int fit_points = 51;
    Vector grid(fit_points), vals(fit_points);
    for (int i = 0; i < fit_points; ++i) {
        grid[i] = 1.25 * i / (fit_points - 1);
        vals[i] = dot_trend(rc, grid[i]);
    }
    cp.beta_dot_star = quadratic_vertex(grid, vals);

    const double denom = 2.0 * rc.a - rc.c;
    cp.beta_norm_star_ray =
        denom != 0.0 ? (rc.a - rc.c) / denom : std::numeric_limits<double>::quiet_NaN();

    const SymEigen c1_eig = jacobi_eigen(kp.c1);
    cp.dot_curvature_ok = c1_eig.values.back() > 0.0;

    const Matrix m = sub(kp.c2, scale(kp.c1, 2.0));  // C2 - 2 C1
    const SymEigen m_eig = jacobi_eigen(m);
    cp.norm_curvature_ok = m_eig.values.front() < 0.0;  // 2(C2 - 2C1) negative definite

    Vector w;
    cp.c2m2c1_invertible = sym_solve(m, matvec(kp.c1, inst.y), w);
    if (cp.c2m2c1_invertible) {
        cp.q0_norm_star = vadd(inst.y, w);
        double mean = 0.0;
        int used = 0;
        Vector ratios(inst.n(), 0.0);
        for (int i = 0; i < inst.n(); ++i) {
            if (std::fabs(inst.y[i]) < 1e-12) continue;
            ratios[used] = cp.q0_norm_star[i] / inst.y[i];
            mean += ratios[used];
            ++used;
        }
        if (used > 0) {
            mean /= used;
            cp.alpha_summary = mean;
            for (int i = 0; i < used; ++i)
                cp.alpha_spread = std::max(cp.alpha_spread, std::fabs(ratios[i] - mean));
        } else {
            cp.alpha_summary = std::numeric_limits<double>::quiet_NaN();
        }
    } else {
        cp.alpha_summary = std::numeric_limits<double>::quiet_NaN();
    }
    return cp;
}

std::string to_string(PhaseTag tag) {
    switch (tag) {
        case PhaseTag::collapse: return "collapse";
        case PhaseTag::rotate: return "rotate";
        case PhaseTag::stretch: return "stretch";
        case PhaseTag::tiny_side: return "tiny-side";
        default: return "unknown";
    }
}

PhaseTag classify_phase(double beta, const CriticalPoints& cp, double tiny_threshold) {
    if (beta < 0.0 || !cp.c2m2c1_invertible || !std::isfinite(cp.alpha_summary))
        return PhaseTag::unknown;
    const double alpha = cp.alpha_summary;
    if (!(alpha > 0.0 && alpha < 0.5)) return PhaseTag::unknown;
    if (beta >= tiny_threshold) return PhaseTag::tiny_side;
    if (beta >= 0.5) return PhaseTag::stretch;
    if (beta >= alpha) return PhaseTag::rotate;
    return PhaseTag::collapse;
}

PhaseTag classify_phase(double beta, const LinearInstance& inst) {
    return classify_phase(beta, critical_points(inst));
}

TrendCurve trend_curves(const LinearInstance& inst, const Vector& beta_grid) {
    require(!beta_grid.empty(), "trend_curves: empty grid");
    for (size_t i = 0; i + 1 < beta_grid.size(); ++i)
        require(beta_grid[i] < beta_grid[i + 1], "trend_curves: grid must be strictly increasing");

    const KernelPair kp = build_kernels(inst);
    const RayCoefficients rc = ray_coefficients(inst, kp);
    require(rc.t0 > 0.0, "trend_curves: zero initial parameter norm");
    const CriticalPoints cp = critical_points(inst);

    TrendCurve curve;
    curve.beta = beta_grid;
    const double sqrt_t0 = std::sqrt(rc.t0);
    for (double beta : beta_grid) {
        const double de = rc.c * (beta - 1.0) * (beta - 1.0);
        const double dd = dot_trend(rc, beta);
        const double zn = norm_trend(rc, beta);
        require(zn > 0.0, "trend_curves: non-positive feature norm on grid");
        curve.d_euc.push_back(de);
        curve.d_dot.push_back(dd);
        curve.zt_norm.push_back(zn);
        curve.d_cos.push_back(dd / (std::sqrt(zn) * sqrt_t0));
        curve.phase.push_back(classify_phase(beta, cp));
    }
    return curve;
}

std::string trend_curve_to_csv(const TrendCurve& curve) {
    CsvWriter w({"beta", "d_euc", "d_dot", "zt_norm", "d_cos", "phase"});
    for (size_t i = 0; i < curve.beta.size(); ++i) {
        w.cell(curve.beta[i]).cell(curve.d_euc[i]).cell(curve.d_dot[i]).cell(curve.zt_norm[i]);
        w.cell(curve.d_cos[i]).cell(to_string(curve.phase[i]));
        w.end_row();
    }
    return w.str();
}

}  // namespace hpft
