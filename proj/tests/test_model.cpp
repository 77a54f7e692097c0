// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hpft/model.hpp"
#include "oracles.hpp"

using namespace hpft;

namespace {

// Plain re-computation of the forward pass in long double.
std::vector<long double> stack_forward_ld(const std::vector<DenseLayer>& layers,
                                          const Vector& x) {
    std::vector<long double> cur(x.begin(), x.end());
    for (const DenseLayer& l : layers) {
        std::vector<long double> next(l.w.rows, 0.0L);
        for (int r = 0; r < l.w.rows; ++r) {
            long double acc = l.use_bias ? (long double)l.b[r] : 0.0L;
            for (int c = 0; c < l.w.cols; ++c) acc += (long double)l.w(r, c) * cur[c];
            next[r] = l.act == Activation::relu ? std::max(acc, 0.0L) : acc;
        }
        cur = std::move(next);
    }
    return cur;
}

// Pointer to the flat-indexed parameter, matching the jacobian column order:
// per layer, weights row-major, then bias when present.
double* param_ptr(std::vector<DenseLayer>& layers, int flat) {
    for (DenseLayer& l : layers) {
        const int wn = l.w.rows * l.w.cols;
        if (flat < wn) return &l.w.data[flat];
        flat -= wn;
        if (l.use_bias) {
            const int bn = static_cast<int>(l.b.size());
            if (flat < bn) return &l.b[flat];
            flat -= bn;
        }
    }
    REQUIRE(false);
    return nullptr;
}

Network sample_network(HeadKind head, bool relu_backbone, bool bias, unsigned seed) {
    RngState rng(seed);
    Network net;
    net.backbone = make_backbone(5, {7, 4}, relu_backbone ? Activation::relu
                                                          : Activation::identity,
                                 rng);
    if (!bias)
        for (DenseLayer& l : net.backbone) l.use_bias = false;
    net.head = make_head(head, 4, 3, 6, rng);
    return net;
}

}  // namespace

TEST_CASE("forward matches a long-double recomputation") {
    for (bool relu : {false, true}) {
        const Network net = sample_network(HeadKind::mlp2, relu, true, 7);
        RngState rng(3);
        Vector x(5);
        for (double& v : x) v = rng.next_normal();
        const ForwardResult fr = forward(net, x);
        const auto z_ld = stack_forward_ld(net.backbone, x);
        REQUIRE(fr.z.size() == z_ld.size());
        for (size_t i = 0; i < z_ld.size(); ++i)
            CHECK(oracle::rel_err(fr.z[i], (double)z_ld[i]) < 1e-12);
        Vector z(fr.z);
        const auto q_ld = stack_forward_ld(net.head, z);
        REQUIRE(fr.q.size() == q_ld.size());
        for (size_t i = 0; i < q_ld.size(); ++i)
            CHECK(oracle::rel_err(fr.q[i], (double)q_ld[i]) < 1e-12);
    }
}

TEST_CASE("batch_features / batch_logits agree with per-sample forward") {
    const Network net = sample_network(HeadKind::linear, true, true, 9);
    RngState rng(4);
    Matrix x(6, 5);
    for (double& v : x.data) v = rng.next_normal();
    const Matrix z = batch_features(net, x);
    const Matrix q = batch_logits(net, x);
    for (int i = 0; i < 6; ++i) {
        const ForwardResult fr = forward(net, x.row(i));
        for (int j = 0; j < z.cols; ++j) CHECK(z(i, j) == fr.z[j]);
        for (int j = 0; j < q.cols; ++j) CHECK(q(i, j) == fr.q[j]);
    }
}

TEST_CASE("loss_and_grads gradients match central finite differences") {
    struct Case {
        HeadKind head;
        bool relu;
        bool bias;
        LossKind loss;
    };
    const Case cases[] = {
        {HeadKind::linear, false, true, LossKind::mse},
        {HeadKind::linear, true, true, LossKind::cross_entropy},
        {HeadKind::mlp2, true, true, LossKind::cross_entropy},
        {HeadKind::mlp2, true, false, LossKind::mse},
    };
    int case_id = 0;
    for (const Case& c : cases) {
        CAPTURE(case_id);
        Network net = sample_network(c.head, c.relu, c.bias, 100 + case_id);
        RngState rng(50 + case_id);
        const int n = 8;
        Matrix x(n, 5);
        for (double& v : x.data) v = rng.next_normal();
        Matrix targets(n, 3);
        if (c.loss == LossKind::mse) {
            for (double& v : targets.data) v = rng.next_normal();
        } else {
            for (int i = 0; i < n; ++i) targets(i, rng.next_below(3)) = 1.0;
        }

        const LossGrads lg = loss_and_grads(net, x, targets, c.loss);
        CHECK(std::isfinite(lg.loss));

        auto loss_at = [&]() {
            return loss_and_grads(net, x, targets, c.loss).loss;
        };
        auto check_block = [&](std::vector<DenseLayer>& layers,
                               const std::vector<LayerGrads>& grads, int pcount) {
            // flatten analytic grads in the same order as param_ptr
            std::vector<double> flat;
            for (size_t l = 0; l < layers.size(); ++l) {
                for (double v : grads[l].dw.data) flat.push_back(v);
                if (layers[l].use_bias)
                    for (double v : grads[l].db) flat.push_back(v);
            }
            REQUIRE((int)flat.size() == pcount);
            for (int p = 0; p < pcount; ++p) {
                double* slot = param_ptr(layers, p);
                const double fd = oracle::central_fd(
                    loss_at, [&]() { return *slot; }, [&](double v) { *slot = v; }, 1e-6);
                CAPTURE(p);
                CHECK(oracle::rel_err(flat[p], fd) < 1e-4);
            }
        };
        check_block(net.backbone, lg.grads.backbone, backbone_param_count(net));
        check_block(net.head, lg.grads.head, head_param_count(net));
        ++case_id;
    }
}

TEST_CASE("loss_and_grads on an index subset equals the submatrix computation") {
    Network net = sample_network(HeadKind::linear, true, true, 4);
    RngState rng(5);
    Matrix x(6, 5), targets(6, 3);
    for (double& v : x.data) v = rng.next_normal();
    for (int i = 0; i < 6; ++i) targets(i, i % 3) = 1.0;

    const std::vector<int> idx = {0, 2, 5};
    const LossGrads sub = loss_and_grads(net, x, targets, LossKind::cross_entropy, idx);

    Matrix xs(3, 5), ts(3, 3);
    for (int r = 0; r < 3; ++r) {
        xs.set_row(r, x.row(idx[r]));
        ts.set_row(r, targets.row(idx[r]));
    }
    const LossGrads full = loss_and_grads(net, xs, ts, LossKind::cross_entropy);
    CHECK(sub.loss == doctest::Approx(full.loss).epsilon(1e-12));
    for (size_t l = 0; l < sub.grads.head.size(); ++l)
        for (size_t i = 0; i < sub.grads.head[l].dw.data.size(); ++i)
            CHECK(sub.grads.head[l].dw.data[i] ==
                  doctest::Approx(full.grads.head[l].dw.data[i]).epsilon(1e-12));
}

TEST_CASE("loss values match hand formulas on a tiny fixed network") {
    // backbone: identity 2x2; head: identity map of z.
    Network net;
    DenseLayer bb;
    bb.w = Matrix(2, 2);
    bb.w(0, 0) = 1.0;
    bb.w(1, 1) = 1.0;
    bb.b = Vector(2, 0.0);
    bb.use_bias = false;
    net.backbone = {bb};
    net.head = {bb};

    Matrix x(1, 2), t(1, 2);
    x(0, 0) = 0.3;
    x(0, 1) = -0.7;
    t(0, 0) = 1.0;

    const double mse = loss_and_grads(net, x, t, LossKind::mse).loss;
    CHECK(mse == doctest::Approx(0.5 * (0.49 + 0.49)).epsilon(1e-12));

    const Vector p = oracle::softmax_ld(Vector{0.3, -0.7});
    const double ce = loss_and_grads(net, x, t, LossKind::cross_entropy).loss;
    CHECK(ce == doctest::Approx(-(double)std::log(p[0])).epsilon(1e-10));
}

TEST_CASE("non-finite loss raises the divergence error") {
    Network net;
    DenseLayer l;
    l.w = Matrix(1, 1);
    l.w(0, 0) = 1e200;
    l.b = Vector(1, 0.0);
    l.use_bias = false;
    net.backbone = {l};
    net.head = {l};
    Matrix x(1, 1), t(1, 1);
    x(0, 0) = 1e10;
    CHECK_THROWS_AS(loss_and_grads(net, x, t, LossKind::mse), DivergenceError);
}

TEST_CASE("grad_q_wrt_z matches finite differences through the head") {
    for (HeadKind kind : {HeadKind::linear, HeadKind::mlp2}) {
        Network net = sample_network(kind, true, true, 21);
        RngState rng(6);
        Vector x(5);
        for (double& v : x) v = rng.next_normal();
        const Matrix jac = grad_q_wrt_z(net, x);
        const Vector z0 = forward(net, x).z;
        REQUIRE(jac.rows == 3);
        REQUIRE(jac.cols == 4);
        for (int i = 0; i < jac.cols; ++i) {
            Vector zp(z0), zm(z0);
            const double step = 1e-6;
            zp[i] += step;
            zm[i] -= step;
            const auto qp = stack_forward_ld(net.head, zp);
            const auto qm = stack_forward_ld(net.head, zm);
            for (int r = 0; r < jac.rows; ++r) {
                const double fd = (double)((qp[r] - qm[r]) / (2.0L * step));
                CHECK(oracle::rel_err(jac(r, i), fd) < 1e-4);
            }
        }
        if (kind == HeadKind::linear) {
            // exactly the head weight matrix
            for (int r = 0; r < jac.rows; ++r)
                for (int c = 0; c < jac.cols; ++c) CHECK(jac(r, c) == net.head[0].w(r, c));
        }
    }
}

TEST_CASE("backbone_jacobian matches finite differences parameter by parameter") {
    for (bool bias : {true, false}) {
        Network net = sample_network(HeadKind::linear, true, bias, 33);
        RngState rng(8);
        Vector x(5);
        for (double& v : x) v = rng.next_normal();
        const Matrix jac = backbone_jacobian(net, x);
        const int p = backbone_param_count(net);
        REQUIRE(jac.rows == 4);
        REQUIRE(jac.cols == p);
        for (int c = 0; c < p; ++c) {
            double* slot = param_ptr(net.backbone, c);
            const double save = *slot;
            const double step = 1e-6;
            *slot = save + step;
            const Vector zp = forward(net, x).z;
            *slot = save - step;
            const Vector zm = forward(net, x).z;
            *slot = save;
            for (int r = 0; r < 4; ++r) {
                const double fd = (zp[r] - zm[r]) / (2.0 * step);
                if (std::fabs(fd) < 1e-9 && std::fabs(jac(r, c)) < 1e-9) continue;
                CHECK(oracle::rel_err(jac(r, c), fd) < 1e-4);
            }
        }
    }
}

TEST_CASE("make_dense entries respect the scaled-uniform bound") {
    RngState rng(77);
    const DenseLayer l = make_dense(10, 16, true, Activation::relu, rng);
    const double bound = 1.0 / std::sqrt(16.0);
    for (double v : l.w.data) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
    CHECK(l.w.rows == 10);
    CHECK(l.w.cols == 16);
    CHECK((int)l.b.size() == 10);
}

TEST_CASE("reinit_partial_backbone keeps the prefix bitwise and grows the head") {
    RngState rng(55);
    Network net;
    net.backbone = make_backbone(6, {8, 8, 4}, Activation::identity, rng);
    net.head = make_head(HeadKind::linear, 4, 3, 0, rng);

    RngState reinit(99);
    const Network moved = reinit_partial_backbone(net, 2, reinit);
    REQUIRE(moved.backbone.size() == 1);
    REQUIRE(moved.head.size() == 3);  // 2 moved layers + original head
    // untouched prefix is bitwise identical
    CHECK(moved.backbone[0].w.data == net.backbone[0].w.data);
    CHECK(moved.backbone[0].b == net.backbone[0].b);
    // moved layers keep shape but are reinitialized
    for (int l = 0; l < 2; ++l) {
        CHECK(moved.head[l].w.rows == net.backbone[l + 1].w.rows);
        CHECK(moved.head[l].w.cols == net.backbone[l + 1].w.cols);
        CHECK(moved.head[l].w.data != net.backbone[l + 1].w.data);
    }
    // original head rides along bitwise
    CHECK(moved.head[2].w.data == net.head[0].w.data);

    RngState reinit0(99);
    const Network same = reinit_partial_backbone(net, 0, reinit0);
    CHECK(same.backbone.size() == net.backbone.size());
    CHECK(same.head.size() == net.head.size());
    for (size_t l = 0; l < net.backbone.size(); ++l)
        CHECK(same.backbone[l].w.data == net.backbone[l].w.data);

    RngState reinit1(99);
    CHECK_THROWS_AS(reinit_partial_backbone(net, 3, reinit1), ContractViolation);
}

TEST_CASE("accuracy counts argmax matches") {
    Network net;
    DenseLayer id2;
    id2.w = Matrix(2, 2);
    id2.w(0, 0) = 1.0;
    id2.w(1, 1) = 1.0;
    id2.use_bias = false;
    net.backbone = {id2};
    net.head = {id2};
    Matrix x(4, 2);
    x(0, 0) = 2.0;            // argmax 0
    x(1, 1) = 3.0;            // argmax 1
    x(2, 0) = -1.0;           // argmax 1 (0 > -1)
    x(3, 0) = 5.0;            // argmax 0
    const std::vector<int> labels = {0, 1, 0, 1};
    CHECK(accuracy(net, x, labels) == doctest::Approx(0.5));
}

TEST_CASE("two-layer linear model: gradients, prediction, and network round trip") {
    RngState rng(123);
    const LinearTwoLayer m = make_linear_two_layer(6, 9, 0.7, rng);
    CHECK(m.b.rows == 6);
    CHECK(m.b.cols == 9);
    CHECK((int)m.v.size() == 6);

    Matrix x(5, 9);
    Vector y(5);
    for (double& v : x.data) v = rng.next_normal();
    for (double& v : y) v = rng.next_normal();

    // prediction q = x B^T v
    const Vector q = lin2_predict(m, x);
    for (int n = 0; n < 5; ++n) {
        long double acc = 0.0L;
        for (int i = 0; i < 6; ++i) {
            long double zi = 0.0L;
            for (int j = 0; j < 9; ++j) zi += (long double)m.b(i, j) * x(n, j);
            acc += zi * (long double)m.v[i];
        }
        CHECK(oracle::rel_err(q[n], (double)acc) < 1e-12);
        const Lin2Forward f = lin2_forward(m, x.row(n));
        CHECK(oracle::rel_err(f.q, (double)acc) < 1e-12);
    }

    // analytic gradients vs central differences
    LinearTwoLayer work = m;
    const Lin2Grads g = lin2_loss_grads(work, x, y);
    auto loss_at = [&]() { return lin2_loss_grads(work, x, y).loss; };
    for (size_t p = 0; p < work.b.data.size(); ++p) {
        const double fd = oracle::central_fd(
            loss_at, [&]() { return work.b.data[p]; },
            [&](double v) { work.b.data[p] = v; }, 1e-6);
        CHECK(oracle::rel_err(g.db.data[p], fd) < 1e-5);
    }
    for (size_t p = 0; p < work.v.size(); ++p) {
        const double fd = oracle::central_fd(
            loss_at, [&]() { return work.v[p]; }, [&](double v) { work.v[p] = v; }, 1e-6);
        CHECK(oracle::rel_err(g.dv[p], fd) < 1e-5);
    }

    // network view is bit-exact in both directions
    const Network net = lin2_to_network(m);
    REQUIRE(net.backbone.size() == 1);
    REQUIRE(net.head.size() == 1);
    CHECK(net.backbone[0].w.data == m.b.data);
    CHECK_FALSE(net.backbone[0].use_bias);
    const ForwardResult fr = forward(net, x.row(0));
    CHECK(fr.q[0] == lin2_forward(m, x.row(0)).q);
    const LinearTwoLayer back = lin2_from_network(net);
    CHECK(back.b.data == m.b.data);
    CHECK(back.v == m.v);
}
