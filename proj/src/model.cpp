// SPDX-License-Identifier: Apache-2.0
#include "hpft/model.hpp"

#include <cmath>

namespace hpft {

std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "cross_entropy"; }
std::string to_string(HeadKind k) { return k == HeadKind::linear ? "linear" : "mlp2"; }

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::mse;
    if (s == "cross_entropy") return LossKind::cross_entropy;
    throw ContractViolation("unknown loss kind: " + s);
}

HeadKind head_kind_from_string(const std::string& s) {
    if (s == "linear") return HeadKind::linear;
    if (s == "mlp2") return HeadKind::mlp2;
    throw ContractViolation("unknown head kind: " + s);
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

DenseLayer make_dense(int out, int in, bool use_bias, Activation act, RngState& rng) {
    require(out >= 1 && in >= 1, "make_dense: dimensions must be positive");
    DenseLayer l;
    l.w = Matrix(out, in);
    l.use_bias = use_bias;
    l.act = act;
    const double gain = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : l.w.data) v = gain * (2.0 * rng.next_uniform() - 1.0);
    l.b.assign(out, 0.0);
    if (use_bias)
        for (double& v : l.b) v = gain * (2.0 * rng.next_uniform() - 1.0);
    return l;
}

std::vector<DenseLayer> make_backbone(int input_dim, const std::vector<int>& widths,
                                      Activation final_act, RngState& rng) {
    require(!widths.empty(), "make_backbone: need at least one layer");
    std::vector<DenseLayer> layers;
    int in = input_dim;
    for (size_t i = 0; i < widths.size(); ++i) {
        const bool last = (i + 1 == widths.size());
        layers.push_back(make_dense(widths[i], in, true, last ? final_act : Activation::relu, rng));
        in = widths[i];
    }
    return layers;
}

std::vector<DenseLayer> make_head(HeadKind kind, int h, int k, int hidden_width, RngState& rng) {
    std::vector<DenseLayer> layers;
    if (kind == HeadKind::linear) {
        layers.push_back(make_dense(k, h, true, Activation::identity, rng));
    } else {
        require(hidden_width >= 1, "make_head: mlp2 needs a positive hidden width");
        layers.push_back(make_dense(hidden_width, h, true, Activation::relu, rng));
        layers.push_back(make_dense(k, hidden_width, true, Activation::identity, rng));
    }
    return layers;
}

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

static Vector apply_layer(const DenseLayer& l, const Vector& a, Vector* pre_out) {
    Vector s = matvec(l.w, a);
    if (l.use_bias)
        for (size_t i = 0; i < s.size(); ++i) s[i] += l.b[i];
    if (pre_out) *pre_out = s;
    if (l.act == Activation::relu)
        for (double& v : s) v = v > 0.0 ? v : 0.0;
    return s;
}

static Vector run_stack(const std::vector<DenseLayer>& stack, const Vector& x) {
    Vector a = x;
    for (const DenseLayer& l : stack) a = apply_layer(l, a, nullptr);
    return a;
}

ForwardResult forward(const Network& net, const Vector& x) {
    require(!net.backbone.empty() && !net.head.empty(), "forward: incomplete network");
    require(static_cast<int>(x.size()) == net.input_dim(), "forward: input width mismatch");
    ForwardResult r;
    r.z = run_stack(net.backbone, x);
    r.q = run_stack(net.head, r.z);
    return r;
}

Matrix batch_features(const Network& net, const Matrix& x) {
    Matrix z(x.rows, net.feature_dim());
    for (int i = 0; i < x.rows; ++i) z.set_row(i, run_stack(net.backbone, x.row(i)));
    return z;
}

Matrix batch_logits(const Network& net, const Matrix& x) {
    Matrix q(x.rows, net.output_dim());
    for (int i = 0; i < x.rows; ++i) {
        const ForwardResult f = forward(net, x.row(i));
        q.set_row(i, f.q);
    }
    return q;
}

namespace {

// per-sample activations through one stack
struct StackTrace {
    std::vector<Vector> inputs;  // input to each layer
    std::vector<Vector> pre;     // pre-activation of each layer
    Vector out;
};

StackTrace trace_stack(const std::vector<DenseLayer>& stack, const Vector& x) {
    StackTrace t;
    Vector a = x;
    for (const DenseLayer& l : stack) {
        t.inputs.push_back(a);
        Vector pre;
        a = apply_layer(l, a, &pre);
        t.pre.push_back(std::move(pre));
    }
    t.out = a;
    return t;
}

// Backpropagate dL/d(out) through the stack, accumulating into grads (scaled
// by `weight`); returns dL/d(input).
Vector backprop_stack(const std::vector<DenseLayer>& stack, const StackTrace& t, Vector delta,
                      double weight, std::vector<LayerGrads>& grads) {
    for (int l = static_cast<int>(stack.size()) - 1; l >= 0; --l) {
        const DenseLayer& layer = stack[l];
        if (layer.act == Activation::relu)
            for (size_t i = 0; i < delta.size(); ++i)
                if (t.pre[l][i] <= 0.0) delta[i] = 0.0;
        const Vector& a_in = t.inputs[l];
        LayerGrads& g = grads[l];
        for (int r = 0; r < layer.w.rows; ++r) {
            const double dr = weight * delta[r];
            double* grow = &g.dw.data[static_cast<size_t>(r) * g.dw.cols];
            for (int c = 0; c < layer.w.cols; ++c) grow[c] += dr * a_in[c];
            if (layer.use_bias) g.db[r] += dr;
        }
        delta = matvec_t(layer.w, delta);
    }
    return delta;
}

std::vector<LayerGrads> zero_grads(const std::vector<DenseLayer>& stack) {
    std::vector<LayerGrads> g;
    for (const DenseLayer& l : stack) {
        LayerGrads lg;
        lg.dw = Matrix(l.w.rows, l.w.cols);
        lg.db.assign(l.b.size(), 0.0);
        g.push_back(std::move(lg));
    }
    return g;
}

}  // namespace

LossGrads loss_and_grads(const Network& net, const Matrix& x, const Matrix& targets,
                         LossKind loss, const std::vector<int>& idx) {
    require(x.rows == targets.rows, "loss_and_grads: X/target row mismatch");
    require(targets.cols == net.output_dim(), "loss_and_grads: target width mismatch");
    std::vector<int> rows = idx;
    if (rows.empty()) {
        rows.resize(x.rows);
        for (int i = 0; i < x.rows; ++i) rows[i] = i;
    }
    const double inv_n = 1.0 / static_cast<double>(rows.size());

    LossGrads out;
    out.grads.backbone = zero_grads(net.backbone);
    out.grads.head = zero_grads(net.head);

    for (int i : rows) {
        require(i >= 0 && i < x.rows, "loss_and_grads: row index out of range");
        const Vector xi = x.row(i);
        const StackTrace tb = trace_stack(net.backbone, xi);
        const StackTrace th = trace_stack(net.head, tb.out);
        const Vector& q = th.out;
        const Vector t = targets.row(i);

        Vector dq(q.size());
        if (loss == LossKind::mse) {
            double l = 0.0;
            for (size_t j = 0; j < q.size(); ++j) {
                dq[j] = q[j] - t[j];
                l += 0.5 * dq[j] * dq[j];
            }
            out.loss += inv_n * l;
        } else {
            const Vector p = softmax(q);
            double l = 0.0;
            for (size_t j = 0; j < q.size(); ++j) {
                dq[j] = p[j] - t[j];
                if (t[j] > 0.0) l -= t[j] * std::log(std::max(p[j], 1e-300));
            }
            out.loss += inv_n * l;
        }

        Vector dz = backprop_stack(net.head, th, dq, inv_n, out.grads.head);
        backprop_stack(net.backbone, tb, dz, inv_n, out.grads.backbone);
    }

    if (!std::isfinite(out.loss)) throw DivergenceError("loss_and_grads: non-finite loss", -1);
    return out;
}

Matrix grad_q_wrt_z(const Network& net, const Vector& x) {
    const Vector z = run_stack(net.backbone, x);
    // Jacobian through the head: start with identity on z and push through
    // each layer: J <- diag(act'(s)) W J.
    Matrix j = Matrix::identity(static_cast<int>(z.size()));
    Vector a = z;
    for (const DenseLayer& l : net.head) {
        Vector pre;
        Vector out = apply_layer(l, a, &pre);
        Matrix jn = matmul(l.w, j);
        if (l.act == Activation::relu)
            for (int r = 0; r < jn.rows; ++r)
                if (pre[r] <= 0.0)
                    for (int c = 0; c < jn.cols; ++c) jn(r, c) = 0.0;
        j = std::move(jn);
        a = std::move(out);
    }
    return j;  // k x h
}

int backbone_param_count(const Network& net) {
    int p = 0;
    for (const DenseLayer& l : net.backbone)
        p += l.w.rows * l.w.cols + (l.use_bias ? static_cast<int>(l.b.size()) : 0);
    return p;
}

int head_param_count(const Network& net) {
    int p = 0;
    for (const DenseLayer& l : net.head)
        p += l.w.rows * l.w.cols + (l.use_bias ? static_cast<int>(l.b.size()) : 0);
    return p;
}

Matrix backbone_jacobian(const Network& net, const Vector& x) {
    const StackTrace tb = trace_stack(net.backbone, x);
    const int h = static_cast<int>(tb.out.size());
    const int p = backbone_param_count(net);
    Matrix jac(h, p);

    // One backward pass per feature coordinate: seed dL/dz = e_i.
    std::vector<LayerGrads> grads = zero_grads(net.backbone);
    for (int i = 0; i < h; ++i) {
        for (LayerGrads& g : grads) {
            std::fill(g.dw.data.begin(), g.dw.data.end(), 0.0);
            std::fill(g.db.begin(), g.db.end(), 0.0);
        }
        Vector seed(h, 0.0);
        seed[i] = 1.0;
        backprop_stack(net.backbone, tb, seed, 1.0, grads);
        int col = 0;
        for (size_t l = 0; l < net.backbone.size(); ++l) {
            const LayerGrads& g = grads[l];
            for (double v : g.dw.data) jac(i, col++) = v;
            if (net.backbone[l].use_bias)
                for (double v : g.db) jac(i, col++) = v;
        }
    }
    return jac;
}

Network reinit_partial_backbone(const Network& net, int n_last_layers, RngState& rng) {
    const int depth = static_cast<int>(net.backbone.size());
    require(n_last_layers >= 0, "reinit_partial_backbone: negative layer count");
    require(n_last_layers < depth,
            "reinit_partial_backbone: must keep at least one pretrained layer");
    if (n_last_layers == 0) return net;

    Network out;
    out.backbone.assign(net.backbone.begin(), net.backbone.end() - n_last_layers);
    for (int i = depth - n_last_layers; i < depth; ++i) {
        const DenseLayer& old = net.backbone[i];
        out.head.push_back(make_dense(old.w.rows, old.w.cols, old.use_bias, old.act, rng));
    }
    out.head.insert(out.head.end(), net.head.begin(), net.head.end());
    return out;
}

double accuracy(const Network& net, const Matrix& x, const std::vector<int>& labels) {
    require(x.rows == static_cast<int>(labels.size()), "accuracy: label count mismatch");
    int hits = 0;
    for (int i = 0; i < x.rows; ++i) {
        const ForwardResult f = forward(net, x.row(i));
        int arg = 0;
        for (size_t j = 1; j < f.q.size(); ++j)
            if (f.q[j] > f.q[arg]) arg = static_cast<int>(j);
        if (arg == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / x.rows;
}

// ---------------------------------------------------------------------------
// LinearTwoLayer
// ---------------------------------------------------------------------------

LinearTwoLayer make_linear_two_layer(int h, int d, double param_scale, RngState& rng) {
    require(h >= 1 && d >= 1, "make_linear_two_layer: dimensions must be positive");
    LinearTwoLayer m;
    m.b = Matrix(h, d);
    for (double& v : m.b.data) v = param_scale * rng.next_normal();
    m.v.resize(h);
    for (double& v : m.v) v = param_scale * rng.next_normal();
    return m;
}

Lin2Forward lin2_forward(const LinearTwoLayer& m, const Vector& x) {
    Lin2Forward f;
    f.z = matvec(m.b, x);
    f.q = dot(f.z, m.v);
    return f;
}

Vector lin2_predict(const LinearTwoLayer& m, const Matrix& x) {
    Vector q(x.rows);
    for (int i = 0; i < x.rows; ++i) q[i] = lin2_forward(m, x.row(i)).q;
    return q;
}

Lin2Grads lin2_loss_grads(const LinearTwoLayer& m, const Matrix& x, const Vector& y) {
    require(x.rows == static_cast<int>(y.size()), "lin2_loss_grads: target count mismatch");
    const double inv_n = 1.0 / x.rows;
    Lin2Grads g;
    g.db = Matrix(m.b.rows, m.b.cols);
    g.dv.assign(m.v.size(), 0.0);
    for (int n = 0; n < x.rows; ++n) {
        const Vector xn = x.row(n);
        const Lin2Forward f = lin2_forward(m, xn);
        const double r = f.q - y[n];
        g.loss += inv_n * 0.5 * r * r;
        const double w = inv_n * r;
        for (size_t i = 0; i < m.v.size(); ++i) {
            g.dv[i] += w * f.z[i];
            const double wv = w * m.v[i];
            for (int j = 0; j < m.b.cols; ++j) g.db(static_cast<int>(i), j) += wv * xn[j];
        }
    }
    if (!std::isfinite(g.loss)) throw DivergenceError("lin2_loss_grads: non-finite loss", -1);
    return g;
}

Network lin2_to_network(const LinearTwoLayer& m) {
    Network net;
    DenseLayer backbone;
    backbone.w = m.b;
    backbone.b.assign(m.b.rows, 0.0);
    backbone.use_bias = false;
    backbone.act = Activation::identity;
    net.backbone.push_back(std::move(backbone));

    DenseLayer head;
    head.w = Matrix(1, static_cast<int>(m.v.size()));
    for (size_t i = 0; i < m.v.size(); ++i) head.w(0, static_cast<int>(i)) = m.v[i];
    head.b.assign(1, 0.0);
    head.use_bias = false;
    head.act = Activation::identity;
    net.head.push_back(std::move(head));
    return net;
}

LinearTwoLayer lin2_from_network(const Network& net) {
    require(net.backbone.size() == 1 && net.head.size() == 1,
            "lin2_from_network: expected single-layer backbone and head");
    require(net.head[0].w.rows == 1, "lin2_from_network: head must have one output");
    LinearTwoLayer m;
    m.b = net.backbone[0].w;
    m.v = net.head[0].w.row(0);
    return m;
}

}  // namespace hpft
