// SPDX-License-Identifier: Apache-2.0
#pragma once

// Models: the bias-free two-layer linear model used by the closed-form
// analysis, and a configurable MLP backbone + (linear | 2-layer MLP) head
// with manual forward/backward passes for MSE and cross-entropy.

#include <string>
#include <vector>

#include "hpft/linalg.hpp"
#include "hpft/rng.hpp"

namespace hpft {

enum class Activation { identity, relu };
enum class LossKind { mse, cross_entropy };
enum class HeadKind { linear, mlp2 };

std::string to_string(LossKind k);
std::string to_string(HeadKind k);
LossKind loss_kind_from_string(const std::string& s);
HeadKind head_kind_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// generic dense stack
// ---------------------------------------------------------------------------

struct DenseLayer {
    Matrix w;       // out x in
    Vector b;       // out (ignored when use_bias is false)
    bool use_bias = true;
    Activation act = Activation::identity;
};

// Backbone maps x -> z (feature); head maps z -> q (logits / prediction).
struct Network {
    std::vector<DenseLayer> backbone;
    std::vector<DenseLayer> head;

    int input_dim() const { return backbone.front().w.cols; }
    int feature_dim() const { return backbone.back().w.rows; }
    int output_dim() const { return head.back().w.rows; }
};

struct LayerGrads {
    Matrix dw;
    Vector db;
};

struct NetGrads {
    std::vector<LayerGrads> backbone;
    std::vector<LayerGrads> head;
};

// Scaled-uniform init, entries ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
DenseLayer make_dense(int out, int in, bool use_bias, Activation act, RngState& rng);

// widths = hidden/output widths; ReLU on every layer except that the final
// layer's activation is configurable. Output width = feature dimension h.
std::vector<DenseLayer> make_backbone(int input_dim, const std::vector<int>& widths,
                                      Activation final_act, RngState& rng);

// linear: one identity layer h -> k. mlp2: h -> hidden (ReLU) -> k.
std::vector<DenseLayer> make_head(HeadKind kind, int h, int k, int hidden_width, RngState& rng);

struct ForwardResult {
    Vector z;  // backbone output (feature)
    Vector q;  // head output (logits / prediction)
};
ForwardResult forward(const Network& net, const Vector& x);

// Feature rows for a batch of inputs (one row per row of x).
Matrix batch_features(const Network& net, const Matrix& x);
// Logit rows for a batch of inputs.
Matrix batch_logits(const Network& net, const Matrix& x);

// Mean per-sample loss over the rows listed in `idx` (all rows when empty),
// with analytical gradients for every parameter. MSE: 0.5 * ||q - t||^2;
// CE: -sum t_k log softmax(q)_k. Throws DivergenceError on non-finite loss.
struct LossGrads {
    double loss = 0.0;
    NetGrads grads;
};
LossGrads loss_and_grads(const Network& net, const Matrix& x, const Matrix& targets,
                         LossKind loss, const std::vector<int>& idx = {});

// Jacobian of q w.r.t. z at the feature produced by x: k x h. For a linear
// head this is the head weight matrix, independent of x.
Matrix grad_q_wrt_z(const Network& net, const Vector& x);

// Jacobian of z w.r.t. every backbone parameter: h x P where P counts all
// backbone weights and biases, flattened layer by layer (weights row-major,
// then bias). Row i is the gradient of z_i.
Matrix backbone_jacobian(const Network& net, const Vector& x);
int backbone_param_count(const Network& net);
int head_param_count(const Network& net);

// Moves the last n backbone layers into the head (reinitialized); the
// pretrained prefix stays. n = 0 returns the model unchanged.
Network reinit_partial_backbone(const Network& net, int n_last_layers, RngState& rng);

// accuracy of argmax(q) against integer labels
double accuracy(const Network& net, const Matrix& x, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// the analyzed two-layer linear model: z = Bx, q = z^T v (no biases, k = 1)
// ---------------------------------------------------------------------------

struct LinearTwoLayer {
    Matrix b;  // h x d
    Vector v;  // h
};

LinearTwoLayer make_linear_two_layer(int h, int d, double param_scale, RngState& rng);

struct Lin2Forward {
    Vector z;
    double q = 0.0;
};
Lin2Forward lin2_forward(const LinearTwoLayer& m, const Vector& x);

// predictions q_n = x_n^T B^T v for all rows of x
Vector lin2_predict(const LinearTwoLayer& m, const Matrix& x);

// mean MSE loss 1/N sum 0.5 (q_n - y_n)^2 with analytical gradients
struct Lin2Grads {
    double loss = 0.0;
    Matrix db;
    Vector dv;
};
Lin2Grads lin2_loss_grads(const LinearTwoLayer& m, const Matrix& x, const Vector& y);

// Same model expressed as a Network (single bias-free identity layer each),
// so the generic training loop and dynamics probes apply to it unchanged.
Network lin2_to_network(const LinearTwoLayer& m);
LinearTwoLayer lin2_from_network(const Network& net);

}  // namespace hpft
