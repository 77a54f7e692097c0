// SPDX-License-Identifier: Apache-2.0
#include "hpft/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpft/csv.hpp"

namespace hpft {

namespace {

void apply_one_step(Network& net, const NetGrads& grads, double lr, bool update_backbone,
                    bool update_head) {
    auto apply = [&](std::vector<DenseLayer>& stack, const std::vector<LayerGrads>& g) {
        for (size_t l = 0; l < stack.size(); ++l) {
            for (size_t i = 0; i < stack[l].w.data.size(); ++i)
                stack[l].w.data[i] -= lr * g[l].dw.data[i];
            if (stack[l].use_bias)
                for (size_t i = 0; i < stack[l].b.size(); ++i) stack[l].b[i] -= lr * g[l].db[i];
        }
    };
    if (update_backbone) apply(net.backbone, grads.backbone);
    if (update_head) apply(net.head, grads.head);
}

double head_param_norm(const Network& net) {
    double s = 0.0;
    for (const DenseLayer& l : net.head) {
        for (double w : l.w.data) s += w * w;
        if (l.use_bias)
            for (double b : l.b) s += b * b;
    }
    return std::sqrt(s);
}

double head_weight_grad_norm(const NetGrads& g) {
    double s = 0.0;
    for (const LayerGrads& l : g.head)
        for (double w : l.dw.data) s += w * w;
    return std::sqrt(s);
}

double head_grad_norm(const NetGrads& g, const Network& net) {
    double s = 0.0;
    for (size_t l = 0; l < g.head.size(); ++l) {
        for (double w : g.head[l].dw.data) s += w * w;
        if (net.head[l].use_bias)
            for (double b : g.head[l].db) s += b * b;
    }
    return std::sqrt(s);
}

bool single_linear_head(const Network& net) {
    return net.head.size() == 1 && net.head[0].act == Activation::identity;
}

}  // namespace

// ---------------------------------------------------------------------------
// one-step decomposition
// ---------------------------------------------------------------------------

Matrix compose_predicted(const StepDecomposition& dec) {
    const int n_probe = static_cast<int>(dec.probe_ids.size());
    Matrix out(n_probe, dec.h);
    const double scale = dec.gamma / dec.batch_n;
    for (int j = 0; j < n_probe; ++j) {
        for (int n = 0; n < dec.batch_n; ++n) {
            const Vector w = matvec_t(dec.directions[n], dec.energies.row(n));
            const Vector term = matvec(dec.kernels[j * dec.batch_n + n], w);
            for (int i = 0; i < dec.h; ++i) out(j, i) += scale * term[i];
        }
    }
    return out;
}

StepDecomposition decompose_step_targets(const Network& model, const Matrix& x,
                                         const Matrix& targets, LossKind loss, double gamma,
                                         const std::vector<int>& probe_ids) {
    require(gamma > 0.0, "decompose_step: gamma must be positive");
    require(x.rows == targets.rows, "decompose_step: inputs/targets row mismatch");
    require(x.rows >= 1, "decompose_step: empty batch");
    for (int id : probe_ids)
        require(id >= 0 && id < x.rows, "decompose_step: probe id out of range");

    StepDecomposition dec;
    dec.probe_ids = probe_ids;
    dec.gamma = gamma;
    dec.batch_n = x.rows;
    dec.h = model.feature_dim();
    dec.k = model.output_dim();

    // per-sample direction and energy
    dec.directions.reserve(dec.batch_n);
    dec.energies = Matrix(dec.batch_n, dec.k);
    std::vector<Matrix> jac;  // backbone Jacobian per batch sample, h x P
    jac.reserve(dec.batch_n);
    for (int n = 0; n < dec.batch_n; ++n) {
        const Vector xn = x.row(n);
        const ForwardResult f = forward(model, xn);
        const Vector pred = (loss == LossKind::cross_entropy) ? softmax(f.q) : f.q;
        for (int c = 0; c < dec.k; ++c) dec.energies(n, c) = targets(n, c) - pred[c];
        dec.directions.push_back(grad_q_wrt_z(model, xn));
        jac.push_back(backbone_jacobian(model, xn));
    }

    // kernel blocks for every (probe, batch) pair
    dec.kernels.reserve(probe_ids.size() * dec.batch_n);
    for (int id : probe_ids)
        for (int n = 0; n < dec.batch_n; ++n) dec.kernels.push_back(matmul_nt(jac[id], jac[n]));

    dec.predicted = compose_predicted(dec);

    // actual feature change from one true step (backbone-only and joint)
    const LossGrads lg = loss_and_grads(model, x, targets, loss);
    Matrix probe_x(static_cast<int>(probe_ids.size()), x.cols);
    for (size_t j = 0; j < probe_ids.size(); ++j)
        probe_x.set_row(static_cast<int>(j), x.row(probe_ids[j]));
    const Matrix z_before = batch_features(model, probe_x);

    Network bb_only = model;
    apply_one_step(bb_only, lg.grads, gamma, true, false);
    dec.actual_backbone_only = sub(batch_features(bb_only, probe_x), z_before);

    Network joint = model;
    apply_one_step(joint, lg.grads, gamma, true, true);
    dec.actual_joint = sub(batch_features(joint, probe_x), z_before);

    const int n_probe = static_cast<int>(probe_ids.size());
    dec.residual_backbone_only.assign(n_probe, 0.0);
    dec.residual_joint.assign(n_probe, 0.0);
    for (int j = 0; j < n_probe; ++j) {
        dec.residual_backbone_only[j] =
            norm2(vsub(dec.actual_backbone_only.row(j), dec.predicted.row(j)));
        dec.residual_joint[j] = norm2(vsub(dec.actual_joint.row(j), dec.predicted.row(j)));
        dec.mean_residual_backbone += dec.residual_backbone_only[j] / n_probe;
        dec.mean_residual_joint += dec.residual_joint[j] / n_probe;
    }
    return dec;
}

StepDecomposition decompose_step(const Network& model, const ClassificationDataset& batch,
                                 LossKind loss, double gamma, const std::vector<int>& probe_ids) {
    return decompose_step_targets(model, batch.x, batch.onehot, loss, gamma, probe_ids);
}

// ---------------------------------------------------------------------------
// direction-term tracking
// ---------------------------------------------------------------------------

DirectionRecord track_direction(const HpFtResult& run) {
    const int t_epochs = static_cast<int>(run.ft_record.rows.size());
    require(static_cast<int>(run.ft_epoch_models.size()) == t_epochs + 1,
            "track_direction: run must keep one model per FT epoch (keep_epoch_models)");

    DirectionRecord rec;
    const StageConfig& ft = run.cfg.ft;
    const int n = run.data.train.n();
    rec.exact = single_linear_head(run.model_final) && ft.momentum == 0.0 &&
                (ft.batch_size <= 0 || ft.batch_size >= n);

    const Matrix targets = smooth_labels(run.data.train.onehot, ft.label_eta);
    Matrix probe_x(static_cast<int>(run.probe_ids.size()), run.data.train.dim());
    for (size_t j = 0; j < run.probe_ids.size(); ++j)
        probe_x.set_row(static_cast<int>(j), run.data.train.x.row(run.probe_ids[j]));

    std::vector<std::vector<Matrix>> dirs(run.ft_epoch_models.size());
    for (size_t t = 0; t < run.ft_epoch_models.size(); ++t) {
        const Network& net = run.ft_epoch_models[t];
        rec.head_norm.push_back(head_param_norm(net));
        double mean_dir = 0.0;
        dirs[t].reserve(run.probe_ids.size());
        for (int j = 0; j < probe_x.rows; ++j) {
            dirs[t].push_back(grad_q_wrt_z(net, probe_x.row(j)));
            mean_dir += frobenius_norm(dirs[t].back()) / probe_x.rows;
        }
        rec.dir_norm.push_back(mean_dir);
    }

    for (int t = 0; t < t_epochs; ++t) {
        const LossGrads lg =
            loss_and_grads(run.ft_epoch_models[t], run.data.train.x, targets, ft.loss);
        rec.grad_head_norm.push_back(head_grad_norm(lg.grads, run.ft_epoch_models[t]));
        rec.predicted_change.push_back(ft.lr * head_weight_grad_norm(lg.grads));
        double mean_change = 0.0;
        for (int j = 0; j < probe_x.rows; ++j)
            mean_change += frobenius_norm(sub(dirs[t + 1][j], dirs[t][j])) / probe_x.rows;
        rec.dir_change.push_back(mean_change);
        rec.identity_gap.push_back(std::fabs(rec.dir_change.back() - rec.predicted_change.back()));
        rec.max_identity_gap = std::max(rec.max_identity_gap, rec.identity_gap.back());
    }
    return rec;
}

std::string direction_record_to_csv(const DirectionRecord& rec) {
    CsvWriter w({"epoch", "head_norm", "dir_norm", "grad_head_norm", "dir_change",
                 "predicted_change", "identity_gap"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (size_t t = 0; t < rec.head_norm.size(); ++t) {
        const bool has_step = t < rec.dir_change.size();
        w.cell(static_cast<int>(t)).cell(rec.head_norm[t]).cell(rec.dir_norm[t]);
        w.cell(has_step ? rec.grad_head_norm[t] : nan);
        w.cell(has_step ? rec.dir_change[t] : nan);
        w.cell(has_step ? rec.predicted_change[t] : nan);
        w.cell(has_step ? rec.identity_gap[t] : nan);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// empirical-kernel slow-change probes
// ---------------------------------------------------------------------------

NtkProbeRecord ntk_probe(const HpFtResult& run, int n_probe, RngState& rng) {
    require(n_probe >= 2, "ntk_probe: need at least two probe samples");
    return ntk_probe(run, pick_probe_ids(run.data.train.n(), n_probe, rng));
}

NtkProbeRecord ntk_probe(const HpFtResult& run, const std::vector<int>& sample_ids) {
    require(sample_ids.size() >= 2, "ntk_probe: need at least two probe samples");
    require(!run.ft_epoch_models.empty(),
            "ntk_probe: run must keep per-epoch models (keep_epoch_models)");
    for (int id : sample_ids)
        require(id >= 0 && id < run.data.train.n(), "ntk_probe: sample id out of range");

    NtkProbeRecord rec;
    rec.sample_ids = sample_ids;
    const int m = static_cast<int>(rec.sample_ids.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) rec.pair_ids.emplace_back(rec.sample_ids[i], rec.sample_ids[j]);

    std::vector<Matrix> prev_blocks;
    for (size_t t = 0; t < run.ft_epoch_models.size(); ++t) {
        const Network& net = run.ft_epoch_models[t];
        std::vector<Matrix> jac;
        jac.reserve(m);
        for (int i = 0; i < m; ++i)
            jac.push_back(backbone_jacobian(net, run.data.train.x.row(rec.sample_ids[i])));

        std::vector<Matrix> blocks;
        blocks.reserve(rec.pair_ids.size());
        double norm_sum = 0.0, gap_sum = 0.0;
        size_t p = 0;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j, ++p) {
                blocks.push_back(matmul_nt(jac[i], jac[j]));
                norm_sum += frobenius_norm(blocks.back());
                if (t > 0) gap_sum += frobenius_norm(sub(blocks.back(), prev_blocks[p]));
            }
        rec.k_norm.push_back(norm_sum / blocks.size());
        if (t > 0) rec.k_gap.push_back(gap_sum / blocks.size());
        prev_blocks = std::move(blocks);
    }
    if (!rec.k_gap.empty()) {
        double s = 0.0;
        for (double g : rec.k_gap) s += g;
        rec.mean_k_gap = s / rec.k_gap.size();
    }
    return rec;
}

std::string ntk_record_to_csv(const NtkProbeRecord& rec) {
    CsvWriter w({"epoch", "k_norm", "k_gap"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (size_t t = 0; t < rec.k_norm.size(); ++t) {
        w.cell(static_cast<int>(t)).cell(rec.k_norm[t]);
        w.cell(t < rec.k_gap.size() ? rec.k_gap[t] : nan);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// displacement bound
// ---------------------------------------------------------------------------

AieBoundReport check_aie_bound(const HpFtResult& run, const NtkProbeRecord& ntk,
                               const DirectionRecord& dir) {
    const FeatureSnapshot* z0 = nullptr;
    const FeatureSnapshot* zt = nullptr;
    for (const FeatureSnapshot& s : run.snapshots) {
        if (s.tag == "z0") z0 = &s;
        if (s.tag == "zT") zt = &s;
    }
    require(z0 != nullptr && zt != nullptr, "check_aie_bound: run lacks z0/zT feature snapshots");
    require(z0->probe_ids == zt->probe_ids, "check_aie_bound: snapshot probe sets differ");
    require(!ntk.k_norm.empty(), "check_aie_bound: empty kernel-norm series");
    require(!dir.dir_norm.empty(), "check_aie_bound: empty head-norm series");

    AieBoundReport rep;
    rep.gamma = run.cfg.ft.lr;
    rep.t_epochs = static_cast<int>(run.ft_record.rows.size());
    rep.e_aie = run.aie_boundary.e_aie;
    rep.c2_exact = single_linear_head(run.model_final);

    for (int j = 0; j < z0->features.rows; ++j)
        rep.lhs += norm2(vsub(zt->features.row(j), z0->features.row(j))) / z0->features.rows;
    rep.c1 = *std::max_element(ntk.k_norm.begin(), ntk.k_norm.end());
    rep.c2 = *std::max_element(dir.dir_norm.begin(), dir.dir_norm.end());
    rep.c = rep.gamma * rep.c1 * rep.c2 * rep.t_epochs;
    rep.rhs = rep.c * rep.e_aie;
    rep.holds = rep.lhs <= rep.rhs;
    rep.slack = rep.lhs > 0.0 ? rep.rhs / rep.lhs : std::numeric_limits<double>::infinity();

    for (const Network& net : run.ft_epoch_models)
        rep.per_epoch_energy.push_back(compute_aie(net, run.data.train, run.cfg.ft.loss).e_aie);
    if (rep.per_epoch_energy.size() <= 1) {
        rep.stable_fraction = 1.0;
    } else {
        int ok = 0;
        for (size_t t = 0; t + 1 < rep.per_epoch_energy.size(); ++t)
            if (rep.per_epoch_energy[t + 1] <= rep.per_epoch_energy[t] + 1e-12) ++ok;
        rep.stable_fraction = static_cast<double>(ok) /
                              static_cast<double>(rep.per_epoch_energy.size() - 1);
    }
    return rep;
}

}  // namespace hpft
