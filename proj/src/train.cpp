// SPDX-License-Identifier: Apache-2.0
#include "hpft/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpft/csv.hpp"

namespace hpft {

std::string to_string(Stage s) {
    switch (s) {
        case Stage::pretrain: return "pretrain";
        case Stage::hp: return "hp";
        default: return "ft";
    }
}

std::vector<int> pick_probe_ids(int n, int count, RngState& rng) {
    require(n >= 1, "pick_probe_ids: empty dataset");
    if (count >= n || count <= 0) {
        std::vector<int> all(n);
        for (int i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    std::vector<int> perm;
    shuffled_indices(n, rng, perm);
    std::vector<int> ids(perm.begin(), perm.begin() + count);
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// internals
// ---------------------------------------------------------------------------

namespace {

double eval_loss(const Network& net, const Matrix& x, const Matrix& targets, LossKind loss) {
    double total = 0.0;
    for (int i = 0; i < x.rows; ++i) {
        const ForwardResult f = forward(net, x.row(i));
        if (loss == LossKind::mse) {
            for (int k = 0; k < targets.cols; ++k) {
                const double g = f.q[k] - targets(i, k);
                total += 0.5 * g * g;
            }
        } else {
            const Vector p = softmax(f.q);
            for (int k = 0; k < targets.cols; ++k)
                if (targets(i, k) > 0.0)
                    total -= targets(i, k) * std::log(std::max(p[k], 1e-300));
        }
    }
    return total / x.rows;
}

NetGrads make_velocity(const Network& net) {
    NetGrads v;
    for (const DenseLayer& l : net.backbone) {
        LayerGrads g;
        g.dw = Matrix(l.w.rows, l.w.cols);
        g.db.assign(l.b.size(), 0.0);
        v.backbone.push_back(std::move(g));
    }
    for (const DenseLayer& l : net.head) {
        LayerGrads g;
        g.dw = Matrix(l.w.rows, l.w.cols);
        g.db.assign(l.b.size(), 0.0);
        v.head.push_back(std::move(g));
    }
    return v;
}

void update_stack(std::vector<DenseLayer>& stack, const std::vector<LayerGrads>& grads,
                  std::vector<LayerGrads>& velocity, double lr, double momentum) {
    for (size_t l = 0; l < stack.size(); ++l) {
        LayerGrads& vel = velocity[l];
        const LayerGrads& g = grads[l];
        DenseLayer& layer = stack[l];
        for (size_t i = 0; i < layer.w.data.size(); ++i) {
            vel.dw.data[i] = momentum * vel.dw.data[i] + g.dw.data[i];
            layer.w.data[i] -= lr * vel.dw.data[i];
        }
        if (layer.use_bias)
            for (size_t i = 0; i < layer.b.size(); ++i) {
                vel.db[i] = momentum * vel.db[i] + g.db[i];
                layer.b[i] -= lr * vel.db[i];
            }
    }
}

double metric_of(const EpochRow& row, const std::string& name) {
    if (name == "train_acc") return row.train_acc;
    if (name == "valid_acc") return row.valid_acc;
    if (name == "train_loss") return row.train_loss;
    if (name == "valid_loss") return row.valid_loss;
    throw ContractViolation("unknown early-stop metric: " + name);
}

bool metric_is_loss(const std::string& name) { return name.find("loss") != std::string::npos; }

struct StageView {
    const Matrix& x;
    const Matrix& targets;                // training targets (possibly smoothed)
    const std::vector<int>* labels;       // nullptr => accuracy undefined (NaN)
    const Matrix* valid_x = nullptr;      // optional validation split
    const Matrix* valid_targets = nullptr;  // unsmoothed
    const std::vector<int>* valid_labels = nullptr;
};

double stack_accuracy(const Network& net, const Matrix& x, const std::vector<int>* labels) {
    if (!labels) return std::numeric_limits<double>::quiet_NaN();
    return accuracy(net, x, *labels);
}

// Shared stage loop. Calls on_epoch(epochs_done, model) after every epoch.
RunRecord run_stage(Network& net, const StageView& view, const StageConfig& cfg, RngState& rng,
                    bool train_backbone, bool train_head,
                    const std::function<void(int, const Network&)>& on_epoch) {
    require(cfg.epochs >= 0, "run_stage: negative epoch count");
    require(cfg.epochs == 0 || cfg.lr >= 0.0, "run_stage: negative learning rate");
    require(cfg.momentum >= 0.0 && cfg.momentum < 1.0, "run_stage: momentum must be in [0,1)");
    require(cfg.label_eta > 0.0 && cfg.label_eta <= 1.0, "run_stage: label_eta must be in (0,1]");

    RunRecord rec;
    rec.best_metric = cfg.early_stop ? cfg.early_stop->metric : "train_acc";
    const bool minimizing = metric_is_loss(rec.best_metric);
    rec.best_value = minimizing ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();

    NetGrads velocity = make_velocity(net);
    const int n = view.x.rows;
    std::vector<int> order;
    int stale_epochs = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // --- updates -------------------------------------------------------
        try {
            if (cfg.batch_size <= 0 || cfg.batch_size >= n) {
                const LossGrads lg = loss_and_grads(net, view.x, view.targets, cfg.loss);
                if (train_backbone)
                    update_stack(net.backbone, lg.grads.backbone, velocity.backbone, cfg.lr,
                                 cfg.momentum);
                if (train_head)
                    update_stack(net.head, lg.grads.head, velocity.head, cfg.lr, cfg.momentum);
            } else {
                shuffled_indices(n, rng, order);
                for (int start = 0; start < n; start += cfg.batch_size) {
                    const int stop = std::min(start + cfg.batch_size, n);
                    std::vector<int> batch(order.begin() + start, order.begin() + stop);
                    const LossGrads lg = loss_and_grads(net, view.x, view.targets, cfg.loss, batch);
                    if (train_backbone)
                        update_stack(net.backbone, lg.grads.backbone, velocity.backbone, cfg.lr,
                                     cfg.momentum);
                    if (train_head)
                        update_stack(net.head, lg.grads.head, velocity.head, cfg.lr, cfg.momentum);
                }
            }
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " (stage " + to_string(cfg.stage) +
                                      ", epoch " + std::to_string(epoch) + ")",
                                  epoch);
        }

        // --- metrics ---------------------------------------------------------
        EpochRow row;
        row.stage = cfg.stage;
        row.epoch = epoch;
        row.train_loss = eval_loss(net, view.x, view.targets, cfg.loss);
        row.train_acc = stack_accuracy(net, view.x, view.labels);
        if (view.valid_x) {
            row.valid_loss = eval_loss(net, *view.valid_x, *view.valid_targets, cfg.loss);
            row.valid_acc = stack_accuracy(net, *view.valid_x, view.valid_labels);
        } else {
            row.valid_loss = std::numeric_limits<double>::quiet_NaN();
            row.valid_acc = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(row.train_loss))
            throw DivergenceError("run_stage: non-finite training loss (stage " +
                                      to_string(cfg.stage) + ", epoch " + std::to_string(epoch) +
                                      ")",
                                  epoch);
        rec.rows.push_back(row);

        // --- best tracking / early stop -------------------------------------
        const double m = metric_of(row, rec.best_metric);
        const double delta = cfg.early_stop ? cfg.early_stop->min_delta : 0.0;
        const bool improved = minimizing ? (m < rec.best_value - delta) : (m > rec.best_value + delta);
        if ((minimizing && m < rec.best_value) || (!minimizing && m > rec.best_value)) {
            rec.best_value = m;
            rec.best_epoch = epoch;
        }
        if (on_epoch) on_epoch(epoch, net);
        if (cfg.stop_at_train_acc && row.train_acc >= *cfg.stop_at_train_acc) break;
        if (cfg.early_stop) {
            stale_epochs = improved ? 0 : stale_epochs + 1;
            if (stale_epochs >= cfg.early_stop->patience) {
                rec.stopped_early = true;
                break;
            }
        }
    }
    if (rec.rows.empty()) rec.best_value = std::numeric_limits<double>::quiet_NaN();
    return rec;
}

}  // namespace

std::string run_record_to_csv(const RunRecord& rec) {
    CsvWriter w({"stage", "epoch", "train_loss", "train_acc", "valid_loss", "valid_acc"});
    for (const EpochRow& r : rec.rows) {
        w.cell(to_string(r.stage)).cell(r.epoch).cell(r.train_loss).cell(r.train_acc);
        w.cell(r.valid_loss).cell(r.valid_acc);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// public stages
// ---------------------------------------------------------------------------

HeadProbeResult head_probe(const Network& model, const ClassificationDataset& train,
                           const ClassificationDataset* valid, const StageConfig& cfg,
                           RngState& rng) {
    require(cfg.stage == Stage::hp || cfg.stage == Stage::pretrain,
            "head_probe: config must be an HP (or pretrain) stage");
    HeadProbeResult out;
    out.model = model;
    if (cfg.epochs == 0) return out;  // tau = 0: untouched model, empty log

    const Matrix targets = smooth_labels(train.onehot, cfg.label_eta);
    StageView view{train.x, targets, &train.y};
    if (valid) {
        view.valid_x = &valid->x;
        view.valid_targets = &valid->onehot;
        view.valid_labels = &valid->y;
    }
    const bool full_model = (cfg.stage == Stage::pretrain);
    out.record = run_stage(out.model, view, cfg, rng, full_model, true, nullptr);
    return out;
}

namespace {

FinetuneResult finetune_impl(const Network& model, const StageView& view, const StageConfig& cfg,
                             const std::vector<int>& probe_ids, int snapshot_every, RngState& rng,
                             bool keep_epoch_models) {
    require(cfg.stage == Stage::ft, "finetune: config must be an FT stage");
    for (int id : probe_ids)
        require(id >= 0 && id < view.x.rows, "finetune: probe id out of range");

    FinetuneResult out;
    out.model = model;

    Matrix probe_x(static_cast<int>(probe_ids.size()), view.x.cols);
    for (size_t i = 0; i < probe_ids.size(); ++i) probe_x.set_row(static_cast<int>(i), view.x.row(probe_ids[i]));
    auto snap = [&](const Network& net, const std::string& tag) {
        FeatureSnapshot s;
        s.tag = tag;
        s.probe_ids = probe_ids;
        s.features = batch_features(net, probe_x);
        return s;
    };

    out.snapshots.push_back(snap(out.model, "z0"));
    if (keep_epoch_models) out.epoch_models.push_back(out.model);

    int last_mid_snapshot = -1;
    auto on_epoch = [&](int epochs_done, const Network& net) {
        if (keep_epoch_models) out.epoch_models.push_back(net);
        if (snapshot_every > 0 && epochs_done % snapshot_every == 0) {
            out.snapshots.push_back(snap(net, "zt(" + std::to_string(epochs_done) + ")"));
            last_mid_snapshot = epochs_done;
        }
    };

    out.record = run_stage(out.model, view, cfg, rng, true, true, on_epoch);

    const int t_final = out.record.rows.empty() ? 0 : out.record.rows.back().epoch;
    if (last_mid_snapshot == t_final && last_mid_snapshot > 0) out.snapshots.pop_back();
    out.snapshots.push_back(snap(out.model, "zT"));
    return out;
}

}  // namespace

FinetuneResult finetune(const Network& model, const ClassificationDataset& train,
                        const ClassificationDataset* valid, const StageConfig& cfg,
                        const std::vector<int>& probe_ids, int snapshot_every, RngState& rng,
                        bool keep_epoch_models) {
    const Matrix targets = smooth_labels(train.onehot, cfg.label_eta);
    StageView view{train.x, targets, &train.y};
    if (valid) {
        view.valid_x = &valid->x;
        view.valid_targets = &valid->onehot;
        view.valid_labels = &valid->y;
    }
    return finetune_impl(model, view, cfg, probe_ids, snapshot_every, rng, keep_epoch_models);
}

FinetuneResult finetune_targets(const Network& model, const Matrix& x, const Matrix& targets,
                                const StageConfig& cfg, const std::vector<int>& probe_ids,
                                int snapshot_every, RngState& rng, bool keep_epoch_models) {
    StageView view{x, targets, nullptr};
    return finetune_impl(model, view, cfg, probe_ids, snapshot_every, rng, keep_epoch_models);
}

// ---------------------------------------------------------------------------
// composed run
// ---------------------------------------------------------------------------

HpFtResult hp_ft_run(const std::vector<DenseLayer>& pretrained_backbone,
                     const HeadSpec& head_spec, const DownstreamData& data, const HpFtConfig& cfg,
                     RngState& rng) {
    require(!pretrained_backbone.empty(), "hp_ft_run: empty backbone");
    const uint64_t entry_state = rng.state;
    const int h = pretrained_backbone.back().w.rows;
    Network net;
    net.backbone = pretrained_backbone;
    net.head = make_head(head_spec.kind, h, data.train.num_classes(), head_spec.hidden_width, rng);
    HpFtResult out = hp_ft_run_model(net, data, cfg, rng);
    out.head_spec = head_spec;
    out.seed = entry_state;
    out.joined_record.seed = entry_state;
    return out;
}

HpFtResult hp_ft_run_model(const Network& start_model, const DownstreamData& data,
                           const HpFtConfig& cfg, RngState& rng) {
    require(!start_model.backbone.empty() && !start_model.head.empty(),
            "hp_ft_run: model needs backbone and head");
    require(cfg.hp.stage == Stage::hp, "hp_ft_run: first stage must be HP");
    require(cfg.ft.stage == Stage::ft, "hp_ft_run: second stage must be FT");
    require(data.train.num_classes() == data.valid.num_classes(),
            "hp_ft_run: train/valid class mismatch");
    require(start_model.output_dim() == data.train.num_classes(),
            "hp_ft_run: head output does not match the class count");

    HpFtResult out;
    out.data = data;
    out.cfg = cfg;
    out.seed = rng.state;

    const Network& net = start_model;
    out.model_init = net;

    RngState probe_rng = rng.fork();
    out.probe_ids = pick_probe_ids(data.train.n(), cfg.probe_count, probe_rng);

    HeadProbeResult hp = head_probe(net, data.train, &data.valid, cfg.hp, rng);
    out.model_after_hp = hp.model;
    out.hp_record = std::move(hp.record);

    out.aie_boundary = compute_aie(out.model_after_hp, data.train, cfg.ft.loss);

    FinetuneResult ft = finetune(out.model_after_hp, data.train, &data.valid, cfg.ft,
                                 out.probe_ids, cfg.snapshot_every, rng, cfg.keep_epoch_models);
    out.model_final = std::move(ft.model);
    out.ft_record = std::move(ft.record);
    out.snapshots = std::move(ft.snapshots);
    out.ft_epoch_models = std::move(ft.epoch_models);

    out.joined_record.seed = out.seed;
    out.joined_record.rows = out.hp_record.rows;
    const int tau_done = out.hp_record.rows.empty() ? 0 : out.hp_record.rows.back().epoch;
    for (EpochRow row : out.ft_record.rows) {
        row.epoch += tau_done;
        out.joined_record.rows.push_back(row);
    }
    out.joined_record.best_metric = out.ft_record.best_metric;
    out.joined_record.best_value = out.ft_record.best_value;
    out.joined_record.best_epoch = out.ft_record.best_epoch + tau_done;
    return out;
}

}  // namespace hpft
