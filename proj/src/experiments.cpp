// SPDX-License-Identifier: Apache-2.0
#include "hpft/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "hpft/csv.hpp"
#include "hpft/parallel.hpp"

namespace hpft {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

ordered_json stage_json(const StageConfig& cfg) {
    ordered_json j;
    j["stage"] = to_string(cfg.stage);
    j["epochs"] = cfg.epochs;
    j["lr"] = cfg.lr;
    j["momentum"] = cfg.momentum;
    j["batch_size"] = cfg.batch_size;
    j["loss"] = to_string(cfg.loss);
    j["label_eta"] = cfg.label_eta;
    if (cfg.early_stop) {
        j["early_stop"] = {{"metric", cfg.early_stop->metric},
                           {"patience", cfg.early_stop->patience},
                           {"min_delta", cfg.early_stop->min_delta}};
    }
    if (cfg.stop_at_train_acc) j["stop_at_train_acc"] = *cfg.stop_at_train_acc;
    return j;
}

std::string cell_echo(const std::string& study, const std::string& condition, uint64_t seed,
                      const HpFtConfig& cfg, const HeadSpec& head) {
    ordered_json j;
    j["study"] = study;
    j["condition"] = condition;
    j["seed"] = seed;
    j["head"] = {{"kind", to_string(head.kind)}, {"hidden_width", head.hidden_width}};
    j["hp"] = stage_json(cfg.hp);
    j["ft"] = stage_json(cfg.ft);
    j["probe_count"] = cfg.probe_count;
    j["snapshot_every"] = cfg.snapshot_every;
    return j.dump();
}

double sample_sd(const Vector& values) {
    const size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / (n - 1));
}

double mean_of(const Vector& values) {
    if (values.empty()) return kNan;
    double s = 0.0;
    for (double v : values) s += v;
    return s / values.size();
}

const FeatureSnapshot& find_snapshot(const HpFtResult& run, const std::string& tag) {
    for (const FeatureSnapshot& s : run.snapshots)
        if (s.tag == tag) return s;
    throw ContractViolation("run is missing the '" + tag + "' feature snapshot");
}

}  // namespace

double best_valid_acc(const RunRecord& rec) {
    double best = kNan;
    for (const EpochRow& r : rec.rows)
        if (std::isfinite(r.valid_acc) && (!std::isfinite(best) || r.valid_acc > best))
            best = r.valid_acc;
    return best;
}

double grad_decay_epochs(const DirectionRecord& dir) {
    if (dir.grad_head_norm.empty()) return kNan;
    const double g0 = dir.grad_head_norm.front();
    if (!(g0 > 0.0)) return kNan;
    for (size_t t = 1; t < dir.grad_head_norm.size(); ++t)
        if (dir.grad_head_norm[t] <= 0.5 * g0) return static_cast<double>(t);
    return kNan;
}

// ---------------------------------------------------------------------------
// pretraining
// ---------------------------------------------------------------------------

PretrainConfig default_pretrain_config() {
    PretrainConfig cfg;
    cfg.stage.stage = Stage::pretrain;
    cfg.stage.epochs = 200;
    cfg.stage.lr = 0.1;
    cfg.stage.momentum = 0.9;
    cfg.stage.batch_size = 64;
    cfg.stage.loss = LossKind::cross_entropy;
    return cfg;
}

PretrainResult pretrain_backbone(const PretrainConfig& cfg, RngState& rng) {
    require(cfg.stage.stage == Stage::pretrain, "pretrain_backbone: stage must be 'pretrain'");
    require(cfg.num_classes <= cfg.input_dim,
            "pretrain_backbone: need at least as many input dims as classes");
    require(!cfg.widths.empty(), "pretrain_backbone: empty backbone");
    require(cfg.target_train_acc > 0.0 && cfg.target_train_acc <= 1.0,
            "pretrain_backbone: target accuracy must be in (0, 1]");

    PretrainResult out;
    out.cfg = cfg;
    RngState data_rng(cfg.data_seed);
    out.data = gen_gaussian_classes(cfg.input_dim, cfg.num_classes, cfg.per_class,
                                    cfg.mean_radius, cfg.noise_sigma, data_rng);

    Network net;
    net.backbone = make_backbone(cfg.input_dim, cfg.widths, Activation::relu, rng);
    net.head = make_head(HeadKind::linear, cfg.widths.back(), cfg.num_classes, 0, rng);

    StageConfig stage = cfg.stage;
    stage.stop_at_train_acc = cfg.target_train_acc;
    HeadProbeResult trained = head_probe(net, out.data, nullptr, stage, rng);
    out.model = std::move(trained.model);
    out.record = std::move(trained.record);
    out.final_train_acc = out.record.rows.empty() ? 0.0 : out.record.rows.back().train_acc;
    require(out.final_train_acc >= cfg.target_train_acc,
            "pretrain_backbone: target accuracy unreachable within the epoch cap; final "
            "training accuracy = " +
                fmt9(out.final_train_acc));
    return out;
}

// ---------------------------------------------------------------------------
// downstream tasks
// ---------------------------------------------------------------------------

DownstreamData make_downstream(const PretrainConfig& pre, const DownstreamConfig& cfg) {
    require(!cfg.class_subset.empty(), "make_downstream: empty class subset");
    for (int c : cfg.class_subset)
        require(c >= 0 && c < pre.num_classes, "make_downstream: class id outside pretrain set");
    require(cfg.per_class_train >= 1 && cfg.per_class_valid >= 1,
            "make_downstream: split sizes must be positive");
    require(cfg.per_class_train + cfg.per_class_valid <= pre.per_class,
            "make_downstream: split larger than the per-class sample pool");

    RngState data_rng(pre.data_seed);  // identical stream -> identical class means
    const ClassificationDataset pool =
        gen_gaussian_classes(pre.input_dim, pre.num_classes, pre.per_class, pre.mean_radius,
                             pre.noise_sigma, data_rng);

    ShiftSpec spec;
    spec.class_subset = cfg.class_subset;
    spec.rotation_angle = cfg.rotation_angle;
    spec.scale = cfg.scale;
    spec.per_class_count = cfg.per_class_train + cfg.per_class_valid;
    spec.extra_noise_sigma = cfg.extra_noise_sigma;
    RngState shift_rng(cfg.shift_seed);
    const ClassificationDataset shifted = apply_shift(pool, spec, shift_rng);

    const int kk = static_cast<int>(cfg.class_subset.size());
    const int block = spec.per_class_count;
    DownstreamData out;
    auto carve = [&](int offset, int count, const std::string& split) {
        ClassificationDataset ds;
        ds.split = split;
        ds.x = Matrix(kk * count, shifted.dim());
        ds.y.resize(static_cast<size_t>(kk) * count);
        ds.onehot = Matrix(kk * count, kk);
        int row = 0;
        for (int c = 0; c < kk; ++c)
            for (int i = 0; i < count; ++i, ++row) {
                const int src = c * block + offset + i;
                ds.x.set_row(row, shifted.x.row(src));
                ds.y[row] = shifted.y[src];
                ds.onehot(row, ds.y[row]) = 1.0;
            }
        return ds;
    };
    out.train = carve(0, cfg.per_class_train, "train");
    out.valid = carve(cfg.per_class_train, cfg.per_class_valid, "valid");
    return out;
}

// ---------------------------------------------------------------------------
// probing-epochs sweep
// ---------------------------------------------------------------------------

SweepResult sweep_tau(const Network& pretrained, const DownstreamData& data,
                      const std::vector<int>& tau_grid, const HpFtConfig& base_cfg,
                      const HeadSpec& head, const std::vector<uint64_t>& seeds, int threads) {
    require(!tau_grid.empty(), "sweep_tau: empty tau grid");
    require(!seeds.empty(), "sweep_tau: need at least one seed");
    for (int tau : tau_grid) require(tau >= 0, "sweep_tau: negative tau");

    SweepResult sr;
    sr.tau_grid = tau_grid;
    std::sort(sr.tau_grid.begin(), sr.tau_grid.end());
    sr.tau_grid.erase(std::unique(sr.tau_grid.begin(), sr.tau_grid.end()), sr.tau_grid.end());

    const int n_tau = static_cast<int>(sr.tau_grid.size());
    const int n_seed = static_cast<int>(seeds.size());
    sr.cells.resize(static_cast<size_t>(n_tau) * n_seed);

    parallel_for(n_tau * n_seed, threads, [&](int idx) {
        const int ti = idx / n_seed;
        const int si = idx % n_seed;
        SweepCell& cell = sr.cells[idx];
        cell.tau = sr.tau_grid[ti];
        cell.seed = seeds[si];

        HpFtConfig cfg = base_cfg;
        cfg.hp.epochs = cell.tau;
        cfg.keep_epoch_models = false;
        cell.config_echo =
            cell_echo("sweep_tau", "tau_" + std::to_string(cell.tau), cell.seed, cfg, head);
        RngState rng(cell.seed);
        try {
            HpFtResult run = hp_ft_run(pretrained.backbone, head, data, cfg, rng);
            cell.hp_train_acc = accuracy(run.model_after_hp, data.train.x, data.train.y);
            cell.e_aie = run.aie_boundary.e_aie;
            cell.ft_valid_acc = best_valid_acc(run.ft_record);
            cell.adapt = adaptation_report(find_snapshot(run, "z0"), find_snapshot(run, "zT"));
            cell.final_model = std::move(run.model_final);
        } catch (const DivergenceError&) {
            cell.diverged = true;
        }
    });

    sr.mean_hp_train_acc.assign(n_tau, kNan);
    sr.mean_e_aie.assign(n_tau, kNan);
    sr.mean_ft_valid_acc.assign(n_tau, kNan);
    sr.mean_d_euc.assign(n_tau, kNan);
    sr.mean_d_cos.assign(n_tau, kNan);
    sr.sd_ft_valid_acc.assign(n_tau, 0.0);
    sr.sd_d_euc.assign(n_tau, 0.0);
    sr.sd_d_cos.assign(n_tau, 0.0);
    sr.valid_cells.assign(n_tau, 0);

    for (int ti = 0; ti < n_tau; ++ti) {
        Vector hp_acc, aie, ft_acc, d_euc, d_cos;
        for (int si = 0; si < n_seed; ++si) {
            const SweepCell& cell = sr.cells[static_cast<size_t>(ti) * n_seed + si];
            if (cell.diverged) continue;
            hp_acc.push_back(cell.hp_train_acc);
            aie.push_back(cell.e_aie);
            ft_acc.push_back(cell.ft_valid_acc);
            d_euc.push_back(cell.adapt.mean_d_euc);
            d_cos.push_back(cell.adapt.mean_d_cos);
        }
        sr.valid_cells[ti] = static_cast<int>(ft_acc.size());
        if (ft_acc.empty()) continue;
        sr.mean_hp_train_acc[ti] = mean_of(hp_acc);
        sr.mean_e_aie[ti] = mean_of(aie);
        sr.mean_ft_valid_acc[ti] = mean_of(ft_acc);
        sr.mean_d_euc[ti] = mean_of(d_euc);
        sr.mean_d_cos[ti] = mean_of(d_cos);
        sr.sd_ft_valid_acc[ti] = sample_sd(ft_acc);
        sr.sd_d_euc[ti] = sample_sd(d_euc);
        sr.sd_d_cos[ti] = sample_sd(d_cos);
    }

    int best = -1;
    for (int ti = 0; ti < n_tau; ++ti) {
        if (sr.valid_cells[ti] == 0) continue;
        if (best < 0 || sr.mean_ft_valid_acc[ti] > sr.mean_ft_valid_acc[best]) best = ti;
    }
    require(best >= 0, "sweep_tau: every cell diverged");
    sr.tau_star = sr.tau_grid[best];
    sr.interior_optimum = best > 0 && best + 1 < n_tau;
    return sr;
}

std::string sweep_cells_to_csv(const SweepResult& sr) {
    CsvWriter w({"tau", "seed", "diverged", "hp_train_acc", "e_aie", "ft_valid_acc", "d_euc",
                 "d_cos"});
    for (const SweepCell& c : sr.cells) {
        w.cell(c.tau).cell(std::to_string(c.seed)).cell(c.diverged ? 1 : 0);
        if (c.diverged) {
            w.cell(kNan).cell(kNan).cell(kNan).cell(kNan).cell(kNan);
        } else {
            w.cell(c.hp_train_acc).cell(c.e_aie).cell(c.ft_valid_acc);
            w.cell(c.adapt.mean_d_euc).cell(c.adapt.mean_d_cos);
        }
        w.end_row();
    }
    return w.str();
}

std::string sweep_summary_to_csv(const SweepResult& sr) {
    CsvWriter w({"tau", "valid_cells", "mean_hp_train_acc", "mean_e_aie", "mean_ft_valid_acc",
                 "mean_d_euc", "mean_d_cos", "sd_ft_valid_acc", "sd_d_euc", "sd_d_cos",
                 "is_tau_star"});
    for (size_t ti = 0; ti < sr.tau_grid.size(); ++ti) {
        w.cell(sr.tau_grid[ti]).cell(sr.valid_cells[ti]).cell(sr.mean_hp_train_acc[ti]);
        w.cell(sr.mean_e_aie[ti]).cell(sr.mean_ft_valid_acc[ti]).cell(sr.mean_d_euc[ti]);
        w.cell(sr.mean_d_cos[ti]).cell(sr.sd_ft_valid_acc[ti]).cell(sr.sd_d_euc[ti]);
        w.cell(sr.sd_d_cos[ti]).cell(sr.tau_grid[ti] == sr.tau_star ? 1 : 0);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// protocol studies
// ---------------------------------------------------------------------------

namespace {

struct CellSpec {
    std::string condition;
    uint64_t seed = 0;
    HpFtConfig cfg;
    HeadSpec head;
    int n_last = -1;          // >= 0: move that many backbone layers into the head
    double expected_residual = kNan;  // label-smoothing expectation, when applicable
    bool want_grad_decay = false;
};

ProtocolReport run_protocol(const std::string& study, const Network& pretrained,
                            const DownstreamData& data, const std::vector<CellSpec>& specs,
                            int threads) {
    ProtocolReport rep;
    rep.study = study;
    rep.rows.resize(specs.size());

    parallel_for(static_cast<int>(specs.size()), threads, [&](int idx) {
        const CellSpec& spec = specs[idx];
        ProtocolRow& row = rep.rows[idx];
        row.condition = spec.condition;
        row.seed = spec.seed;
        row.n_last = spec.n_last;
        row.residual_energy = kNan;
        row.expected_residual = spec.expected_residual;
        row.grad_decay_epochs = kNan;
        row.config_echo = cell_echo(study, spec.condition, spec.seed, spec.cfg, spec.head);

        RngState rng(spec.seed);
        try {
            HpFtResult run = [&] {
                if (spec.n_last < 0)
                    return hp_ft_run(pretrained.backbone, spec.head, data, spec.cfg, rng);
                Network model;
                model.backbone = pretrained.backbone;
                model.head = make_head(spec.head.kind, pretrained.feature_dim(),
                                       data.train.num_classes(), spec.head.hidden_width, rng);
                model = reinit_partial_backbone(model, spec.n_last, rng);
                return hp_ft_run_model(model, data, spec.cfg, rng);
            }();
            row.hp_train_acc = accuracy(run.model_after_hp, data.train.x, data.train.y);
            row.e_aie = run.aie_boundary.e_aie;
            row.residual_energy = run.aie_boundary.e_aie;
            row.ft_valid_acc = best_valid_acc(run.ft_record);
            const AdaptationReport adapt =
                adaptation_report(find_snapshot(run, "z0"), find_snapshot(run, "zT"));
            row.one_minus_cos = 1.0 - adapt.mean_d_cos;
            row.d_euc = adapt.mean_d_euc;
            if (spec.want_grad_decay) row.grad_decay_epochs = grad_decay_epochs(track_direction(run));
        } catch (const DivergenceError&) {
            row.diverged = true;
        }
    });

    // aggregate per condition, order of first appearance
    for (const ProtocolRow& row : rep.rows) {
        ConditionSummary* cs = nullptr;
        for (ConditionSummary& s : rep.summary)
            if (s.condition == row.condition) cs = &s;
        if (!cs) {
            rep.summary.push_back({});
            rep.summary.back().condition = row.condition;
            cs = &rep.summary.back();
        }
    }
    for (ConditionSummary& cs : rep.summary) {
        Vector hp_acc, aie, ft_acc, omc, d_euc, res, exp_res, decay;
        for (const ProtocolRow& row : rep.rows) {
            if (row.condition != cs.condition || row.diverged) continue;
            hp_acc.push_back(row.hp_train_acc);
            aie.push_back(row.e_aie);
            ft_acc.push_back(row.ft_valid_acc);
            omc.push_back(row.one_minus_cos);
            d_euc.push_back(row.d_euc);
            if (std::isfinite(row.residual_energy)) res.push_back(row.residual_energy);
            if (std::isfinite(row.expected_residual)) exp_res.push_back(row.expected_residual);
            if (std::isfinite(row.grad_decay_epochs)) decay.push_back(row.grad_decay_epochs);
        }
        cs.rows = static_cast<int>(ft_acc.size());
        cs.mean_hp_train_acc = mean_of(hp_acc);
        cs.mean_e_aie = mean_of(aie);
        cs.mean_ft_valid_acc = mean_of(ft_acc);
        cs.mean_one_minus_cos = mean_of(omc);
        cs.mean_d_euc = mean_of(d_euc);
        cs.sd_ft_valid_acc = sample_sd(ft_acc);
        cs.sd_one_minus_cos = sample_sd(omc);
        cs.sd_d_euc = sample_sd(d_euc);
        cs.mean_residual_energy = mean_of(res);
        cs.mean_expected_residual = mean_of(exp_res);
        cs.mean_grad_decay_epochs = mean_of(decay);
    }
    return rep;
}

}  // namespace

std::string protocol_rows_to_csv(const ProtocolReport& rep) {
    CsvWriter w({"condition", "seed", "diverged", "hp_train_acc", "e_aie", "ft_valid_acc",
                 "one_minus_cos", "d_euc", "residual_energy", "expected_residual",
                 "grad_decay_epochs", "n_last"});
    for (const ProtocolRow& r : rep.rows) {
        w.cell(r.condition).cell(std::to_string(r.seed)).cell(r.diverged ? 1 : 0);
        w.cell(r.hp_train_acc).cell(r.e_aie).cell(r.ft_valid_acc).cell(r.one_minus_cos);
        w.cell(r.d_euc).cell(r.residual_energy).cell(r.expected_residual);
        w.cell(r.grad_decay_epochs).cell(r.n_last);
        w.end_row();
    }
    return w.str();
}

std::string protocol_summary_to_csv(const ProtocolReport& rep) {
    CsvWriter w({"condition", "rows", "mean_hp_train_acc", "mean_e_aie", "mean_ft_valid_acc",
                 "mean_one_minus_cos", "mean_d_euc", "sd_ft_valid_acc", "sd_one_minus_cos",
                 "sd_d_euc", "mean_residual_energy", "mean_expected_residual",
                 "mean_grad_decay_epochs"});
    for (const ConditionSummary& s : rep.summary) {
        w.cell(s.condition).cell(s.rows).cell(s.mean_hp_train_acc).cell(s.mean_e_aie);
        w.cell(s.mean_ft_valid_acc).cell(s.mean_one_minus_cos).cell(s.mean_d_euc);
        w.cell(s.sd_ft_valid_acc).cell(s.sd_one_minus_cos).cell(s.sd_d_euc);
        w.cell(s.mean_residual_energy).cell(s.mean_expected_residual);
        w.cell(s.mean_grad_decay_epochs);
        w.end_row();
    }
    return w.str();
}

ProtocolReport ls_hp_study(const Network& pretrained, const DownstreamData& data,
                           const HpFtConfig& base_cfg, double eta_hp, double eta_ft,
                           const std::vector<uint64_t>& seeds, int threads) {
    require(eta_hp > 0.0 && eta_hp <= 1.0 && eta_ft > 0.0 && eta_ft <= 1.0,
            "ls_hp_study: smoothing factors must be in (0, 1]");
    require(!seeds.empty(), "ls_hp_study: need at least one seed");

    const int k = data.train.num_classes();
    const double full_gap = std::sqrt((k - 1.0) / k);  // ||e_y - uniform||_2
    const std::vector<std::pair<double, double>> conditions = {
        {1.0, 1.0}, {eta_hp, 1.0}, {eta_hp, eta_ft}, {1.0, eta_ft}};

    std::vector<CellSpec> specs;
    HeadSpec head;  // linear
    for (const auto& [ehp, eft] : conditions)
        for (uint64_t seed : seeds) {
            CellSpec spec;
            spec.condition = "hp" + fmt9(ehp) + "_ft" + fmt9(eft);
            spec.seed = seed;
            spec.cfg = base_cfg;
            spec.cfg.hp.label_eta = ehp;
            spec.cfg.ft.label_eta = eft;
            spec.cfg.keep_epoch_models = false;
            spec.head = head;
            spec.expected_residual = (1.0 - ehp) * full_gap;
            specs.push_back(std::move(spec));
        }
    return run_protocol("ls_hp", pretrained, data, specs, threads);
}

ProtocolReport head_capacity_study(const Network& pretrained, const DownstreamData& data,
                                   const HpFtConfig& base_cfg, int mlp_hidden_width,
                                   const std::vector<uint64_t>& seeds, int threads) {
    require(!seeds.empty(), "head_capacity_study: need at least one seed");
    std::vector<CellSpec> specs;
    for (HeadKind kind : {HeadKind::linear, HeadKind::mlp2})
        for (uint64_t seed : seeds) {
            CellSpec spec;
            spec.condition = to_string(kind);
            spec.seed = seed;
            spec.cfg = base_cfg;
            spec.cfg.hp.stop_at_train_acc = 1.0;
            spec.cfg.keep_epoch_models = true;
            spec.head.kind = kind;
            spec.head.hidden_width = mlp_hidden_width;
            spec.want_grad_decay = true;
            specs.push_back(std::move(spec));
        }
    return run_protocol("head_capacity", pretrained, data, specs, threads);
}

ProtocolReport partial_backbone_study(const Network& pretrained, const DownstreamData& data,
                                      const std::vector<int>& n_last, const HpFtConfig& base_cfg,
                                      const HeadSpec& head, const std::vector<uint64_t>& seeds,
                                      int threads) {
    require(!n_last.empty(), "partial_backbone_study: empty variant list");
    require(!seeds.empty(), "partial_backbone_study: need at least one seed");
    for (int n : n_last)
        require(n >= 0 && n < static_cast<int>(pretrained.backbone.size()),
                "partial_backbone_study: n_last must be smaller than the backbone depth");

    std::vector<CellSpec> specs;
    for (int n : n_last)
        for (uint64_t seed : seeds) {
            CellSpec spec;
            spec.condition = "n_last_" + std::to_string(n);
            spec.seed = seed;
            spec.cfg = base_cfg;
            spec.cfg.keep_epoch_models = false;
            spec.head = head;
            spec.n_last = n;
            specs.push_back(std::move(spec));
        }
    return run_protocol("partial_backbone", pretrained, data, specs, threads);
}

// ---------------------------------------------------------------------------
// closed-form trend battery
// ---------------------------------------------------------------------------

namespace {

int argmax_index(const Vector& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}
int argmin_index(const Vector& v) {
    return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
}

double max_abs(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

bool second_diff_sign_ok(const Vector& beta, const Vector& f, bool want_convex, double tol) {
    for (size_t i = 1; i + 1 < f.size(); ++i) {
        const double h1 = beta[i] - beta[i - 1];
        const double h2 = beta[i + 1] - beta[i];
        const double d2 = (f[i + 1] - f[i]) / h2 - (f[i] - f[i - 1]) / h1;
        if (want_convex ? d2 < -tol : d2 > tol) return false;
    }
    return true;
}

bool unimodal_about(const Vector& f, int peak, double tol) {
    for (int i = 1; i <= peak; ++i)
        if (f[i] < f[i - 1] - tol) return false;
    for (size_t i = peak + 1; i < f.size(); ++i)
        if (f[i] > f[i - 1] + tol) return false;
    return true;
}

int phase_rank(PhaseTag tag) {
    switch (tag) {
        case PhaseTag::collapse: return 0;
        case PhaseTag::rotate: return 1;
        case PhaseTag::stretch: return 2;
        case PhaseTag::tiny_side: return 3;
        default: return -1;
    }
}

}  // namespace

TrendSuiteResult trend_suite(int battery_size, const Vector& beta_grid, uint64_t seed0,
                             int threads) {
    require(battery_size >= 1, "trend_suite: empty battery");
    require(beta_grid.size() >= 5, "trend_suite: grid too small");

    TrendSuiteResult ts;
    ts.beta_grid = beta_grid;
    ts.verdicts.resize(battery_size);
    ts.alpha_base.assign(battery_size, kNan);
    ts.alpha_b_scaled.assign(battery_size, kNan);
    ts.alpha_v_scaled.assign(battery_size, kNan);

    double max_step = 0.0;
    for (size_t i = 0; i + 1 < beta_grid.size(); ++i)
        max_step = std::max(max_step, beta_grid[i + 1] - beta_grid[i]);

    parallel_for(battery_size, threads, [&](int i) {
        TrendVerdict& v = ts.verdicts[i];
        v.seed = seed0 + static_cast<uint64_t>(i);
        RngState rng(v.seed);
        const LinearInstance inst = make_random_instance(256, 320, 10, 1.0, 1.0, rng);
        const TrendCurve curve = trend_curves(inst, beta_grid);
        const CriticalPoints cp = critical_points(inst);

        v.alpha = cp.alpha_summary;
        v.alpha_spread = cp.alpha_spread;
        v.beta_ray = cp.beta_norm_star_ray;
        v.favorable = cp.norm_curvature_ok;
        v.alpha_valid = cp.c2m2c1_invertible && std::isfinite(cp.alpha_summary) &&
                        cp.alpha_summary > 0.0 && cp.alpha_summary < 0.5;
        ts.alpha_base[i] = cp.alpha_summary;

        const int dot_peak = argmax_index(curve.d_dot);
        v.dot_max_ok = std::fabs(beta_grid[dot_peak] - 0.5) <= max_step + 1e-9;

        // the minimum must land on the grid point closest to beta = 1
        int closest_to_one = 0;
        for (size_t g = 1; g < beta_grid.size(); ++g)
            if (std::fabs(beta_grid[g] - 1.0) < std::fabs(beta_grid[closest_to_one] - 1.0))
                closest_to_one = static_cast<int>(g);
        v.euc_min_ok = argmin_index(curve.d_euc) == closest_to_one;

        v.dot_concave =
            second_diff_sign_ok(beta_grid, curve.d_dot, false, 1e-9 * (max_abs(curve.d_dot) + 1.0));
        v.euc_convex =
            second_diff_sign_ok(beta_grid, curve.d_euc, true, 1e-9 * (max_abs(curve.d_euc) + 1.0));

        const int norm_peak = argmax_index(curve.zt_norm);
        if (v.favorable) {
            const double tol = 1e-9 * (max_abs(curve.zt_norm) + 1.0);
            v.norm_unimodal = unimodal_about(curve.zt_norm, norm_peak, tol);
            if (v.alpha_valid)
                v.norm_argmax_near_alpha =
                    std::fabs(beta_grid[norm_peak] - cp.alpha_summary) <= 2.0 * max_step + 1e-9;
        }

        if (v.alpha_valid) {
            v.phase_order_ok = true;
            int prev = -1;
            for (PhaseTag tag : curve.phase) {
                const int rank = phase_rank(tag);
                if (rank < 0 || rank < prev) {
                    v.phase_order_ok = false;
                    break;
                }
                prev = rank;
            }
        }

        LinearInstance b_scaled = inst;
        b_scaled.b0 = scale(inst.b0, 100.0);
        ts.alpha_b_scaled[i] = critical_points(b_scaled).alpha_summary;
        LinearInstance v_scaled = inst;
        v_scaled.v0 = vscale(inst.v0, 100.0);
        ts.alpha_v_scaled[i] = critical_points(v_scaled).alpha_summary;
    });

    int dot_ok = 0, euc_ok = 0, concave_ok = 0, convex_ok = 0, norm_ok = 0, phase_ok = 0;
    for (const TrendVerdict& v : ts.verdicts) {
        dot_ok += v.dot_max_ok;
        euc_ok += v.euc_min_ok;
        concave_ok += v.dot_concave;
        convex_ok += v.euc_convex;
        if (v.favorable) {
            ++ts.favorable_count;
            norm_ok += v.norm_argmax_near_alpha;
        }
        if (v.alpha_valid) {
            ++ts.valid_alpha_count;
            phase_ok += v.phase_order_ok;
        }
    }
    const double n = battery_size;
    ts.dot_max_pass_rate = dot_ok / n;
    ts.euc_min_pass_rate = euc_ok / n;
    ts.dot_concave_rate = concave_ok / n;
    ts.euc_convex_rate = convex_ok / n;
    ts.norm_argmax_rate = ts.favorable_count ? norm_ok / double(ts.favorable_count) : 0.0;
    ts.phase_order_rate = ts.valid_alpha_count ? phase_ok / double(ts.valid_alpha_count) : 0.0;
    return ts;
}

std::string trend_verdicts_to_csv(const TrendSuiteResult& ts) {
    CsvWriter w({"seed", "alpha", "alpha_spread", "beta_ray", "favorable", "dot_max_ok",
                 "euc_min_ok", "dot_concave", "euc_convex", "norm_unimodal",
                 "norm_argmax_near_alpha", "phase_order_ok", "alpha_valid", "alpha_b_scaled",
                 "alpha_v_scaled"});
    for (size_t i = 0; i < ts.verdicts.size(); ++i) {
        const TrendVerdict& v = ts.verdicts[i];
        w.cell(std::to_string(v.seed)).cell(v.alpha).cell(v.alpha_spread).cell(v.beta_ray);
        w.cell(v.favorable ? 1 : 0).cell(v.dot_max_ok ? 1 : 0).cell(v.euc_min_ok ? 1 : 0);
        w.cell(v.dot_concave ? 1 : 0).cell(v.euc_convex ? 1 : 0).cell(v.norm_unimodal ? 1 : 0);
        w.cell(v.norm_argmax_near_alpha ? 1 : 0).cell(v.phase_order_ok ? 1 : 0);
        w.cell(v.alpha_valid ? 1 : 0).cell(ts.alpha_b_scaled[i]).cell(ts.alpha_v_scaled[i]);
        w.end_row();
    }
    return w.str();
}

}  // namespace hpft
