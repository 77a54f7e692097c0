// SPDX-License-Identifier: Apache-2.0
//
// hpft — command-line laboratory runner.
//
// Commands: gen-data, pretrain, run, sweep, analyze, exchange, trend,
// report, plus `schema` (prints / checks the embedded config schema).
// Exit codes: 0 success, 2 config error, 3 output conflict, 4 missing
// input, 5 numerical divergence.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpft/adapt_metrics.hpp"
#include "hpft/config.hpp"
#include "hpft/csv.hpp"
#include "hpft/dynamics.hpp"
#include "hpft/experiments.hpp"
#include "hpft/parallel.hpp"
#include "hpft/store.hpp"

namespace fs = std::filesystem;
using hpft::fmt9;
using ordered_json = nlohmann::ordered_json;

namespace {

struct Opts {
    std::string config_path;
    std::string out_dir;
    bool force = false;
    int threads = 0;           // 0 = number of cores
    long long seed = -1;       // <0 = keep the config's seed
    std::string check_path;    // schema --check
};

ordered_json load_config_file(const std::string& path) {
    const std::string text = hpft::read_text_file(path);
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw hpft::ConfigError("config is not valid JSON (" + path + "): " + e.what());
    }
}

ordered_json sub(const ordered_json& cfg, const std::string& key) {
    return cfg.contains(key) ? cfg.at(key) : ordered_json();
}

uint64_t effective_seed(const ordered_json& cfg, const std::string& key, uint64_t fallback,
                        long long cli_seed) {
    if (cli_seed >= 0) return static_cast<uint64_t>(cli_seed);
    if (cfg.contains(key)) return cfg.at(key).get<uint64_t>();
    return fallback;
}

std::string snapshot_filename(const std::string& tag) {
    std::string name;
    for (char c : tag) {
        if (c == '(')
            name += '_';
        else if (c != ')')
            name += c;
    }
    return "snapshots/" + name + ".csv";
}

ordered_json bound_to_json(const hpft::AieBoundReport& b) {
    ordered_json j;
    j["lhs"] = b.lhs;
    j["e_aie"] = b.e_aie;
    j["gamma"] = b.gamma;
    j["t_epochs"] = b.t_epochs;
    j["c1"] = b.c1;
    j["c2"] = b.c2;
    j["c"] = b.c;
    j["rhs"] = b.rhs;
    j["holds"] = b.holds;
    j["slack"] = b.slack;
    j["c2_exact"] = b.c2_exact;
    j["stable_fraction"] = b.stable_fraction;
    return j;
}

std::string bound_to_csv(const hpft::AieBoundReport& b) {
    hpft::CsvWriter w({"lhs", "e_aie", "gamma", "t_epochs", "c1", "c2", "c", "rhs", "holds",
                       "slack", "c2_exact", "stable_fraction"});
    w.cell(b.lhs).cell(b.e_aie).cell(b.gamma).cell(b.t_epochs).cell(b.c1).cell(b.c2);
    w.cell(b.c).cell(b.rhs).cell(b.holds ? 1 : 0).cell(b.slack).cell(b.c2_exact ? 1 : 0);
    w.cell(b.stable_fraction);
    w.end_row();
    return w.str();
}

std::string epoch_energy_to_csv(const hpft::AieBoundReport& b) {
    hpft::CsvWriter w({"epoch", "e_aie"});
    for (size_t t = 0; t < b.per_epoch_energy.size(); ++t) {
        w.cell(static_cast<int>(t)).cell(b.per_epoch_energy[t]);
        w.end_row();
    }
    return w.str();
}

std::string decomposition_to_csv(const hpft::StepDecomposition& dec) {
    hpft::CsvWriter w({"probe_id", "residual_backbone_only", "residual_joint", "predicted_norm",
                       "actual_backbone_norm", "actual_joint_norm"});
    for (size_t j = 0; j < dec.probe_ids.size(); ++j) {
        const int r = static_cast<int>(j);
        w.cell(dec.probe_ids[j]).cell(dec.residual_backbone_only[j]).cell(dec.residual_joint[j]);
        w.cell(hpft::norm2(dec.predicted.row(r)));
        w.cell(hpft::norm2(dec.actual_backbone_only.row(r)));
        w.cell(hpft::norm2(dec.actual_joint.row(r)));
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

int cmd_schema(const Opts& opt) {
    if (opt.check_path.empty()) {
        std::cout << hpft::config_schema_text();
        return 0;
    }
    const std::string published = hpft::read_text_file(opt.check_path);
    if (published != hpft::config_schema_text()) {
        std::cerr << "schema mismatch: " << opt.check_path
                  << " differs from the schema embedded in this binary\n";
        return 1;
    }
    std::cout << "schema matches " << opt.check_path << "\n";
    return 0;
}

int cmd_gen_data(const ordered_json& cfg, const Opts& opt) {
    hpft::PretrainConfig pre = hpft::parse_pretrain_config(sub(cfg, "pretrain"));
    if (opt.seed >= 0) pre.data_seed = static_cast<uint64_t>(opt.seed);

    hpft::RunStore store(opt.out_dir, opt.force);
    hpft::RngState rng(pre.data_seed);
    const hpft::ClassificationDataset pool =
        hpft::gen_gaussian_classes(pre.input_dim, pre.num_classes, pre.per_class,
                                   pre.mean_radius, pre.noise_sigma, rng);
    store.put("data/pretrain.csv", hpft::dataset_to_csv(pool));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["pretrain"] = hpft::pretrain_config_to_json(pre);
    ordered_json results;
    results["pretrain_rows"] = pool.n();

    if (cfg.contains("downstream")) {
        const hpft::DownstreamConfig ds = hpft::parse_downstream_config(cfg.at("downstream"));
        const hpft::DownstreamData data = hpft::make_downstream(pre, ds);
        store.put("data/downstream_train.csv", hpft::dataset_to_csv(data.train));
        store.put("data/downstream_valid.csv", hpft::dataset_to_csv(data.valid));
        echo["downstream"] = hpft::downstream_config_to_json(ds);
        results["downstream_train_rows"] = data.train.n();
        results["downstream_valid_rows"] = data.valid.n();
    }
    store.finalize("gen-data", echo, results);
    std::cout << "gen-data: wrote datasets to " << store.root() << "\n";
    return 0;
}

int cmd_pretrain(const ordered_json& cfg, const Opts& opt) {
    const hpft::PretrainConfig pre = hpft::parse_pretrain_config(sub(cfg, "pretrain"));
    const uint64_t seed = effective_seed(cfg, "seed", 1, opt.seed);

    hpft::RunStore store(opt.out_dir, opt.force);
    hpft::RngState rng(seed);
    const hpft::PretrainResult res = hpft::pretrain_backbone(pre, rng);

    ordered_json meta;
    meta["pretrain"] = hpft::pretrain_config_to_json(pre);
    meta["seed"] = seed;
    meta["final_train_acc"] = res.final_train_acc;
    store.put("checkpoints/pretrained.json", hpft::network_to_json(res.model, meta));
    store.put("metrics/pretrain.csv", hpft::run_record_to_csv(res.record));
    store.put("data/pretrain.csv", hpft::dataset_to_csv(res.data));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["pretrain"] = meta["pretrain"];
    echo["seed"] = seed;
    ordered_json results;
    results["final_train_acc"] = res.final_train_acc;
    results["epochs_run"] = res.record.rows.size();
    store.finalize("pretrain", echo, results);
    std::cout << "pretrain: training accuracy " << fmt9(res.final_train_acc) << " after "
              << res.record.rows.size() << " epochs; checkpoint in " << store.root() << "\n";
    return 0;
}

struct LoadedCheckpoint {
    hpft::Network model;
    hpft::PretrainConfig pre;
};

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const std::string text = hpft::read_text_file(path);
    LoadedCheckpoint out;
    out.model = hpft::network_from_json(text);
    const ordered_json meta = hpft::network_meta_from_json(text);
    if (!meta.is_object() || !meta.contains("pretrain"))
        throw hpft::MissingInputError(
            "checkpoint lacks the pretraining metadata needed to rebuild downstream data: " +
            path);
    out.pre = hpft::parse_pretrain_config(meta.at("pretrain"));
    return out;
}

int cmd_run(const ordered_json& cfg, const Opts& opt) {
    const LoadedCheckpoint ckpt = load_checkpoint(cfg.at("checkpoint").get<std::string>());
    const hpft::DownstreamConfig ds_cfg = hpft::parse_downstream_config(sub(cfg, "downstream"));
    hpft::HpFtConfig run_cfg = hpft::parse_hpft_config(sub(cfg, "hpft"));
    run_cfg.keep_epoch_models = true;
    const hpft::HeadSpec head = hpft::parse_head_spec(sub(cfg, "head"));
    const uint64_t seed = effective_seed(cfg, "seed", 1, opt.seed);
    const int ntk_probes = cfg.contains("ntk_probes") ? cfg.at("ntk_probes").get<int>() : 8;

    hpft::RunStore store(opt.out_dir, opt.force);
    const hpft::DownstreamData data = hpft::make_downstream(ckpt.pre, ds_cfg);

    hpft::RngState rng(seed);
    const hpft::HpFtResult run = hpft::hp_ft_run(ckpt.model.backbone, head, data, run_cfg, rng);
    hpft::RngState ntk_rng = rng.fork();

    const hpft::DirectionRecord dir = hpft::track_direction(run);
    const hpft::NtkProbeRecord ntk = hpft::ntk_probe(run, ntk_probes, ntk_rng);
    const hpft::AieBoundReport bound = hpft::check_aie_bound(run, ntk, dir);
    const hpft::StepDecomposition dec = hpft::decompose_step(
        run.model_after_hp, data.train, run_cfg.ft.loss, run_cfg.ft.lr, run.probe_ids);
    const hpft::AdaptationReport adapt =
        hpft::adaptation_report(run.snapshots.front(), run.snapshots.back());
    const hpft::PcaScatter pca = hpft::pca_scatter_export(run.snapshots, data.train.y);

    store.put("data/train.csv", hpft::dataset_to_csv(data.train));
    store.put("data/valid.csv", hpft::dataset_to_csv(data.valid));
    store.put("checkpoints/model_init.json", hpft::network_to_json(run.model_init));
    store.put("checkpoints/model_after_hp.json", hpft::network_to_json(run.model_after_hp));
    store.put("checkpoints/model_final.json", hpft::network_to_json(run.model_final));
    for (size_t t = 0; t < run.ft_epoch_models.size(); ++t) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoints/ft_epoch_%04d.json",
                      static_cast<int>(t));
        store.put(name, hpft::network_to_json(run.ft_epoch_models[t]));
    }
    for (const hpft::FeatureSnapshot& snap : run.snapshots)
        store.put(snapshot_filename(snap.tag), hpft::snapshot_to_csv(snap));
    store.put("metrics/run.csv", hpft::run_record_to_csv(run.joined_record));
    store.put("metrics/energy_boundary.csv", hpft::energy_report_to_csv(run.aie_boundary));
    store.put("metrics/direction.csv", hpft::direction_record_to_csv(dir));
    store.put("metrics/ntk.csv", hpft::ntk_record_to_csv(ntk));
    store.put("metrics/bound.csv", bound_to_csv(bound));
    store.put("metrics/epoch_energy.csv", epoch_energy_to_csv(bound));
    store.put("metrics/adaptation.csv", hpft::adaptation_report_to_csv(adapt));
    store.put("metrics/pca.csv", hpft::pca_scatter_to_csv(pca));
    store.put("metrics/decomposition.csv", decomposition_to_csv(dec));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["checkpoint"] = cfg.at("checkpoint");
    echo["downstream"] = hpft::downstream_config_to_json(ds_cfg);
    echo["hpft"] = hpft::hpft_config_to_json(run_cfg);
    echo["head"] = hpft::head_spec_to_json(head);
    echo["seed"] = seed;
    echo["ntk_probes"] = ntk_probes;

    ordered_json results;
    results["seed"] = seed;
    results["tau"] = run_cfg.hp.epochs;
    results["ft_epochs"] = run.ft_record.rows.size();
    results["hp_train_acc"] = hpft::accuracy(run.model_after_hp, data.train.x, data.train.y);
    results["e_aie"] = run.aie_boundary.e_aie;
    results["best_ft_valid_acc"] = hpft::best_valid_acc(run.ft_record);
    results["probe_ids"] = run.probe_ids;
    results["ntk_sample_ids"] = ntk.sample_ids;
    results["bound"] = bound_to_json(bound);
    results["direction"] = {{"max_identity_gap", dir.max_identity_gap}, {"exact", dir.exact}};
    results["decomposition"] = {{"mean_residual_backbone", dec.mean_residual_backbone},
                                {"mean_residual_joint", dec.mean_residual_joint}};
    results["adaptation"] = {{"mean_d_euc", adapt.mean_d_euc}, {"mean_d_cos", adapt.mean_d_cos}};
    store.finalize("run", echo, results);

    std::cout << "run: tau=" << run_cfg.hp.epochs << " e_aie=" << fmt9(run.aie_boundary.e_aie)
              << " bound " << (bound.holds ? "holds" : "VIOLATED")
              << " (slack " << fmt9(bound.slack) << "); artifacts in " << store.root() << "\n";
    return 0;
}

int cmd_analyze(const ordered_json& cfg, const Opts& opt) {
    const std::string run_dir = cfg.at("run_dir").get<std::string>();
    const ordered_json manifest = hpft::load_manifest(run_dir);
    if (manifest.value("command", "") != "run")
        throw hpft::MissingInputError("analyze needs a 'run' output directory, got command '" +
                                      manifest.value("command", "") + "' in " + run_dir);
    const ordered_json& run_config = manifest.at("config");
    hpft::validate_config("run", run_config);
    const ordered_json& recorded = manifest.at("results");

    hpft::RunStore store(opt.out_dir, opt.force);

    auto read_rel = [&](const std::string& rel) {
        return hpft::read_text_file((fs::path(run_dir) / rel).string());
    };

    // Rebuild the minimal run state the dynamics post-processing needs.
    hpft::HpFtResult run;
    run.cfg = hpft::parse_hpft_config(run_config.at("hpft"));
    run.head_spec = hpft::parse_head_spec(run_config.at("head"));
    run.seed = run_config.at("seed").get<uint64_t>();
    run.data.train = hpft::dataset_from_csv(read_rel("data/train.csv"), "train");
    run.data.valid = hpft::dataset_from_csv(read_rel("data/valid.csv"), "valid");
    run.model_after_hp = hpft::network_from_json(read_rel("checkpoints/model_after_hp.json"));
    const int t_epochs = recorded.at("ft_epochs").get<int>();
    for (int t = 0; t <= t_epochs; ++t) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoints/ft_epoch_%04d.json", t);
        run.ft_epoch_models.push_back(hpft::network_from_json(read_rel(name)));
    }
    run.model_final = run.ft_epoch_models.back();
    run.ft_record.rows.resize(t_epochs);  // only the count matters downstream
    run.probe_ids = recorded.at("probe_ids").get<std::vector<int>>();
    run.snapshots.push_back(hpft::snapshot_from_csv(read_rel("snapshots/z0.csv"), "z0"));
    run.snapshots.push_back(hpft::snapshot_from_csv(read_rel("snapshots/zT.csv"), "zT"));
    run.aie_boundary =
        hpft::compute_aie(run.model_after_hp, run.data.train, run.cfg.ft.loss);

    const hpft::DirectionRecord dir = hpft::track_direction(run);
    const hpft::NtkProbeRecord ntk =
        hpft::ntk_probe(run, recorded.at("ntk_sample_ids").get<std::vector<int>>());
    const hpft::AieBoundReport bound = hpft::check_aie_bound(run, ntk, dir);
    const hpft::StepDecomposition dec =
        hpft::decompose_step(run.model_after_hp, run.data.train, run.cfg.ft.loss, run.cfg.ft.lr,
                             run.probe_ids);
    const hpft::AdaptationReport adapt =
        hpft::adaptation_report(run.snapshots.front(), run.snapshots.back());

    // The stored CSVs carry 9 significant digits, so recomputed values match
    // the manifest to ~1e-8 relative; anything worse means damaged artifacts.
    double max_gap = 0.0;
    auto check = [&](const char* what, double got, double want) {
        const double gap = std::fabs(got - want) / std::max(1.0, std::fabs(want));
        max_gap = std::max(max_gap, gap);
        if (gap > 1e-6)
            throw hpft::MissingInputError(std::string("analyze: recomputed ") + what + " = " +
                                          fmt9(got) + " does not reproduce the manifest's " +
                                          fmt9(want) + " (run artifacts damaged?)");
    };
    check("e_aie", run.aie_boundary.e_aie, recorded.at("e_aie").get<double>());
    const ordered_json& rb = recorded.at("bound");
    check("bound.lhs", bound.lhs, rb.at("lhs").get<double>());
    check("bound.c1", bound.c1, rb.at("c1").get<double>());
    check("bound.c2", bound.c2, rb.at("c2").get<double>());
    check("bound.rhs", bound.rhs, rb.at("rhs").get<double>());

    store.put("metrics/direction.csv", hpft::direction_record_to_csv(dir));
    store.put("metrics/ntk.csv", hpft::ntk_record_to_csv(ntk));
    store.put("metrics/bound.csv", bound_to_csv(bound));
    store.put("metrics/epoch_energy.csv", epoch_energy_to_csv(bound));
    store.put("metrics/adaptation.csv", hpft::adaptation_report_to_csv(adapt));
    store.put("metrics/decomposition.csv", decomposition_to_csv(dec));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["run_dir"] = run_dir;
    ordered_json results;
    results["verified"] = true;
    results["max_rel_gap"] = max_gap;
    results["e_aie"] = run.aie_boundary.e_aie;
    results["bound"] = bound_to_json(bound);
    results["decomposition"] = {{"mean_residual_backbone", dec.mean_residual_backbone},
                                {"mean_residual_joint", dec.mean_residual_joint}};
    store.finalize("analyze", echo, results);
    std::cout << "analyze: reproduced the run's numbers (max relative gap " << fmt9(max_gap)
              << "); reports in " << store.root() << "\n";
    return 0;
}

int cmd_sweep(const ordered_json& cfg, const Opts& opt) {
    const LoadedCheckpoint ckpt = load_checkpoint(cfg.at("checkpoint").get<std::string>());
    const hpft::DownstreamConfig ds_cfg = hpft::parse_downstream_config(sub(cfg, "downstream"));
    const hpft::HpFtConfig base = hpft::parse_hpft_config(sub(cfg, "hpft"));
    const hpft::HeadSpec head = hpft::parse_head_spec(sub(cfg, "head"));
    const std::vector<int> tau_grid = cfg.at("tau_grid").get<std::vector<int>>();
    std::vector<uint64_t> seeds = {1, 2, 3};
    if (cfg.contains("seeds")) seeds = cfg.at("seeds").get<std::vector<uint64_t>>();
    if (opt.seed >= 0) seeds = {static_cast<uint64_t>(opt.seed)};

    hpft::RunStore store(opt.out_dir, opt.force);
    const hpft::DownstreamData data = hpft::make_downstream(ckpt.pre, ds_cfg);
    const hpft::SweepResult sr = hpft::sweep_tau(ckpt.model, data, tau_grid, base, head, seeds,
                                                 hpft::resolve_threads(opt.threads));

    store.put("metrics/sweep_cells.csv", hpft::sweep_cells_to_csv(sr));
    store.put("metrics/sweep_summary.csv", hpft::sweep_summary_to_csv(sr));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["checkpoint"] = cfg.at("checkpoint");
    echo["downstream"] = hpft::downstream_config_to_json(ds_cfg);
    echo["hpft"] = hpft::hpft_config_to_json(base);
    echo["head"] = hpft::head_spec_to_json(head);
    echo["tau_grid"] = sr.tau_grid;
    echo["seeds"] = seeds;
    ordered_json results;
    results["tau_star"] = sr.tau_star;
    results["interior_optimum"] = sr.interior_optimum;
    results["mean_ft_valid_acc"] = sr.mean_ft_valid_acc;
    store.finalize("sweep", echo, results);
    std::cout << "sweep: tau_star=" << sr.tau_star
              << (sr.interior_optimum ? " (interior)" : " (boundary)") << "; tables in "
              << store.root() << "\n";
    return 0;
}

int cmd_exchange(const ordered_json& cfg, const Opts& opt) {
    const LoadedCheckpoint ckpt = load_checkpoint(cfg.at("checkpoint").get<std::string>());
    const hpft::DownstreamConfig ds_cfg = hpft::parse_downstream_config(sub(cfg, "downstream"));
    const hpft::HpFtConfig base = hpft::parse_hpft_config(sub(cfg, "hpft"));
    const hpft::HeadSpec head = hpft::parse_head_spec(sub(cfg, "head"));
    const std::vector<int> taus = cfg.at("taus").get<std::vector<int>>();
    hpft::require(taus.size() >= 2, "exchange: need at least two probing depths");
    const uint64_t seed = effective_seed(cfg, "seed", 1, opt.seed);

    hpft::RunStore store(opt.out_dir, opt.force);
    const hpft::DownstreamData data = hpft::make_downstream(ckpt.pre, ds_cfg);

    std::vector<hpft::Network> models(taus.size());
    hpft::parallel_for(static_cast<int>(taus.size()), hpft::resolve_threads(opt.threads),
                       [&](int i) {
                           hpft::HpFtConfig c = base;
                           c.hp.epochs = taus[i];
                           c.keep_epoch_models = false;
                           hpft::RngState rng(seed);
                           models[i] =
                               hpft::hp_ft_run(ckpt.model.backbone, head, data, c, rng)
                                   .model_final;
                       });
    const hpft::ExchangeMatrix em = hpft::head_exchange(models, taus, data);

    store.put("metrics/exchange_train.csv", hpft::exchange_to_csv(em, "train"));
    store.put("metrics/exchange_valid.csv", hpft::exchange_to_csv(em, "valid"));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["checkpoint"] = cfg.at("checkpoint");
    echo["downstream"] = hpft::downstream_config_to_json(ds_cfg);
    echo["hpft"] = hpft::hpft_config_to_json(base);
    echo["head"] = hpft::head_spec_to_json(head);
    echo["taus"] = taus;
    echo["seed"] = seed;
    ordered_json results;
    results["diag_valid_acc"] = hpft::diagonal_mean(em.valid_acc);
    results["offdiag_valid_acc"] = hpft::offdiagonal_mean(em.valid_acc);
    results["diag_train_acc"] = hpft::diagonal_mean(em.train_acc);
    results["offdiag_train_acc"] = hpft::offdiagonal_mean(em.train_acc);
    store.finalize("exchange", echo, results);
    std::cout << "exchange: diag valid acc " << fmt9(hpft::diagonal_mean(em.valid_acc))
              << " vs off-diag " << fmt9(hpft::offdiagonal_mean(em.valid_acc))
              << "; matrices in " << store.root() << "\n";
    return 0;
}

int cmd_trend(const ordered_json& cfg, const Opts& opt) {
    const int battery = cfg.contains("battery_size") ? cfg.at("battery_size").get<int>() : 10;
    const double start = cfg.contains("beta_start") ? cfg.at("beta_start").get<double>() : 0.0;
    const double stop = cfg.contains("beta_stop") ? cfg.at("beta_stop").get<double>() : 1.25;
    const int points = cfg.contains("beta_points") ? cfg.at("beta_points").get<int>() : 101;
    hpft::require(points >= 5 && stop > start, "trend: grid needs stop > start and >= 5 points");
    const uint64_t seed = effective_seed(cfg, "seed", 1, opt.seed);

    hpft::RunStore store(opt.out_dir, opt.force);
    hpft::Vector grid(points);
    for (int i = 0; i < points; ++i) grid[i] = start + (stop - start) * i / (points - 1);

    const hpft::TrendSuiteResult ts =
        hpft::trend_suite(battery, grid, seed, hpft::resolve_threads(opt.threads));
    store.put("metrics/trend_verdicts.csv", hpft::trend_verdicts_to_csv(ts));

    // one example curve for plotting (the battery's first instance)
    hpft::RngState rng(seed);
    const hpft::LinearInstance inst = hpft::make_random_instance(16, 20, 10, 1.0, 1.0, rng);
    store.put("metrics/trend_curve_first.csv",
              hpft::trend_curve_to_csv(hpft::trend_curves(inst, grid)));

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["battery_size"] = battery;
    echo["beta_start"] = start;
    echo["beta_stop"] = stop;
    echo["beta_points"] = points;
    echo["seed"] = seed;
    ordered_json results;
    results["dot_max_pass_rate"] = ts.dot_max_pass_rate;
    results["euc_min_pass_rate"] = ts.euc_min_pass_rate;
    results["dot_concave_rate"] = ts.dot_concave_rate;
    results["euc_convex_rate"] = ts.euc_convex_rate;
    results["norm_argmax_rate"] = ts.norm_argmax_rate;
    results["favorable_count"] = ts.favorable_count;
    results["phase_order_rate"] = ts.phase_order_rate;
    results["valid_alpha_count"] = ts.valid_alpha_count;
    store.finalize("trend", echo, results);
    std::cout << "trend: dot-max rate " << fmt9(ts.dot_max_pass_rate) << ", euc-min rate "
              << fmt9(ts.euc_min_pass_rate) << ", norm-argmax rate "
              << fmt9(ts.norm_argmax_rate) << " over " << battery << " instances; verdicts in "
              << store.root() << "\n";
    return 0;
}

int cmd_report(const ordered_json& cfg, const Opts& opt) {
    const std::vector<std::string> runs = cfg.at("runs").get<std::vector<std::string>>();
    hpft::require(!runs.empty(), "report: empty run list");

    hpft::RunStore store(opt.out_dir, opt.force);
    hpft::CsvWriter w({"run_dir", "command", "key", "value"});
    for (const std::string& dir : runs) {
        const std::vector<std::string> bad = hpft::verify_manifest(dir);
        if (!bad.empty())
            throw hpft::MissingInputError("report: " + dir + " fails hash verification (" +
                                          bad.front() + (bad.size() > 1 ? ", ..." : "") + ")");
        const ordered_json manifest = hpft::load_manifest(dir);
        const std::string command = manifest.value("command", "");
        // flatten scalar results one level deep; arrays are skipped
        std::function<void(const std::string&, const ordered_json&)> emit =
            [&](const std::string& prefix, const ordered_json& node) {
                for (const auto& [key, value] : node.items()) {
                    const std::string name = prefix.empty() ? key : prefix + "." + key;
                    if (value.is_object()) {
                        emit(name, value);
                    } else if (value.is_number()) {
                        w.cell(dir).cell(command).cell(name).cell(value.get<double>());
                        w.end_row();
                    } else if (value.is_boolean()) {
                        w.cell(dir).cell(command).cell(name).cell(value.get<bool>() ? 1 : 0);
                        w.end_row();
                    } else if (value.is_string()) {
                        w.cell(dir).cell(command).cell(name).cell(value.get<std::string>());
                        w.end_row();
                    }
                }
            };
        emit("", manifest.at("results"));
    }
    store.put("report.csv", w.str());

    ordered_json echo;
    echo["schema_version"] = 1;
    echo["runs"] = runs;
    ordered_json results;
    results["runs_verified"] = runs.size();
    store.finalize("report", echo, results);
    std::cout << "report: verified " << runs.size() << " run manifest(s); summary in "
              << store.root() << "\n";
    return 0;
}

int dispatch(const std::string& command, const Opts& opt) {
    if (command == "schema") return cmd_schema(opt);

    const ordered_json cfg = load_config_file(opt.config_path);
    hpft::validate_config(command, cfg);
    if (command == "gen-data") return cmd_gen_data(cfg, opt);
    if (command == "pretrain") return cmd_pretrain(cfg, opt);
    if (command == "run") return cmd_run(cfg, opt);
    if (command == "analyze") return cmd_analyze(cfg, opt);
    if (command == "sweep") return cmd_sweep(cfg, opt);
    if (command == "exchange") return cmd_exchange(cfg, opt);
    if (command == "trend") return cmd_trend(cfg, opt);
    if (command == "report") return cmd_report(cfg, opt);
    throw hpft::ContractViolation("unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hpft — head-probing / fine-tuning laboratory"};
    app.require_subcommand(1);

    Opts opt;
    std::vector<CLI::App*> subs;
    auto add_command = [&](const std::string& name, const std::string& desc, bool needs_config,
                           bool needs_out, bool has_threads, bool has_seed) {
        CLI::App* c = app.add_subcommand(name, desc);
        if (needs_config)
            c->add_option("--config", opt.config_path, "JSON configuration file")
                ->required()
                ->check(CLI::ExistingFile);
        if (needs_out) {
            c->add_option("--out", opt.out_dir, "output directory")
                ->envname("HPFT_OUT_DIR")
                ->required();
            c->add_flag("--force", opt.force, "replace an existing output directory");
        }
        if (has_threads)
            c->add_option("--threads", opt.threads, "worker threads (0 = number of cores)")
                ->envname("HPFT_THREADS");
        if (has_seed) c->add_option("--seed", opt.seed, "override the config's seed");
        subs.push_back(c);
        return c;
    };

    add_command("gen-data", "generate synthetic datasets", true, true, false, true);
    add_command("pretrain", "pretrain a backbone and save its checkpoint", true, true, false,
                true);
    add_command("run", "one head-probing + fine-tuning run with dynamics reports", true, true,
                false, true);
    add_command("sweep", "probing-epochs sweep over seeds", true, true, true, true);
    add_command("analyze", "recompute a run's dynamics reports from its artifacts", true, true,
                false, false);
    add_command("exchange", "head-exchange matrix across probing depths", true, true, true,
                true);
    add_command("trend", "closed-form trend battery", true, true, true, true);
    add_command("report", "verify manifests and flatten results across runs", true, true, false,
                false);
    CLI::App* schema_cmd =
        app.add_subcommand("schema", "print the embedded config schema (JSON)");
    schema_cmd->add_option("--check", opt.check_path,
                           "compare the embedded schema against this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad flags are configuration errors
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(command, opt);
    } catch (const hpft::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hpft::ContractViolation& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hpft::OutputConflictError& e) {
        std::cerr << "output conflict: " << e.what() << "\n";
        return 3;
    } catch (const hpft::MissingInputError& e) {
        std::cerr << "missing input: " << e.what() << "\n";
        return 4;
    } catch (const hpft::DivergenceError& e) {
        std::cerr << "numerical divergence: " << e.what() << "\n";
        return 5;
    } catch (const hpft::SingularKernelError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
