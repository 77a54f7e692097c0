// SPDX-License-Identifier: Apache-2.0
#pragma once

// The two-stage procedure: head probing (frozen backbone) for tau epochs,
// then fine-tuning of all parameters, with feature snapshots over a fixed
// probe set and optional per-epoch parameter snapshots for post-hoc dynamics
// analysis.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hpft/datagen.hpp"
#include "hpft/energy.hpp"
#include "hpft/model.hpp"

namespace hpft {

enum class Stage { pretrain, hp, ft };
std::string to_string(Stage s);

struct EarlyStop {
    std::string metric = "train_acc";  // train_acc | valid_acc | train_loss | valid_loss
    int patience = 10;
    double min_delta = 0.001;  // improvement below this does not reset patience
};

struct StageConfig {
    Stage stage = Stage::ft;
    int epochs = 0;
    double lr = 0.0;
    double momentum = 0.0;  // 0 = plain GD
    int batch_size = 0;     // 0 = full batch
    LossKind loss = LossKind::cross_entropy;
    double label_eta = 1.0;  // label smoothing for this stage's training targets
    std::optional<EarlyStop> early_stop;
    // stop after the first epoch whose training accuracy reaches this value
    // (convergence-budget stop, distinct from patience-based early stopping)
    std::optional<double> stop_at_train_acc;
};

struct EpochRow {
    Stage stage = Stage::ft;
    int epoch = 0;  // 1-based within the record
    double train_loss = 0.0, train_acc = 0.0;
    double valid_loss = 0.0, valid_acc = 0.0;  // NaN when no validation split
};

struct RunRecord {
    std::vector<EpochRow> rows;
    uint64_t seed = 0;
    std::string config_echo;  // JSON text of the generating configuration
    // best epoch under the early-stop metric (or train_acc when none);
    // best_value is never worse than any recorded epoch's metric
    int best_epoch = 0;
    double best_value = 0.0;
    std::string best_metric = "train_acc";
    bool stopped_early = false;
};

std::string run_record_to_csv(const RunRecord& rec);

struct FeatureSnapshot {
    std::string tag;  // "z0" | "zt(<epoch>)" | "zT"
    Matrix features;  // probe_count x h
    std::vector<int> probe_ids;
};

// fixed seeded probe subset (default size used by runs: 100)
std::vector<int> pick_probe_ids(int n, int count, RngState& rng);

// ---------------------------------------------------------------------------
// stages
// ---------------------------------------------------------------------------

struct HeadProbeResult {
    Network model;
    RunRecord record;
};

// Trains only head parameters on labels smoothed by cfg.label_eta; the
// backbone is never touched. Validation metrics (when `valid` given) use the
// unsmoothed labels. Throws DivergenceError on NaN loss.
HeadProbeResult head_probe(const Network& model, const ClassificationDataset& train,
                           const ClassificationDataset* valid, const StageConfig& cfg,
                           RngState& rng);

struct FinetuneResult {
    Network model;
    RunRecord record;
    std::vector<FeatureSnapshot> snapshots;  // z0, zt(t) every snapshot_every, zT
    std::vector<Network> epoch_models;       // [0..T] when keep_epoch_models (index = epochs done)
};

// Updates all parameters. Snapshots features over probe_ids at FT start
// (z0), every snapshot_every epochs (zt(t)), and at the end (zT).
FinetuneResult finetune(const Network& model, const ClassificationDataset& train,
                        const ClassificationDataset* valid, const StageConfig& cfg,
                        const std::vector<int>& probe_ids, int snapshot_every, RngState& rng,
                        bool keep_epoch_models = false);

// Regression flavour of the same loop (used by the closed-form oracles);
// targets are raw real rows, no accuracy is defined.
FinetuneResult finetune_targets(const Network& model, const Matrix& x, const Matrix& targets,
                                const StageConfig& cfg, const std::vector<int>& probe_ids,
                                int snapshot_every, RngState& rng, bool keep_epoch_models = false);

// ---------------------------------------------------------------------------
// composed HP -> FT run
// ---------------------------------------------------------------------------

struct HeadSpec {
    HeadKind kind = HeadKind::linear;
    int hidden_width = 64;  // mlp2 only
};

struct DownstreamData {
    ClassificationDataset train;
    ClassificationDataset valid;
};

struct HpFtConfig {
    StageConfig hp;
    StageConfig ft;
    int probe_count = 100;
    int snapshot_every = 0;       // 0: only z0 and zT
    bool keep_epoch_models = true;  // needed by dynamics post-processing
};

struct HpFtResult {
    Network model_init;      // fresh head, before HP
    Network model_after_hp;  // = FT start
    Network model_final;
    RunRecord hp_record;
    RunRecord ft_record;
    RunRecord joined_record;  // HP epochs then FT epochs, globally indexed
    EnergyReport aie_boundary;  // measured between HP and FT
    std::vector<FeatureSnapshot> snapshots;
    std::vector<int> probe_ids;
    std::vector<Network> ft_epoch_models;  // when cfg.keep_epoch_models
    DownstreamData data;                   // the exact data the run saw
    HpFtConfig cfg;                        // the generating configuration
    HeadSpec head_spec;
    uint64_t seed = 0;
};

// Builds a fresh seeded head on the pretrained backbone, probes it for
// cfg.hp.epochs, measures the initial energy at the boundary, fine-tunes.
HpFtResult hp_ft_run(const std::vector<DenseLayer>& pretrained_backbone,
                     const HeadSpec& head_spec, const DownstreamData& data,
                     const HpFtConfig& cfg, RngState& rng);

// Same pipeline on an already-assembled model (e.g. one whose trailing
// backbone layers were moved into the head); no fresh head is built.
HpFtResult hp_ft_run_model(const Network& start_model, const DownstreamData& data,
                           const HpFtConfig& cfg, RngState& rng);

}  // namespace hpft
