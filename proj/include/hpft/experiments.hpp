// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end protocols on synthetic data: pretraining a backbone to a target
// training accuracy, deriving shifted downstream tasks from the pretraining
// distribution, the probing-epochs sweep with tau* selection, the
// label-smoothing study, the head-capacity study, the partial-backbone
// study, and the closed-form trend battery with per-instance verdicts.

#include <cstdint>
#include <string>
#include <vector>

#include "hpft/adapt_metrics.hpp"
#include "hpft/dynamics.hpp"
#include "hpft/ntk_analysis.hpp"

namespace hpft {

// ---------------------------------------------------------------------------
// pretraining
// ---------------------------------------------------------------------------

struct PretrainConfig {
    int input_dim = 32;
    int num_classes = 10;
    int per_class = 500;
    double mean_radius = 5.0;  // cluster-mean distance scale (pairwise sqrt(2) x this)
    double noise_sigma = 1.0;
    std::vector<int> widths = {32, 32, 32, 32};  // backbone layer widths
    StageConfig stage;           // filled by default_pretrain_config()
    double target_train_acc = 0.99;
    uint64_t data_seed = 1;  // dataset stream; downstream tasks reuse it so
                             // the class means match the pretraining ones
};

PretrainConfig default_pretrain_config();

struct PretrainResult {
    Network model;  // trained backbone plus the pretraining head
    ClassificationDataset data;
    RunRecord record;
    double final_train_acc = 0.0;
    PretrainConfig cfg;
};

// Trains backbone and head jointly until the target training accuracy is
// reached; throws ContractViolation (reporting the final accuracy) when the
// stage's epoch cap runs out first.
PretrainResult pretrain_backbone(const PretrainConfig& cfg, RngState& rng);

// ---------------------------------------------------------------------------
// downstream tasks
// ---------------------------------------------------------------------------

struct DownstreamConfig {
    std::vector<int> class_subset = {0, 1, 2};
    double rotation_angle = 0.7;  // radians in the (x0, x1) plane
    double scale = 1.3;
    double extra_noise_sigma = 0.0;  // class-overlap knob
    int per_class_train = 300;
    int per_class_valid = 100;
    uint64_t shift_seed = 77;  // subsampling and extra-noise stream
};

// Regenerates the pretraining sample pool from pre.data_seed (identical
// class means), applies the shift, and splits the retained rows class-wise
// into train/valid. Requires per_class_train + per_class_valid <= pre.per_class.
DownstreamData make_downstream(const PretrainConfig& pre, const DownstreamConfig& cfg);

// ---------------------------------------------------------------------------
// probing-epochs sweep
// ---------------------------------------------------------------------------

struct SweepCell {
    int tau = 0;
    uint64_t seed = 0;
    bool diverged = false;
    double hp_train_acc = 0.0;  // training accuracy at the probe/finetune boundary
    double e_aie = 0.0;         // boundary energy
    double ft_valid_acc = 0.0;  // best validation accuracy over FT epochs
    AdaptationReport adapt;     // z0 -> zT metrics
    Network final_model;        // for head-exchange bundles
    std::string config_echo;    // JSON of the generating configuration
};

struct SweepResult {
    std::vector<int> tau_grid;     // sorted and deduplicated
    std::vector<SweepCell> cells;  // tau-major, seed-minor
    // seed-averaged per tau (diverged cells excluded); sd_* are sample
    // standard deviations over seeds
    Vector mean_hp_train_acc, mean_e_aie, mean_ft_valid_acc;
    Vector mean_d_euc, mean_d_cos;
    Vector sd_ft_valid_acc, sd_d_euc, sd_d_cos;
    std::vector<int> valid_cells;  // non-diverged cell count per tau
    int tau_star = 0;              // maximizes mean_ft_valid_acc, smallest tau on ties
    bool interior_optimum = false;  // tau_star strictly inside the grid
};

// One run per (tau, seed); a diverged run flags its cell and is excluded
// from every average and from tau* selection. The selection is a function of
// the value set only, so permuting tau_grid cannot change tau_star.
SweepResult sweep_tau(const Network& pretrained, const DownstreamData& data,
                      const std::vector<int>& tau_grid, const HpFtConfig& base_cfg,
                      const HeadSpec& head, const std::vector<uint64_t>& seeds, int threads = 1);

std::string sweep_cells_to_csv(const SweepResult& sr);
std::string sweep_summary_to_csv(const SweepResult& sr);

// ---------------------------------------------------------------------------
// named-condition protocol reports
// ---------------------------------------------------------------------------

struct ProtocolRow {
    std::string condition;
    uint64_t seed = 0;
    std::string config_echo;
    bool diverged = false;
    double hp_train_acc = 0.0;
    double e_aie = 0.0;
    double ft_valid_acc = 0.0;
    double one_minus_cos = 0.0;  // 1 - mean cos(z_T, z_0)
    double d_euc = 0.0;          // mean ||z_T - z_0||^2
    // study-specific extras; NaN / -1 when not applicable
    double residual_energy = 0.0;
    double expected_residual = 0.0;
    double grad_decay_epochs = 0.0;  // FT epochs until the head-gradient norm halves
    int n_last = -1;
};

struct ConditionSummary {
    std::string condition;
    int rows = 0;  // non-diverged rows aggregated
    double mean_hp_train_acc = 0.0, mean_e_aie = 0.0, mean_ft_valid_acc = 0.0;
    double mean_one_minus_cos = 0.0, mean_d_euc = 0.0;
    double sd_ft_valid_acc = 0.0, sd_one_minus_cos = 0.0, sd_d_euc = 0.0;
    double mean_residual_energy = 0.0, mean_expected_residual = 0.0;
    double mean_grad_decay_epochs = 0.0;
};

struct ProtocolReport {
    std::string study;
    std::vector<ProtocolRow> rows;          // condition-major, seed-minor
    std::vector<ConditionSummary> summary;  // condition order of first appearance
};

std::string protocol_rows_to_csv(const ProtocolReport& rep);
std::string protocol_summary_to_csv(const ProtocolReport& rep);

// Label-smoothing study over (eta_hp, eta_ft) in {(1,1), (0.9,1), (0.9,0.9),
// (1,0.9)} (conditions named hp<eta>_ft<eta>). The HP stage runs its full
// epoch budget so the smoothed targets converge; residual_energy is the
// boundary energy against the true one-hot labels and expected_residual is
// (1 - eta_hp) * sqrt((K-1)/K).
ProtocolReport ls_hp_study(const Network& pretrained, const DownstreamData& data,
                           const HpFtConfig& base_cfg, double eta_hp, double eta_ft,
                           const std::vector<uint64_t>& seeds, int threads = 1);

// Head-capacity study: conditions "linear" and "mlp2". The HP stage stops at
// 100% training accuracy or its epoch cap (whichever first), recording the
// converged probe accuracy; grad_decay_epochs measures early-FT settling.
ProtocolReport head_capacity_study(const Network& pretrained, const DownstreamData& data,
                                   const HpFtConfig& base_cfg, int mlp_hidden_width,
                                   const std::vector<uint64_t>& seeds, int threads = 1);

// Partial-backbone study: for each n in n_last, the trailing n backbone
// layers are reinitialized and moved into the head before probing
// (conditions "n_last_<n>").
ProtocolReport partial_backbone_study(const Network& pretrained, const DownstreamData& data,
                                      const std::vector<int>& n_last, const HpFtConfig& base_cfg,
                                      const HeadSpec& head, const std::vector<uint64_t>& seeds,
                                      int threads = 1);

// ---------------------------------------------------------------------------
// closed-form trend battery
// ---------------------------------------------------------------------------

struct TrendVerdict {
    uint64_t seed = 0;
    double alpha = 0.0;         // scalar summary of the norm-trend critical point
    double alpha_spread = 0.0;  // coordinate-ratio spread around alpha
    double beta_ray = 0.0;      // norm-trend vertex restricted to the beta ray
    bool favorable = false;     // norm-trend curvature flag (maximum)
    bool dot_max_ok = false;    // grid argmax of d_dot within one step of 0.5
    bool euc_min_ok = false;    // grid argmin of d_euc at beta = 1
    bool dot_concave = false;
    bool euc_convex = false;
    bool norm_unimodal = false;       // evaluated when favorable
    bool norm_argmax_near_alpha = false;  // within two grid steps, when favorable
    bool phase_order_ok = false;      // collapse<rotate<stretch<tiny along the grid
    bool alpha_valid = false;         // alpha finite and inside (0, 0.5)
};

struct TrendSuiteResult {
    Vector beta_grid;
    std::vector<TrendVerdict> verdicts;
    double dot_max_pass_rate = 0.0;
    double euc_min_pass_rate = 0.0;
    double dot_concave_rate = 0.0;
    double euc_convex_rate = 0.0;
    double norm_argmax_rate = 0.0;  // among favorable instances
    int favorable_count = 0;
    double phase_order_rate = 0.0;  // among valid-alpha instances
    int valid_alpha_count = 0;
    // critical-point summaries for the rescaled batteries (same instances
    // with B0, respectively v0, scaled by 100)
    Vector alpha_base, alpha_b_scaled, alpha_v_scaled;
};

// battery_size seeded instances (h=256, d=320, n=10, unit scales), evaluated
// on beta_grid; seeds are seed0, seed0+1, ... The wide shape keeps the
// vector critical point nearly parallel to the targets, so its scalar
// summary alpha is a faithful grid location (ratio spread ~0.1 instead of
// the O(1) spread of narrow instances).
TrendSuiteResult trend_suite(int battery_size, const Vector& beta_grid, uint64_t seed0,
                             int threads = 1);

std::string trend_verdicts_to_csv(const TrendSuiteResult& ts);

// FT epochs (1-based count) until grad_head_norm falls to half its initial
// value; NaN when it never does. Shared by studies and reports.
double grad_decay_epochs(const DirectionRecord& dir);

// Largest validation accuracy over a record's epochs (NaN rows skipped).
double best_valid_acc(const RunRecord& rec);

}  // namespace hpft
