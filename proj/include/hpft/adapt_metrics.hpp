// SPDX-License-Identifier: Apache-2.0
#pragma once

// Feature-adaptation metrics between snapshots (displacement, dot product,
// cosine, norms), fixed-basis PCA scatter exports, and the head-exchange
// evaluation matrix over separately converged runs.

#include <string>
#include <vector>

#include "hpft/train.hpp"

namespace hpft {

// ---------------------------------------------------------------------------
// adaptation metrics
// ---------------------------------------------------------------------------

// Per-probe and mean values of:
//   d_euc  = ||z_T - z_0||^2,  d_dot = z_T . z_0,  d_cos = cos(z_T, z_0),
//   norm_t = ||z_T||^2,        norm_0 = ||z_0||^2.
// The identity d_euc = norm_t - 2 d_dot + norm_0 is recomputed per probe;
// max_identity_gap records the largest relative gap (construction-time check,
// <= 1e-9 or the constructor throws).
struct AdaptationReport {
    std::vector<int> probe_ids;
    Vector d_euc, d_dot, d_cos, norm_t, norm_0;
    double mean_d_euc = 0.0, mean_d_dot = 0.0, mean_d_cos = 0.0;
    double mean_norm_t = 0.0, mean_norm_0 = 0.0;
    double max_identity_gap = 0.0;
};

// Snapshots must share probe ids and feature dimension. d_cos is NaN for a
// probe whose z_0 or z_T is exactly zero.
AdaptationReport adaptation_report(const FeatureSnapshot& z0, const FeatureSnapshot& zt);

// columns: probe_id, d_euc, d_dot, d_cos, norm_t, norm_0
std::string adaptation_report_to_csv(const AdaptationReport& rep);

// ---------------------------------------------------------------------------
// fixed-basis PCA scatter
// ---------------------------------------------------------------------------

struct PcaScatterRow {
    std::string tag;
    int sample_id = 0;
    int label = -1;
    double pc1 = 0.0, pc2 = 0.0;
};

struct PcaScatter {
    std::vector<PcaScatterRow> rows;
    Pca2 basis;  // fitted on the first snapshot only, reused for all others
    bool degenerate = false;
};

// Fits the two-component basis on snapshots.front() (the earliest snapshot,
// by contract the pre-adaptation features) and projects every snapshot with
// that frozen basis and centering. `labels` indexes by dataset sample id
// (probe ids look labels up); pass empty labels for unlabeled exports.
PcaScatter pca_scatter_export(const std::vector<FeatureSnapshot>& snapshots,
                              const std::vector<int>& labels);

// columns: snapshot_tag, sample_id, label, pc1, pc2
std::string pca_scatter_to_csv(const PcaScatter& scatter);

// ---------------------------------------------------------------------------
// head exchange
// ---------------------------------------------------------------------------

// Accuracy of every backbone/head cross-pairing: row = which run the
// backbone comes from, column = which run the head comes from.
struct ExchangeMatrix {
    std::vector<int> taus;  // per-run label (probing epochs), row/col order
    Matrix train_acc;       // m x m
    Matrix valid_acc;       // m x m
};

// All models must share identical layer shapes. No parameters are updated;
// every composition is evaluated as-is.
ExchangeMatrix head_exchange(const std::vector<Network>& models, const std::vector<int>& taus,
                             const DownstreamData& eval_data);

// split is "train" or "valid"; rows = backbone run, columns = head run
std::string exchange_to_csv(const ExchangeMatrix& em, const std::string& split);

double diagonal_mean(const Matrix& m);
double offdiagonal_mean(const Matrix& m);

}  // namespace hpft
