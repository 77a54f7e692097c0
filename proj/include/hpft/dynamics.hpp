// SPDX-License-Identifier: Apache-2.0
#pragma once

// One-step feature-update decomposition (kernel x direction x energy), the
// average-initial-energy displacement bound, direction-term tracking, and
// empirical-kernel slow-change probes computed post hoc from a finished run.

#include <string>
#include <utility>
#include <vector>

#include "hpft/train.hpp"

namespace hpft {

// ---------------------------------------------------------------------------
// one-step decomposition
// ---------------------------------------------------------------------------

// For each probe sample j, the first-order prediction of the feature change
// caused by one full-batch gradient step of size gamma:
//
//   dz_pred(j) = (gamma / N) * sum_n kernel(j,n) * direction(n)^T * energy(n)
//
// where kernel(j,n) = J_z(x_j) J_z(x_n)^T (backbone-Jacobian Gram block,
// h x h), direction(n) = dq/dz at x_n (k x h), and energy(n) = target minus
// prediction at x_n (one-hot minus softmax for cross-entropy, target minus
// raw output for squared error). The composition order used to assemble
// `predicted` is fixed: for each n ascending, w = direction^T * energy, then
// predicted += (gamma/N) * kernel * w, accumulated left to right.
struct StepDecomposition {
    std::vector<int> probe_ids;  // indices into the batch
    double gamma = 0.0;
    int batch_n = 0;
    int h = 0, k = 0;
    std::vector<Matrix> kernels;     // probe-major: kernels[j * batch_n + n], h x h
    std::vector<Matrix> directions;  // per batch sample n, k x h
    Matrix energies;                 // batch_n x k, row n = target_n - prediction_n
    Matrix predicted;                // probes x h
    // feature change after one actual step of size gamma updating only the
    // backbone (isolates the expansion the prediction linearizes)
    Matrix actual_backbone_only;  // probes x h
    // feature change after one actual joint step (backbone + head)
    Matrix actual_joint;               // probes x h
    Vector residual_backbone_only;     // per probe, ||actual_bb - predicted||_2
    Vector residual_joint;             // per probe, ||actual_joint - predicted||_2
    double mean_residual_backbone = 0.0;
    double mean_residual_joint = 0.0;
};

// Recomposes `predicted` from the stored kernels, directions, and energies
// using the fixed composition order above; decompose_step fills `predicted`
// through this same function, so recomposition is bitwise reproducible.
Matrix compose_predicted(const StepDecomposition& dec);

// `batch` is the full training batch the step uses; probe_ids select the rows
// whose feature change is predicted and measured. Out-of-range probe ids are
// a contract violation. The model is not mutated.
StepDecomposition decompose_step(const Network& model, const ClassificationDataset& batch,
                                 LossKind loss, double gamma, const std::vector<int>& probe_ids);

// Same decomposition against explicit real-valued targets (squared error),
// used for the two-layer linear model.
StepDecomposition decompose_step_targets(const Network& model, const Matrix& x,
                                         const Matrix& targets, LossKind loss, double gamma,
                                         const std::vector<int>& probe_ids);

// ---------------------------------------------------------------------------
// direction-term tracking
// ---------------------------------------------------------------------------

// Series over the fine-tuning trajectory. Index t counts completed FT epochs,
// so per-epoch series have length T+1 and per-step series length T.
struct DirectionRecord {
    std::vector<double> head_norm;       // ||all head parameters||_2 at epoch t (0..T)
    std::vector<double> dir_norm;        // mean_j ||dq/dz(x_j)||_F at epoch t (0..T)
    std::vector<double> grad_head_norm;  // ||dL/d(head params)||_2 at epoch t (0..T-1), full batch
    std::vector<double> dir_change;      // mean_j ||dq/dz_{t+1} - dq/dz_t||_F (t = 0..T-1)
    std::vector<double> predicted_change;  // lr * head-weight-gradient norm (t = 0..T-1)
    std::vector<double> identity_gap;      // |dir_change - predicted_change|
    double max_identity_gap = 0.0;
    // exact when the head is a single linear layer and FT used full-batch
    // steps with zero momentum; otherwise the predicted change is an
    // approximation and the gap is reported, not asserted
    bool exact = false;
};

// Recomputes full-batch gradients at every stored epoch model of `run`
// (requires cfg.keep_epoch_models). For a single-layer linear head the change
// in dq/dz across one step equals lr times the head-weight gradient norm.
DirectionRecord track_direction(const HpFtResult& run);

std::string direction_record_to_csv(const DirectionRecord& rec);

// ---------------------------------------------------------------------------
// empirical-kernel slow-change probes
// ---------------------------------------------------------------------------

struct NtkProbeRecord {
    std::vector<int> sample_ids;               // probed training samples
    std::vector<std::pair<int, int>> pair_ids;  // all ordered pairs, fixed across epochs
    std::vector<double> k_norm;  // mean ||kernel block||_F per epoch t (0..T)
    std::vector<double> k_gap;   // mean ||block_{t+1} - block_t||_F per step (0..T-1)
    double mean_k_gap = 0.0;     // average of k_gap over FT
};

// Samples n_probe training inputs with `rng` (fixed across epochs) and tracks
// every ordered pair's h x h Jacobian-Gram block across the stored FT epoch
// models. Requires n_probe >= 2 and kept epoch models.
NtkProbeRecord ntk_probe(const HpFtResult& run, int n_probe, RngState& rng);

// Same probe with the sample ids given explicitly (at least two, all valid
// training-row indices) so a stored run can be re-analyzed bit-for-bit.
NtkProbeRecord ntk_probe(const HpFtResult& run, const std::vector<int>& sample_ids);

std::string ntk_record_to_csv(const NtkProbeRecord& rec);

// ---------------------------------------------------------------------------
// displacement bound
// ---------------------------------------------------------------------------

// Checks mean ||z_T - z_0|| <= c * E_aie with c = gamma * C1 * C2 * T, where
// C1 is the largest observed mean kernel norm and C2 the largest observed
// head direction norm along the run. The slack is logged, never asserted.
struct AieBoundReport {
    double lhs = 0.0;    // mean over probes of ||z_T - z_0||_2
    double e_aie = 0.0;  // boundary energy (start of FT)
    double gamma = 0.0;
    int t_epochs = 0;
    double c1 = 0.0;  // max over epochs of k_norm
    double c2 = 0.0;  // max over epochs of dir_norm
    double c = 0.0;   // gamma * c1 * c2 * t_epochs
    double rhs = 0.0;  // c * e_aie
    bool holds = false;
    double slack = 0.0;  // rhs / lhs (infinity when lhs = 0)
    bool c2_exact = false;  // true when the head is a single linear layer
    // mean per-sample energy at every FT epoch, and the fraction of steps on
    // which it did not increase (monitored, not assumed)
    std::vector<double> per_epoch_energy;
    double stable_fraction = 0.0;
};

// `ntk` and `dir` must come from the same run (they supply the per-epoch
// kernel and head norms); missing snapshots or empty series are contract
// violations.
AieBoundReport check_aie_bound(const HpFtResult& run, const NtkProbeRecord& ntk,
                               const DirectionRecord& dir);

}  // namespace hpft
