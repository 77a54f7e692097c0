// SPDX-License-Identifier: Apache-2.0
#pragma once

// Initial-energy measurement: per-sample gap between the one-hot label and
// the model's current prediction, and its mean (the quantity bounding how far
// features can move during fine-tuning).

#include <string>
#include <vector>

#include "hpft/datagen.hpp"
#include "hpft/model.hpp"

namespace hpft {

struct EnergyReport {
    double e_aie = 0.0;               // mean of per_sample_energy
    Vector per_sample_energy;         // ||e_y - p0||_2 (CE) or ||e_y - q0||_2 (MSE)
    Vector correct_class_prob;        // softmax(q0)[y] per sample
    std::vector<int> histogram;       // counts over [hist_lo, hist_hi)
    double hist_lo = 0.0, hist_hi = 0.0;
    LossKind loss = LossKind::cross_entropy;
};

// Under cross-entropy the gap uses p0 = softmax(q0), so every per-sample
// energy lies in [0, sqrt(2)]; under MSE the raw prediction q0 is used and
// the energy is unbounded above.
EnergyReport compute_aie(const Network& net, const ClassificationDataset& data, LossKind loss);

std::string energy_report_to_csv(const EnergyReport& rep);

}  // namespace hpft
