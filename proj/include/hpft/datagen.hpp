// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic datasets: Gaussian class clusters for the classification
// pipeline, parametric input distortions for the downstream task, and
// over-parameterized regression instances for the closed-form analysis.

#include <string>
#include <vector>

#include "hpft/linalg.hpp"
#include "hpft/rng.hpp"

namespace hpft {

struct ClassificationDataset {
    Matrix x;            // n x d inputs, one sample per row
    std::vector<int> y;  // labels in [0, k)
    Matrix onehot;       // n x k rows e_y
    std::string split;   // "train" | "valid"

    int n() const { return x.rows; }
    int dim() const { return x.cols; }
    int num_classes() const { return onehot.cols; }
};

struct RegressionDataset {
    Matrix x;  // n x d, full row rank, n <= d
    Vector y;  // n targets
};

struct ShiftSpec {
    std::vector<int> class_subset;  // retained class ids; labels reindexed by position
    double rotation_angle = 0.0;    // radians, applied in the (x0, x1) plane
    double scale = 1.0;             // multiplicative input gain
    int per_class_count = 0;        // samples kept per class; <= 0 keeps all
    double extra_noise_sigma = 0.0;  // additive isotropic noise after scaling
};

// K cluster means sit on the first K columns of a seeded random orthogonal
// matrix, scaled to mean_radius; samples add isotropic N(0, noise_sigma^2)
// noise. Rows are grouped class-major (all of class 0 first).
ClassificationDataset gen_gaussian_classes(int d, int k, int n_per_class, double mean_radius,
                                           double noise_sigma, RngState& rng,
                                           const std::string& split = "train");

// Keeps spec.class_subset (labels reindexed to 0..K'-1 by subset position),
// subsamples to per_class_count per class (seeded, original row order kept),
// rotates the (x0, x1) plane by rotation_angle, multiplies inputs by scale,
// then adds N(0, extra_noise_sigma^2) noise when that sigma is positive.
// Throws if a class has fewer samples than requested.
ClassificationDataset apply_shift(const ClassificationDataset& src, const ShiftSpec& spec,
                                  RngState& rng);

// X rows i.i.d. standard normal, redrawn (up to 3 times) until X X^T has full
// rank; Y = X w with a hidden teacher vector w drawn from the same stream.
RegressionDataset gen_overparam_regression(int d, int n, RngState& teacher_seed);

// eta * e_y + (1 - eta) * uniform, rowwise. Preserves each row's argmax for
// eta > 0.
Matrix smooth_labels(const Matrix& onehot, double eta);

// Random orthogonal matrix via modified Gram-Schmidt on a seeded Gaussian
// matrix (also used by tests that need controlled rotations).
Matrix random_orthogonal(int d, RngState& rng);

// ---------------------------------------------------------------------------
// CSV form: header "f0,...,f{d-1},label", one sample per row. Floats carry 9
// significant digits, so a round trip quantizes at ~1e-9 relative.
// ---------------------------------------------------------------------------
std::string dataset_to_csv(const ClassificationDataset& ds);
ClassificationDataset dataset_from_csv(const std::string& csv, const std::string& split);

}  // namespace hpft
