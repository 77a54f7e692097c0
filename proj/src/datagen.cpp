// SPDX-License-Identifier: Apache-2.0
#include "hpft/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "hpft/csv.hpp"

namespace hpft {

Matrix random_orthogonal(int d, RngState& rng) {
    require(d >= 1, "random_orthogonal: d must be positive");
    // Gaussian matrix, then modified Gram-Schmidt over columns. A random
    // Gaussian matrix is almost surely well conditioned for this.
    Matrix g(d, d);
    for (double& v : g.data) v = rng.next_normal();
    for (int c = 0; c < d; ++c) {
        for (int p = 0; p < c; ++p) {
            double proj = 0.0;
            for (int r = 0; r < d; ++r) proj += g(r, c) * g(r, p);
            for (int r = 0; r < d; ++r) g(r, c) -= proj * g(r, p);
        }
        double nrm = 0.0;
        for (int r = 0; r < d; ++r) nrm += g(r, c) * g(r, c);
        nrm = std::sqrt(nrm);
        require(nrm > 1e-12, "random_orthogonal: degenerate draw");
        for (int r = 0; r < d; ++r) g(r, c) /= nrm;
    }
    return g;
}

ClassificationDataset gen_gaussian_classes(int d, int k, int n_per_class, double mean_radius,
                                           double noise_sigma, RngState& rng,
                                           const std::string& split) {
    require(d >= 2, "gen_gaussian_classes: d must be >= 2");
    require(k >= 2, "gen_gaussian_classes: K must be >= 2");
    require(k <= d, "gen_gaussian_classes: orthogonal mean placement needs K <= d");
    require(n_per_class >= 1, "gen_gaussian_classes: n_per_class must be >= 1");
    require(mean_radius > 0.0, "gen_gaussian_classes: mean_radius must be positive");
    require(noise_sigma >= 0.0, "gen_gaussian_classes: noise_sigma must be >= 0");

    const Matrix q = random_orthogonal(d, rng);
    const int n = k * n_per_class;
    ClassificationDataset ds;
    ds.split = split;
    ds.x = Matrix(n, d);
    ds.y.resize(n);
    ds.onehot = Matrix(n, k);
    int row = 0;
    for (int c = 0; c < k; ++c) {
        for (int s = 0; s < n_per_class; ++s, ++row) {
            for (int j = 0; j < d; ++j)
                ds.x(row, j) = mean_radius * q(j, c) + noise_sigma * rng.next_normal();
            ds.y[row] = c;
            ds.onehot(row, c) = 1.0;
        }
    }
    return ds;
}

ClassificationDataset apply_shift(const ClassificationDataset& src, const ShiftSpec& spec,
                                  RngState& rng) {
    require(!spec.class_subset.empty(), "apply_shift: class_subset must be nonempty");
    require(spec.scale > 0.0, "apply_shift: scale must be positive");
    require(spec.extra_noise_sigma >= 0.0, "apply_shift: negative noise sigma");
    std::set<int> seen;
    for (int c : spec.class_subset) {
        require(c >= 0 && c < src.num_classes(), "apply_shift: class id out of range");
        require(seen.insert(c).second, "apply_shift: duplicate class id");
    }

    // Select rows class by class (subset order), subsampling deterministically.
    std::vector<int> keep;
    for (size_t new_label = 0; new_label < spec.class_subset.size(); ++new_label) {
        const int cls = spec.class_subset[new_label];
        std::vector<int> rows;
        for (int i = 0; i < src.n(); ++i)
            if (src.y[i] == cls) rows.push_back(i);
        if (spec.per_class_count > 0) {
            require(static_cast<int>(rows.size()) >= spec.per_class_count,
                    "apply_shift: per_class_count exceeds available samples for class " +
                        std::to_string(cls));
            std::vector<int> perm;
            shuffled_indices(static_cast<int>(rows.size()), rng, perm);
            std::vector<int> chosen;
            for (int t = 0; t < spec.per_class_count; ++t) chosen.push_back(rows[perm[t]]);
            std::sort(chosen.begin(), chosen.end());
            rows = chosen;
        }
        keep.insert(keep.end(), rows.begin(), rows.end());
    }

    const int kk = static_cast<int>(spec.class_subset.size());
    ClassificationDataset out;
    out.split = src.split;
    out.x = Matrix(static_cast<int>(keep.size()), src.dim());
    out.y.resize(keep.size());
    out.onehot = Matrix(static_cast<int>(keep.size()), kk);

    const double c = std::cos(spec.rotation_angle);
    const double s = std::sin(spec.rotation_angle);
    int row = 0;
    int new_label = 0;
    size_t boundary = 0;
    // recompute the label per block: keep[] is grouped by subset position
    std::vector<int> block_sizes(kk, 0);
    {
        int idx = 0;
        for (int nl = 0; nl < kk; ++nl) {
            const int cls = spec.class_subset[nl];
            int cnt = 0;
            for (int i = 0; i < src.n(); ++i)
                if (src.y[i] == cls) ++cnt;
            if (spec.per_class_count > 0) cnt = spec.per_class_count;
            block_sizes[nl] = cnt;
            idx += cnt;
        }
        require(idx == static_cast<int>(keep.size()), "apply_shift: internal selection mismatch");
    }
    for (int i : keep) {
        while (new_label < kk - 1 &&
               row >= static_cast<int>(boundary) + block_sizes[new_label]) {
            boundary += block_sizes[new_label];
            ++new_label;
        }
        for (int j = 0; j < src.dim(); ++j) out.x(row, j) = src.x(i, j);
        const double x0 = out.x(row, 0), x1 = out.x(row, 1);
        out.x(row, 0) = c * x0 - s * x1;
        out.x(row, 1) = s * x0 + c * x1;
        for (int j = 0; j < src.dim(); ++j) out.x(row, j) *= spec.scale;
        if (spec.extra_noise_sigma > 0.0)
            for (int j = 0; j < src.dim(); ++j)
                out.x(row, j) += spec.extra_noise_sigma * rng.next_normal();
        out.y[row] = new_label;
        out.onehot(row, new_label) = 1.0;
        ++row;
    }
    return out;
}

RegressionDataset gen_overparam_regression(int d, int n, RngState& teacher_seed) {
    require(n >= 1, "gen_overparam_regression: N must be >= 1");
    require(n <= d, "gen_overparam_regression: over-parameterization needs N <= d");
    for (int attempt = 0; attempt < 3; ++attempt) {
        Matrix x(n, d);
        for (double& v : x.data) v = teacher_seed.next_normal();
        // full row rank <=> min eigenvalue of X X^T clearly positive
        const Matrix gram = matmul_nt(x, x);
        const SymEigen eig = jacobi_eigen(gram);
        const double min_eig = eig.values.back();
        if (min_eig > 1e-8 * std::max(eig.values.front(), 1.0)) {
            Vector w(d);
            for (double& v : w) v = teacher_seed.next_normal();
            RegressionDataset ds;
            ds.x = x;
            ds.y = matvec(x, w);
            return ds;
        }
    }
    throw ContractViolation("gen_overparam_regression: rank-deficient X after 3 redraws");
}

Matrix smooth_labels(const Matrix& onehot, double eta) {
    require(eta > 0.0 && eta <= 1.0, "smooth_labels: eta must be in (0, 1]");
    const int k = onehot.cols;
    require(k >= 1, "smooth_labels: empty label matrix");
    const double uniform = (1.0 - eta) / k;
    Matrix out(onehot.rows, k);
    for (int i = 0; i < onehot.rows; ++i)
        for (int j = 0; j < k; ++j) out(i, j) = eta * onehot(i, j) + uniform;
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string dataset_to_csv(const ClassificationDataset& ds) {
    std::vector<std::string> header;
    for (int j = 0; j < ds.dim(); ++j) header.push_back("f" + std::to_string(j));
    header.push_back("label");
    CsvWriter w(header);
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.dim(); ++j) w.cell(ds.x(i, j));
        w.cell(ds.y[i]);
        w.end_row();
    }
    return w.str();
}

ClassificationDataset dataset_from_csv(const std::string& csv, const std::string& split) {
    std::istringstream in(csv);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "dataset_from_csv: empty input");
    int d = static_cast<int>(std::count(line.begin(), line.end(), ',')); // fields - 1
    require(d >= 1, "dataset_from_csv: header must list features and label");

    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        int field = 0;
        while (std::getline(row, cell, ',')) {
            if (field < d)
                values.push_back(std::stod(cell));
            else
                labels.push_back(std::stoi(cell));
            ++field;
        }
        require(field == d + 1, "dataset_from_csv: ragged row");
    }
    const int n = static_cast<int>(labels.size());
    require(n >= 1, "dataset_from_csv: no samples");
    int k = 0;
    for (int lab : labels) {
        require(lab >= 0, "dataset_from_csv: negative label");
        k = std::max(k, lab + 1);
    }

    ClassificationDataset ds;
    ds.split = split;
    ds.x = Matrix(n, d);
    std::copy(values.begin(), values.end(), ds.x.data.begin());
    ds.y = labels;
    ds.onehot = Matrix(n, k);
    for (int i = 0; i < n; ++i) ds.onehot(i, labels[i]) = 1.0;
    return ds;
}

}  // namespace hpft
