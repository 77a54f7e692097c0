// SPDX-License-Identifier: Apache-2.0
#include "hpft/adapt_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpft/csv.hpp"

namespace hpft {

AdaptationReport adaptation_report(const FeatureSnapshot& z0, const FeatureSnapshot& zt) {
    require(z0.probe_ids == zt.probe_ids, "adaptation_report: snapshots probe different samples");
    require(z0.features.rows == zt.features.rows && z0.features.cols == zt.features.cols,
            "adaptation_report: snapshot shape mismatch");
    require(z0.features.rows > 0, "adaptation_report: empty snapshots");

    AdaptationReport rep;
    rep.probe_ids = z0.probe_ids;
    const int n = z0.features.rows;
    for (int j = 0; j < n; ++j) {
        const Vector a = z0.features.row(j);
        const Vector b = zt.features.row(j);
        const Vector diff = vsub(b, a);
        const double de = dot(diff, diff);
        const double dd = dot(b, a);
        const double n0 = dot(a, a);
        const double nt = dot(b, b);
        const double denom = std::sqrt(nt) * std::sqrt(n0);
        const double dc = denom > 0.0 ? std::clamp(dd / denom, -1.0, 1.0)
                                      : std::numeric_limits<double>::quiet_NaN();

        const double recomposed = nt - 2.0 * dd + n0;
        const double gap = std::fabs(de - recomposed) / std::max(1.0, std::fabs(de));
        rep.max_identity_gap = std::max(rep.max_identity_gap, gap);

        rep.d_euc.push_back(de);
        rep.d_dot.push_back(dd);
        rep.d_cos.push_back(dc);
        rep.norm_t.push_back(nt);
        rep.norm_0.push_back(n0);
        rep.mean_d_euc += de / n;
        rep.mean_d_dot += dd / n;
        rep.mean_d_cos += dc / n;
        rep.mean_norm_t += nt / n;
        rep.mean_norm_0 += n0 / n;
    }
    require(rep.max_identity_gap <= 1e-9,
            "adaptation_report: displacement identity violated beyond tolerance");
    return rep;
}

std::string adaptation_report_to_csv(const AdaptationReport& rep) {
    CsvWriter w({"probe_id", "d_euc", "d_dot", "d_cos", "norm_t", "norm_0"});
    for (size_t j = 0; j < rep.probe_ids.size(); ++j) {
        w.cell(rep.probe_ids[j]).cell(rep.d_euc[j]).cell(rep.d_dot[j]).cell(rep.d_cos[j]);
        w.cell(rep.norm_t[j]).cell(rep.norm_0[j]);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// fixed-basis PCA scatter
// ---------------------------------------------------------------------------

PcaScatter pca_scatter_export(const std::vector<FeatureSnapshot>& snapshots,
                              const std::vector<int>& labels) {
    require(!snapshots.empty(), "pca_scatter_export: no snapshots");
    const FeatureSnapshot& base = snapshots.front();
    for (const FeatureSnapshot& s : snapshots) {
        require(s.probe_ids == base.probe_ids,
                "pca_scatter_export: snapshots probe different samples");
        require(s.features.cols == base.features.cols,
                "pca_scatter_export: feature dimension mismatch");
    }

    PcaScatter out;
    out.basis = pca_top2(base.features);
    out.degenerate = out.basis.degenerate;

    for (const FeatureSnapshot& s : snapshots) {
        for (int j = 0; j < s.features.rows; ++j) {
            PcaScatterRow row;
            row.tag = s.tag;
            row.sample_id = s.probe_ids[j];
            if (!labels.empty()) {
                require(row.sample_id >= 0 && row.sample_id < static_cast<int>(labels.size()),
                        "pca_scatter_export: probe id outside the label table");
                row.label = labels[row.sample_id];
            }
            const Vector z = s.features.row(j);
            double p1 = 0.0, p2 = 0.0;
            for (int i = 0; i < s.features.cols; ++i) {
                const double centered = z[i] - out.basis.mean[i];
                p1 += out.basis.components(0, i) * centered;
                p2 += out.basis.components(1, i) * centered;
            }
            row.pc1 = p1;
            row.pc2 = p2;
            out.rows.push_back(row);
        }
    }
    return out;
}

std::string pca_scatter_to_csv(const PcaScatter& scatter) {
    CsvWriter w({"snapshot_tag", "sample_id", "label", "pc1", "pc2"});
    for (const PcaScatterRow& r : scatter.rows) {
        w.cell(r.tag).cell(r.sample_id).cell(r.label).cell(r.pc1).cell(r.pc2);
        w.end_row();
    }
    return w.str();
}

// ---------------------------------------------------------------------------
// head exchange
// ---------------------------------------------------------------------------

namespace {

void require_same_shapes(const Network& a, const Network& b) {
    auto same = [](const std::vector<DenseLayer>& s, const std::vector<DenseLayer>& t) {
        if (s.size() != t.size()) return false;
        for (size_t l = 0; l < s.size(); ++l)
            if (s[l].w.rows != t[l].w.rows || s[l].w.cols != t[l].w.cols ||
                s[l].use_bias != t[l].use_bias)
                return false;
        return true;
    };
    require(same(a.backbone, b.backbone) && same(a.head, b.head),
            "head_exchange: models differ in architecture");
}

}  // namespace

ExchangeMatrix head_exchange(const std::vector<Network>& models, const std::vector<int>& taus,
                             const DownstreamData& eval_data) {
    require(!models.empty(), "head_exchange: no models");
    require(models.size() == taus.size(), "head_exchange: one tau label per model required");
    for (const Network& m : models) require_same_shapes(models.front(), m);

    const int m = static_cast<int>(models.size());
    ExchangeMatrix em;
    em.taus = taus;
    em.train_acc = Matrix(m, m);
    em.valid_acc = Matrix(m, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            Network cross;
            cross.backbone = models[i].backbone;
            cross.head = models[j].head;
            em.train_acc(i, j) = accuracy(cross, eval_data.train.x, eval_data.train.y);
            em.valid_acc(i, j) = accuracy(cross, eval_data.valid.x, eval_data.valid.y);
        }
    }
    return em;
}

std::string exchange_to_csv(const ExchangeMatrix& em, const std::string& split) {
    require(split == "train" || split == "valid", "exchange_to_csv: split must be train|valid");
    const Matrix& acc = split == "train" ? em.train_acc : em.valid_acc;
    // rows = run supplying the backbone, columns = run supplying the head
    std::vector<std::string> header{"backbone_tau"};
    for (int tau : em.taus) header.push_back("head_tau_" + std::to_string(tau));
    CsvWriter w(header);
    for (int i = 0; i < acc.rows; ++i) {
        w.cell(em.taus[i]);
        for (int j = 0; j < acc.cols; ++j) w.cell(acc(i, j));
        w.end_row();
    }
    return w.str();
}

double diagonal_mean(const Matrix& m) {
    require(m.rows == m.cols && m.rows > 0, "diagonal_mean: square matrix required");
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i) s += m(i, i);
    return s / m.rows;
}

double offdiagonal_mean(const Matrix& m) {
    require(m.rows == m.cols && m.rows > 1, "offdiagonal_mean: need at least a 2x2 matrix");
    double s = 0.0;
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j)
            if (i != j) s += m(i, j);
    return s / (static_cast<double>(m.rows) * (m.rows - 1));
}

}  // namespace hpft
