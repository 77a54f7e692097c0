// SPDX-License-Identifier: Apache-2.0
#include "hpft/energy.hpp"

#include <algorithm>
#include <cmath>

#include "hpft/csv.hpp"

namespace hpft {

EnergyReport compute_aie(const Network& net, const ClassificationDataset& data, LossKind loss) {
    require(data.n() >= 1, "compute_aie: empty dataset");
    require(data.num_classes() == net.output_dim(), "compute_aie: class-count mismatch");

    EnergyReport rep;
    rep.loss = loss;
    rep.per_sample_energy.resize(data.n());
    rep.correct_class_prob.resize(data.n());

    for (int i = 0; i < data.n(); ++i) {
        const ForwardResult f = forward(net, data.x.row(i));
        const Vector p = softmax(f.q);
        rep.correct_class_prob[i] = p[data.y[i]];
        const Vector& pred = (loss == LossKind::cross_entropy) ? p : f.q;
        double s = 0.0;
        for (int k = 0; k < data.num_classes(); ++k) {
            const double gap = data.onehot(i, k) - pred[k];
            s += gap * gap;
        }
        rep.per_sample_energy[i] = std::sqrt(s);
        rep.e_aie += rep.per_sample_energy[i];
    }
    rep.e_aie /= data.n();

    // 20 bins covering at least the CE-feasible range [0, sqrt(2)]
    rep.hist_lo = 0.0;
    rep.hist_hi = std::max(std::sqrt(2.0),
                           *std::max_element(rep.per_sample_energy.begin(),
                                             rep.per_sample_energy.end()));
    rep.histogram.assign(20, 0);
    for (double e : rep.per_sample_energy) {
        int bin = static_cast<int>(20.0 * e / rep.hist_hi);
        bin = std::min(std::max(bin, 0), 19);
        ++rep.histogram[bin];
    }
    return rep;
}

std::string energy_report_to_csv(const EnergyReport& rep) {
    CsvWriter w({"sample_id", "energy", "correct_class_prob"});
    for (size_t i = 0; i < rep.per_sample_energy.size(); ++i) {
        w.cell(i).cell(rep.per_sample_energy[i]).cell(rep.correct_class_prob[i]);
        w.end_row();
    }
    return w.str();
}

}  // namespace hpft
