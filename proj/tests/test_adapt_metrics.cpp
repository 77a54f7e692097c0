// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "hpft/adapt_metrics.hpp"
#include "oracles.hpp"

using namespace hpft;

namespace {

FeatureSnapshot snap(const std::string& tag, const Matrix& f, std::vector<int> ids) {
    FeatureSnapshot s;
    s.tag = tag;
    s.features = f;
    s.probe_ids = std::move(ids);
    return s;
}

}  // namespace

TEST_CASE("identical snapshots report zero displacement and unit cosine") {
    RngState rng(1);
    Matrix f(4, 3);
    for (double& v : f.data) v = rng.next_normal();
    const AdaptationReport rep =
        adaptation_report(snap("z0", f, {0, 1, 2, 3}), snap("zT", f, {0, 1, 2, 3}));
    for (int j = 0; j < 4; ++j) {
        CHECK(rep.d_euc[j] == 0.0);
        CHECK(rep.d_cos[j] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(rep.d_dot[j] == doctest::Approx(rep.norm_0[j]).epsilon(1e-12));
        CHECK(rep.norm_t[j] == rep.norm_0[j]);
    }
    CHECK(rep.mean_d_euc == 0.0);
    CHECK(rep.mean_d_cos == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("doubling every feature: the metrics follow the scaling rules") {
    RngState rng(2);
    Matrix f(3, 4);
    for (double& v : f.data) v = rng.next_normal();
    Matrix g(3, 4);
    for (size_t i = 0; i < f.data.size(); ++i) g.data[i] = 2.0 * f.data[i];

    const AdaptationReport rep =
        adaptation_report(snap("z0", f, {0, 1, 2}), snap("zT", g, {0, 1, 2}));
    for (int j = 0; j < 3; ++j) {
        long double n0 = 0.0L;
        for (int c = 0; c < 4; ++c) n0 += (long double)f(j, c) * f(j, c);
        // zT = 2 z0: d_euc = ||z0||^2, d_dot = 2||z0||^2, cos = 1, norm_t = 4||z0||^2
        CHECK(oracle::rel_err(rep.d_euc[j], (double)n0) < 1e-10);
        CHECK(oracle::rel_err(rep.d_dot[j], 2.0 * (double)n0) < 1e-10);
        CHECK(rep.d_cos[j] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(oracle::rel_err(rep.norm_t[j], 4.0 * (double)n0) < 1e-10);
        CHECK(oracle::rel_err(rep.norm_0[j], (double)n0) < 1e-10);
    }
    // means are the per-probe averages
    double want = 0.0;
    for (int j = 0; j < 3; ++j) want += rep.d_euc[j] / 3.0;
    CHECK(rep.mean_d_euc == doctest::Approx(want).epsilon(1e-12));
    CHECK(rep.max_identity_gap <= 1e-9);

    const std::string csv = adaptation_report_to_csv(rep);
    CHECK(csv.find("probe_id,d_euc,d_dot,d_cos,norm_t,norm_0") == 0);
}

TEST_CASE("orthogonal rotation keeps norms and moves the cosine off one") {
    Matrix f(1, 2), g(1, 2);
    f(0, 0) = 3.0;
    g(0, 1) = 3.0;  // 90-degree rotation
    const AdaptationReport rep = adaptation_report(snap("z0", f, {0}), snap("zT", g, {0}));
    CHECK(rep.d_dot[0] == 0.0);
    CHECK(rep.d_cos[0] == doctest::Approx(0.0));
    CHECK(rep.d_euc[0] == doctest::Approx(18.0));
    CHECK(rep.norm_t[0] == rep.norm_0[0]);
}

TEST_CASE("mismatched snapshots are rejected") {
    Matrix f(2, 3), g(2, 3), h(2, 4);
    CHECK_THROWS_AS(adaptation_report(snap("z0", f, {0, 1}), snap("zT", g, {0, 2})),
                    ContractViolation);
    CHECK_THROWS_AS(adaptation_report(snap("z0", f, {0, 1}), snap("zT", h, {0, 1})),
                    ContractViolation);
}

TEST_CASE("a zero feature vector yields a NaN cosine, not a crash") {
    Matrix f(2, 3), g(2, 3);
    f(1, 0) = 1.0;
    g(1, 1) = 1.0;
    // probe 0 has z0 = zT = 0
    const AdaptationReport rep = adaptation_report(snap("z0", f, {0, 1}), snap("zT", g, {0, 1}));
    CHECK(std::isnan(rep.d_cos[0]));
    CHECK(std::isfinite(rep.d_cos[1]));
    CHECK(rep.d_euc[0] == 0.0);
}

TEST_CASE("PCA scatter projects every snapshot in the first snapshot's frozen basis") {
    // first snapshot: points spread along axis 0 (pc1) and axis 2 (pc2);
    // the spreads are zero-mean and exactly orthogonal so the principal
    // axes are exactly the input axes
    Matrix f0(6, 3);
    const double spread1[] = {-5, -3, -1, 1, 3, 5};
    const double spread2[] = {1, -1, -2, 2, 1, -1};
    for (int i = 0; i < 6; ++i) {
        f0(i, 0) = spread1[i];
        f0(i, 2) = spread2[i];
    }
    Matrix f1(6, 3);  // later snapshot: shifted copy
    for (int i = 0; i < 6; ++i) {
        f1(i, 0) = spread1[i] + 10.0;
        f1(i, 2) = spread2[i];
    }
    const std::vector<int> ids = {0, 1, 2, 3, 4, 5};
    const std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    const PcaScatter sc = pca_scatter_export({snap("z0", f0, ids), snap("zT", f1, ids)}, labels);

    CHECK_FALSE(sc.degenerate);
    REQUIRE(sc.rows.size() == 12);
    for (int i = 0; i < 6; ++i) {
        CHECK(sc.rows[i].tag == "z0");
        CHECK(sc.rows[i].sample_id == i);
        CHECK(sc.rows[i].label == labels[i]);
        // basis axis 1 is the input axis 0 (up to sign shared across rows)
        CHECK(std::fabs(sc.rows[i].pc1) == doctest::Approx(std::fabs(spread1[i])).epsilon(1e-9));
        CHECK(std::fabs(sc.rows[i].pc2) == doctest::Approx(std::fabs(spread2[i])).epsilon(1e-9));
    }
    // the later snapshot reuses the SAME centering: its pc1 carries the +10 shift
    for (int i = 0; i < 6; ++i) {
        const PcaScatterRow& row = sc.rows[6 + i];
        CHECK(row.tag == "zT");
        CHECK(std::fabs(row.pc1) == doctest::Approx(std::fabs(spread1[i] + 10.0)).epsilon(1e-9));
    }
    // sign convention is consistent: pc1 of the two snapshots differ by the shift
    const double s = sc.rows[6].pc1 - sc.rows[0].pc1;
    CHECK(std::fabs(s) == doctest::Approx(10.0).epsilon(1e-9));

    const std::string csv = pca_scatter_to_csv(sc);
    CHECK(csv.find("snapshot_tag,sample_id,label,pc1,pc2") == 0);

    // unlabeled export leaves label = -1
    const PcaScatter plain = pca_scatter_export({snap("z0", f0, ids)}, {});
    CHECK(plain.rows[0].label == -1);
}

TEST_CASE("head exchange evaluates every cross pairing without mutating the models") {
    // two trained toy runs on the same data
    RngState data_rng(11);
    DownstreamData data;
    data.train = gen_gaussian_classes(6, 3, 20, 6.0, 0.5, data_rng, "train");
    data.valid = gen_gaussian_classes(6, 3, 10, 6.0, 0.5, data_rng, "valid");

    std::vector<Network> models;
    for (unsigned seed : {21u, 22u}) {
        RngState rng(seed);
        Network net;
        net.backbone = make_backbone(6, {8, 4}, Activation::relu, rng);
        net.head = make_head(HeadKind::linear, 4, 3, 0, rng);
        StageConfig cfg;
        cfg.stage = Stage::ft;
        cfg.epochs = 300;
        cfg.lr = 0.1;
        cfg.stop_at_train_acc = 0.99;
        RngState train_rng(seed + 100);
        models.push_back(finetune(net, data.train, &data.valid, cfg, {0}, 0, train_rng).model);
    }
    const std::vector<Network> before = models;

    const ExchangeMatrix em = head_exchange(models, {0, 5}, data);
    CHECK(em.taus == std::vector<int>{0, 5});
    REQUIRE(em.train_acc.rows == 2);
    REQUIRE(em.train_acc.cols == 2);

    // models untouched
    for (int m = 0; m < 2; ++m) {
        for (size_t l = 0; l < before[m].backbone.size(); ++l)
            CHECK(models[m].backbone[l].w.data == before[m].backbone[l].w.data);
        CHECK(models[m].head[0].w.data == before[m].head[0].w.data);
    }

    // manual oracle: compose backbone r with head c and evaluate
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            Network cross;
            cross.backbone = models[r].backbone;
            cross.head = models[c].head;
            CHECK(em.train_acc(r, c) == accuracy(cross, data.train.x, data.train.y));
            CHECK(em.valid_acc(r, c) == accuracy(cross, data.valid.x, data.valid.y));
        }

    // diagonal entries are the runs' own accuracies (well trained => high)
    CHECK(em.train_acc(0, 0) > 0.9);
    CHECK(em.train_acc(1, 1) > 0.9);

    const std::string csv = exchange_to_csv(em, "train");
    CHECK(csv.find("backbone_tau") == 0);

    // helper means
    Matrix t(2, 2);
    t(0, 0) = 1.0;
    t(1, 1) = 3.0;
    t(0, 1) = 2.0;
    t(1, 0) = 4.0;
    CHECK(diagonal_mean(t) == doctest::Approx(2.0));
    CHECK(offdiagonal_mean(t) == doctest::Approx(3.0));
}

TEST_CASE("head exchange insists on matching shapes and labels") {
    RngState rng(31);
    Network a, b;
    a.backbone = make_backbone(4, {5, 3}, Activation::relu, rng);
    a.head = make_head(HeadKind::linear, 3, 2, 0, rng);
    b.backbone = make_backbone(4, {6, 3}, Activation::relu, rng);  // different widths
    b.head = make_head(HeadKind::linear, 3, 2, 0, rng);

    RngState data_rng(32);
    DownstreamData data;
    data.train = gen_gaussian_classes(4, 2, 5, 4.0, 0.5, data_rng, "train");
    data.valid = gen_gaussian_classes(4, 2, 5, 4.0, 0.5, data_rng, "valid");

    CHECK_THROWS_AS(head_exchange({a, b}, {0, 1}, data), ContractViolation);
    CHECK_THROWS_AS(head_exchange({a}, {0, 1}, data), ContractViolation);
}
