// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "hpft/config.hpp"
#include "hpft/store.hpp"

using namespace hpft;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("hpft_test_" + std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

Network sample_network(unsigned seed) {
    RngState rng(seed);
    Network net;
    net.backbone = make_backbone(5, {6, 4}, Activation::relu, rng);
    net.head = make_head(HeadKind::mlp2, 4, 3, 7, rng);
    return net;
}

}  // namespace

TEST_CASE("FNV-1a matches the published reference values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("hello world\n") == 0x782e1488cd5a68b7ULL);
    CHECK(fnv1a64_hex("") == "cbf29ce484222325");
    CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("text file round trip and missing-file reporting") {
    TempDir tmp;
    const std::string path = tmp.sub("nested/dir/file.txt");
    write_text_file(path, "line one\nline two\n");
    CHECK(read_text_file(path) == "line one\nline two\n");
    CHECK_THROWS_AS(read_text_file(tmp.sub("absent.txt")), MissingInputError);
}

TEST_CASE("CSV splitting drops carriage returns and the final newline") {
    const auto rows = parse_csv("a,b,c\r\n1,2,3\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"a", "b", "c"});
    CHECK(rows[1] == std::vector<std::string>{"1", "2", "3"});

    // an unterminated final row is still returned ...
    const auto tail = parse_csv("x,y\n7,8");
    REQUIRE(tail.size() == 2);
    CHECK(tail[1] == std::vector<std::string>{"7", "8"});

    // ... and a blank line is one empty cell, not silence
    const auto blank = parse_csv("x\n\n");
    REQUIRE(blank.size() == 2);
    CHECK(blank[1] == std::vector<std::string>{""});
}

TEST_CASE("run store: conflict, force, duplicate paths, manifest") {
    TempDir tmp;
    const std::string root = tmp.sub("run");
    {
        RunStore store(root, false);
        store.put("metrics/a.csv", "x,y\n1,2\n");
        store.put("data/b.txt", "hello");
        CHECK_THROWS_AS(store.put("metrics/a.csv", "again"), ContractViolation);
        CHECK_THROWS_AS(store.put("/etc/absolute", "no"), ContractViolation);
        CHECK_THROWS_AS(store.put("../escape", "no"), ContractViolation);
        store.finalize("run", ordered_json{{"schema_version", 1}},
                       ordered_json{{"score", 0.5}});
    }

    // the directory now refuses a second store without force
    CHECK_THROWS_AS(RunStore(root, false), OutputConflictError);

    const ordered_json manifest = load_manifest(root);
    CHECK(manifest.at("format") == "hpft-run");
    CHECK(manifest.at("version") == 1);
    CHECK(manifest.at("command") == "run");
    CHECK(manifest.at("results").at("score") == 0.5);
    REQUIRE(manifest.at("files").size() == 2);
    // sorted by path
    CHECK(manifest.at("files")[0].at("path") == "data/b.txt");
    CHECK(manifest.at("files")[1].at("path") == "metrics/a.csv");
    CHECK(manifest.at("files")[0].at("bytes") == 5);

    // intact store verifies clean; tampering is caught
    CHECK(verify_manifest(root).empty());
    write_text_file(root + "/metrics/a.csv", "x,y\n9,9\n");
    const std::vector<std::string> bad = verify_manifest(root);
    REQUIRE(bad.size() == 1);
    CHECK(bad[0] == "metrics/a.csv");
    fs::remove(fs::path(root) / "data" / "b.txt");
    CHECK(verify_manifest(root).size() == 2);

    // force replaces the old contents wholesale
    {
        RunStore fresh(root, true);
        fresh.put("only.txt", "new");
        fresh.finalize("run", ordered_json::object(), ordered_json::object());
    }
    CHECK_FALSE(fs::exists(fs::path(root) / "metrics" / "a.csv"));
    CHECK(verify_manifest(root).empty());

    CHECK_THROWS_AS(load_manifest(tmp.sub("nowhere")), MissingInputError);
}

TEST_CASE("network JSON round trip is bit-exact and keeps metadata") {
    const Network net = sample_network(3);
    ordered_json meta;
    meta["note"] = "checkpoint-test";
    meta["seed"] = 42;
    const std::string text = network_to_json(net, meta);

    const Network back = network_from_json(text);
    REQUIRE(back.backbone.size() == net.backbone.size());
    REQUIRE(back.head.size() == net.head.size());
    for (size_t l = 0; l < net.backbone.size(); ++l) {
        CHECK(back.backbone[l].w.data == net.backbone[l].w.data);
        CHECK(back.backbone[l].b == net.backbone[l].b);
        CHECK(back.backbone[l].use_bias == net.backbone[l].use_bias);
        CHECK(back.backbone[l].act == net.backbone[l].act);
    }
    for (size_t l = 0; l < net.head.size(); ++l) {
        CHECK(back.head[l].w.data == net.head[l].w.data);
        CHECK(back.head[l].b == net.head[l].b);
    }
    const ordered_json meta_back = network_meta_from_json(text);
    CHECK(meta_back.at("note") == "checkpoint-test");
    CHECK(meta_back.at("seed") == 42);

    // serialization itself is deterministic
    CHECK(network_to_json(net, meta) == text);

    CHECK_THROWS_AS(network_from_json("{\"format\":\"other\"}"), ContractViolation);
}

TEST_CASE("snapshot CSV round trip preserves ids exactly and floats to 9 digits") {
    RngState rng(4);
    FeatureSnapshot snap;
    snap.tag = "z0";
    snap.probe_ids = {3, 11, 19};
    snap.features = Matrix(3, 5);
    for (double& v : snap.features.data) v = rng.next_normal();

    const std::string csv = snapshot_to_csv(snap);
    CHECK(csv.rfind("probe_id,z0,z1,z2,z3,z4\n", 0) == 0);
    const FeatureSnapshot back = snapshot_from_csv(csv, "z0");
    CHECK(back.tag == "z0");
    CHECK(back.probe_ids == snap.probe_ids);
    REQUIRE(back.features.rows == 3);
    REQUIRE(back.features.cols == 5);
    for (size_t i = 0; i < snap.features.data.size(); ++i)
        CHECK(back.features.data[i] ==
              doctest::Approx(snap.features.data[i]).epsilon(1e-8));
}

TEST_CASE("schema text parses and matches the shipped file") {
    const std::string& text = config_schema_text();
    const ordered_json schema = ordered_json::parse(text);
    CHECK(schema.at("format") == "hpft-config-schema");
    CHECK(schema.at("version") == 1);
    CHECK(schema.contains("commands"));
    CHECK(schema.contains("definitions"));
}

TEST_CASE("config validation points at the offending key by dot-path") {
    ordered_json cfg;
    cfg["schema_version"] = 1;
    cfg["pretrain"] = ordered_json::object();
    cfg["pretrain"]["input_dim"] = 8;
    validate_config("pretrain", cfg);  // clean

    SUBCASE("unknown keys are named") {
        cfg["pretrain"]["bogus_key"] = 1;
        try {
            validate_config("pretrain", cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("unknown key") != std::string::npos);
            CHECK(msg.find("pretrain.bogus_key") != std::string::npos);
        }
    }

    SUBCASE("wrong types are named") {
        cfg["pretrain"]["input_dim"] = "eight";
        try {
            validate_config("pretrain", cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("pretrain.input_dim") != std::string::npos);
        }
    }

    SUBCASE("missing required keys are named") {
        ordered_json run_cfg;
        run_cfg["schema_version"] = 1;
        try {
            validate_config("run", run_cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("missing required key") != std::string::npos);
            CHECK(msg.find("checkpoint") != std::string::npos);
        }
    }

    SUBCASE("unsupported schema versions are rejected") {
        cfg["schema_version"] = 2;
        CHECK_THROWS_AS(validate_config("pretrain", cfg), ConfigError);
    }

    SUBCASE("unknown commands are rejected") {
        CHECK_THROWS_AS(validate_config("frobnicate", cfg), ContractViolation);
    }
}

TEST_CASE("config emitters invert the parsers") {
    SUBCASE("stage config") {
        StageConfig cfg;
        cfg.stage = Stage::ft;
        cfg.epochs = 7;
        cfg.lr = 0.125;
        cfg.momentum = 0.5;
        cfg.batch_size = 16;
        cfg.loss = LossKind::mse;
        cfg.label_eta = 0.9;
        cfg.early_stop = EarlyStop{"valid_acc", 4, 0.01};
        cfg.stop_at_train_acc = 0.75;
        const ordered_json j = stage_config_to_json(cfg);
        const StageConfig back = parse_stage_config(j, StageConfig{});
        CHECK(back.epochs == 7);
        CHECK(back.lr == 0.125);
        CHECK(back.momentum == 0.5);
        CHECK(back.batch_size == 16);
        CHECK(back.loss == LossKind::mse);
        CHECK(back.label_eta == 0.9);
        REQUIRE(back.early_stop.has_value());
        CHECK(back.early_stop->metric == "valid_acc");
        CHECK(back.early_stop->patience == 4);
        CHECK(back.early_stop->min_delta == 0.01);
        REQUIRE(back.stop_at_train_acc.has_value());
        CHECK(*back.stop_at_train_acc == 0.75);
    }

    SUBCASE("pretrain config") {
        PretrainConfig cfg = default_pretrain_config();
        cfg.input_dim = 9;
        cfg.widths = {5, 4};
        cfg.data_seed = 123;
        cfg.target_train_acc = 0.9;
        const PretrainConfig back = parse_pretrain_config(pretrain_config_to_json(cfg));
        CHECK(back.input_dim == 9);
        CHECK(back.widths == std::vector<int>{5, 4});
        CHECK(back.data_seed == 123);
        CHECK(back.target_train_acc == 0.9);
        CHECK(back.stage.epochs == cfg.stage.epochs);
    }

    SUBCASE("downstream config") {
        DownstreamConfig cfg;
        cfg.class_subset = {1, 3};
        cfg.rotation_angle = 0.25;
        cfg.scale = 2.0;
        cfg.extra_noise_sigma = 0.4;
        cfg.per_class_train = 50;
        cfg.per_class_valid = 25;
        cfg.shift_seed = 17;
        const DownstreamConfig back = parse_downstream_config(downstream_config_to_json(cfg));
        CHECK(back.class_subset == std::vector<int>{1, 3});
        CHECK(back.rotation_angle == 0.25);
        CHECK(back.scale == 2.0);
        CHECK(back.extra_noise_sigma == 0.4);
        CHECK(back.per_class_train == 50);
        CHECK(back.per_class_valid == 25);
        CHECK(back.shift_seed == 17);
    }

    SUBCASE("head spec and composed run config") {
        HeadSpec spec;
        spec.kind = HeadKind::mlp2;
        spec.hidden_width = 24;
        const HeadSpec back = parse_head_spec(head_spec_to_json(spec));
        CHECK(back.kind == HeadKind::mlp2);
        CHECK(back.hidden_width == 24);

        HpFtConfig cfg = default_hpft_config();
        cfg.hp.epochs = 9;
        cfg.ft.lr = 0.01;
        cfg.probe_count = 33;
        cfg.snapshot_every = 2;
        cfg.keep_epoch_models = false;  // in-process knob, not a config key
        const HpFtConfig rt = parse_hpft_config(hpft_config_to_json(cfg));
        CHECK(rt.hp.epochs == 9);
        CHECK(rt.hp.stage == Stage::hp);
        CHECK(rt.ft.lr == 0.01);
        CHECK(rt.ft.stage == Stage::ft);
        CHECK(rt.probe_count == 33);
        CHECK(rt.snapshot_every == 2);
        CHECK(rt.keep_epoch_models == true);  // parser leaves the default
    }

    SUBCASE("negative seeds are rejected") {
        ordered_json j = downstream_config_to_json(DownstreamConfig{});
        j["shift_seed"] = -1;
        CHECK_THROWS_AS(parse_downstream_config(j), ConfigError);
    }
}
