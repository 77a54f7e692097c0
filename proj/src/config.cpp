// SPDX-License-Identifier: Apache-2.0
#include "hpft/config.hpp"

namespace hpft {

namespace {

// Kept byte-identical with docs/config-schema.json (`hpft schema --check`
// and the test suite both verify this).
const char* const kSchema = R"SCHEMA({
  "format": "hpft-config-schema",
  "version": 1,
  "note": "Validation is strict: keys not listed for an object are rejected; 'integer' means a JSON integer literal.",
  "definitions": {
    "early_stop": {
      "type": "object",
      "properties": {
        "metric": {"type": "string"},
        "patience": {"type": "integer"},
        "min_delta": {"type": "number"}
      }
    },
    "stage": {
      "type": "object",
      "properties": {
        "epochs": {"type": "integer"},
        "lr": {"type": "number"},
        "momentum": {"type": "number"},
        "batch_size": {"type": "integer"},
        "loss": {"type": "string"},
        "label_eta": {"type": "number"},
        "stop_at_train_acc": {"type": "number"},
        "early_stop": {"$ref": "early_stop"}
      }
    },
    "pretrain": {
      "type": "object",
      "properties": {
        "input_dim": {"type": "integer"},
        "num_classes": {"type": "integer"},
        "per_class": {"type": "integer"},
        "mean_radius": {"type": "number"},
        "noise_sigma": {"type": "number"},
        "widths": {"type": "array", "items": {"type": "integer"}},
        "stage": {"$ref": "stage"},
        "target_train_acc": {"type": "number"},
        "data_seed": {"type": "integer"}
      }
    },
    "downstream": {
      "type": "object",
      "properties": {
        "class_subset": {"type": "array", "items": {"type": "integer"}},
        "rotation_angle": {"type": "number"},
        "scale": {"type": "number"},
        "extra_noise_sigma": {"type": "number"},
        "per_class_train": {"type": "integer"},
        "per_class_valid": {"type": "integer"},
        "shift_seed": {"type": "integer"}
      }
    },
    "head": {
      "type": "object",
      "properties": {
        "kind": {"type": "string"},
        "hidden_width": {"type": "integer"}
      }
    },
    "hpft": {
      "type": "object",
      "properties": {
        "hp": {"$ref": "stage"},
        "ft": {"$ref": "stage"},
        "probe_count": {"type": "integer"},
        "snapshot_every": {"type": "integer"}
      }
    }
  },
  "commands": {
    "gen-data": {
      "type": "object",
      "required": ["schema_version"],
      "properties": {
        "schema_version": {"type": "integer"},
        "pretrain": {"$ref": "pretrain"},
        "downstream": {"$ref": "downstream"}
      }
    },
    "pretrain": {
      "type": "object",
      "required": ["schema_version"],
      "properties": {
        "schema_version": {"type": "integer"},
        "pretrain": {"$ref": "pretrain"},
        "seed": {"type": "integer"}
      }
    },
    "run": {
      "type": "object",
      "required": ["schema_version", "checkpoint"],
      "properties": {
        "schema_version": {"type": "integer"},
        "checkpoint": {"type": "string"},
        "downstream": {"$ref": "downstream"},
        "hpft": {"$ref": "hpft"},
        "head": {"$ref": "head"},
        "seed": {"type": "integer"},
        "ntk_probes": {"type": "integer"}
      }
    },
    "sweep": {
      "type": "object",
      "required": ["schema_version", "checkpoint", "tau_grid"],
      "properties": {
        "schema_version": {"type": "integer"},
        "checkpoint": {"type": "string"},
        "downstream": {"$ref": "downstream"},
        "hpft": {"$ref": "hpft"},
        "head": {"$ref": "head"},
        "tau_grid": {"type": "array", "items": {"type": "integer"}},
        "seeds": {"type": "array", "items": {"type": "integer"}}
      }
    },
    "analyze": {
      "type": "object",
      "required": ["schema_version", "run_dir"],
      "properties": {
        "schema_version": {"type": "integer"},
        "run_dir": {"type": "string"}
      }
    },
    "exchange": {
      "type": "object",
      "required": ["schema_version", "checkpoint", "taus"],
      "properties": {
        "schema_version": {"type": "integer"},
        "checkpoint": {"type": "string"},
        "downstream": {"$ref": "downstream"},
        "hpft": {"$ref": "hpft"},
        "head": {"$ref": "head"},
        "taus": {"type": "array", "items": {"type": "integer"}},
        "seed": {"type": "integer"}
      }
    },
    "trend": {
      "type": "object",
      "required": ["schema_version"],
      "properties": {
        "schema_version": {"type": "integer"},
        "battery_size": {"type": "integer"},
        "beta_start": {"type": "number"},
        "beta_stop": {"type": "number"},
        "beta_points": {"type": "integer"},
        "seed": {"type": "integer"}
      }
    },
    "report": {
      "type": "object",
      "required": ["schema_version", "runs"],
      "properties": {
        "schema_version": {"type": "integer"},
        "runs": {"type": "array", "items": {"type": "string"}}
      }
    }
  }
}
)SCHEMA";

using ordered_json = nlohmann::ordered_json;

const ordered_json& schema_doc() {
    static const ordered_json doc = ordered_json::parse(kSchema);
    return doc;
}

const ordered_json& resolve(const ordered_json& node) {
    if (node.contains("$ref")) {
        const std::string name = node.at("$ref").get<std::string>();
        const auto& defs = schema_doc().at("definitions");
        if (!defs.contains(name))
            throw ContractViolation("schema references unknown definition: " + name);
        return defs.at(name);
    }
    return node;
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void validate_node(const ordered_json& raw_schema, const ordered_json& value,
                   const std::string& path) {
    const ordered_json& schema = resolve(raw_schema);
    const std::string type = schema.at("type").get<std::string>();
    const std::string where = path.empty() ? "<root>" : path;

    if (type == "object") {
        if (!value.is_object()) throw ConfigError(where + ": expected an object");
        if (schema.contains("required"))
            for (const auto& req : schema.at("required")) {
                const std::string key = req.get<std::string>();
                if (!value.contains(key))
                    throw ConfigError("missing required key: " + join(path, key));
            }
        const auto& props = schema.at("properties");
        for (const auto& [key, sub] : value.items()) {
            if (!props.contains(key)) throw ConfigError("unknown key: " + join(path, key));
            validate_node(props.at(key), sub, join(path, key));
        }
    } else if (type == "array") {
        if (!value.is_array()) throw ConfigError(where + ": expected an array");
        int i = 0;
        for (const auto& item : value)
            validate_node(schema.at("items"), item, path + "[" + std::to_string(i++) + "]");
    } else if (type == "integer") {
        if (!value.is_number_integer() && !value.is_number_unsigned())
            throw ConfigError(where + ": expected an integer");
    } else if (type == "number") {
        if (!value.is_number()) throw ConfigError(where + ": expected a number");
    } else if (type == "string") {
        if (!value.is_string()) throw ConfigError(where + ": expected a string");
    } else if (type == "boolean") {
        if (!value.is_boolean()) throw ConfigError(where + ": expected a boolean");
    } else {
        throw ContractViolation("schema uses unknown type: " + type);
    }
}

uint64_t get_seed(const ordered_json& j, const std::string& key, uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    if (j.at(key).is_number_integer() && j.at(key).get<int64_t>() < 0)
        throw ConfigError(key + ": seeds must be non-negative");
    return j.at(key).get<uint64_t>();
}

LossKind parse_loss(const ordered_json& j, const std::string& path) {
    const std::string s = j.get<std::string>();
    if (s == "mse") return LossKind::mse;
    if (s == "cross_entropy") return LossKind::cross_entropy;
    throw ConfigError(path + ": loss must be \"mse\" or \"cross_entropy\", got \"" + s + "\"");
}

}  // namespace

const std::string& config_schema_text() {
    static const std::string text = kSchema;
    return text;
}

void validate_config(const std::string& command, const ordered_json& cfg) {
    const auto& commands = schema_doc().at("commands");
    require(commands.contains(command), "validate_config: unknown command: " + command);
    validate_node(commands.at(command), cfg, "");
    const int64_t v = cfg.at("schema_version").get<int64_t>();
    if (v != 1)
        throw ConfigError("schema_version: unsupported value " + std::to_string(v) +
                          " (this build understands 1)");
}

StageConfig parse_stage_config(const ordered_json& j, StageConfig out) {
    if (j.contains("epochs")) out.epochs = j.at("epochs").get<int>();
    if (j.contains("lr")) out.lr = j.at("lr").get<double>();
    if (j.contains("momentum")) out.momentum = j.at("momentum").get<double>();
    if (j.contains("batch_size")) out.batch_size = j.at("batch_size").get<int>();
    if (j.contains("loss")) out.loss = parse_loss(j.at("loss"), "loss");
    if (j.contains("label_eta")) out.label_eta = j.at("label_eta").get<double>();
    if (j.contains("stop_at_train_acc"))
        out.stop_at_train_acc = j.at("stop_at_train_acc").get<double>();
    if (j.contains("early_stop")) {
        const auto& e = j.at("early_stop");
        EarlyStop es;
        if (e.contains("metric")) es.metric = e.at("metric").get<std::string>();
        if (e.contains("patience")) es.patience = e.at("patience").get<int>();
        if (e.contains("min_delta")) es.min_delta = e.at("min_delta").get<double>();
        out.early_stop = es;
    }
    return out;
}

PretrainConfig parse_pretrain_config(const ordered_json& j) {
    PretrainConfig out = default_pretrain_config();
    if (j.is_null()) return out;
    if (j.contains("input_dim")) out.input_dim = j.at("input_dim").get<int>();
    if (j.contains("num_classes")) out.num_classes = j.at("num_classes").get<int>();
    if (j.contains("per_class")) out.per_class = j.at("per_class").get<int>();
    if (j.contains("mean_radius")) out.mean_radius = j.at("mean_radius").get<double>();
    if (j.contains("noise_sigma")) out.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("widths")) out.widths = j.at("widths").get<std::vector<int>>();
    if (j.contains("stage")) out.stage = parse_stage_config(j.at("stage"), out.stage);
    if (j.contains("target_train_acc"))
        out.target_train_acc = j.at("target_train_acc").get<double>();
    out.data_seed = get_seed(j, "data_seed", out.data_seed);
    out.stage.stage = Stage::pretrain;
    return out;
}

DownstreamConfig parse_downstream_config(const ordered_json& j) {
    DownstreamConfig out;
    if (j.is_null()) return out;
    if (j.contains("class_subset")) out.class_subset = j.at("class_subset").get<std::vector<int>>();
    if (j.contains("rotation_angle")) out.rotation_angle = j.at("rotation_angle").get<double>();
    if (j.contains("scale")) out.scale = j.at("scale").get<double>();
    if (j.contains("extra_noise_sigma"))
        out.extra_noise_sigma = j.at("extra_noise_sigma").get<double>();
    if (j.contains("per_class_train")) out.per_class_train = j.at("per_class_train").get<int>();
    if (j.contains("per_class_valid")) out.per_class_valid = j.at("per_class_valid").get<int>();
    out.shift_seed = get_seed(j, "shift_seed", out.shift_seed);
    return out;
}

HeadSpec parse_head_spec(const ordered_json& j) {
    HeadSpec out;
    if (j.is_null()) return out;
    if (j.contains("kind")) {
        const std::string s = j.at("kind").get<std::string>();
        if (s == "linear")
            out.kind = HeadKind::linear;
        else if (s == "mlp2")
            out.kind = HeadKind::mlp2;
        else
            throw ConfigError("head.kind: must be \"linear\" or \"mlp2\", got \"" + s + "\"");
    }
    if (j.contains("hidden_width")) out.hidden_width = j.at("hidden_width").get<int>();
    return out;
}

HpFtConfig default_hpft_config() {
    HpFtConfig cfg;
    cfg.hp.stage = Stage::hp;
    cfg.hp.epochs = 5;
    cfg.hp.lr = 0.05;
    cfg.hp.momentum = 0.0;
    cfg.hp.batch_size = 0;  // full batch
    cfg.ft.stage = Stage::ft;
    cfg.ft.epochs = 30;
    cfg.ft.lr = 0.05;
    cfg.ft.momentum = 0.0;
    cfg.ft.batch_size = 0;
    return cfg;
}

HpFtConfig parse_hpft_config(const ordered_json& j) {
    HpFtConfig out = default_hpft_config();
    if (j.is_null()) return out;
    if (j.contains("hp")) out.hp = parse_stage_config(j.at("hp"), out.hp);
    if (j.contains("ft")) out.ft = parse_stage_config(j.at("ft"), out.ft);
    if (j.contains("probe_count")) out.probe_count = j.at("probe_count").get<int>();
    if (j.contains("snapshot_every")) out.snapshot_every = j.at("snapshot_every").get<int>();
    out.hp.stage = Stage::hp;
    out.ft.stage = Stage::ft;
    return out;
}

ordered_json stage_config_to_json(const StageConfig& cfg) {
    ordered_json j;
    j["epochs"] = cfg.epochs;
    j["lr"] = cfg.lr;
    j["momentum"] = cfg.momentum;
    j["batch_size"] = cfg.batch_size;
    j["loss"] = to_string(cfg.loss);
    j["label_eta"] = cfg.label_eta;
    if (cfg.stop_at_train_acc) j["stop_at_train_acc"] = *cfg.stop_at_train_acc;
    if (cfg.early_stop) {
        ordered_json e;
        e["metric"] = cfg.early_stop->metric;
        e["patience"] = cfg.early_stop->patience;
        e["min_delta"] = cfg.early_stop->min_delta;
        j["early_stop"] = std::move(e);
    }
    return j;
}

ordered_json pretrain_config_to_json(const PretrainConfig& cfg) {
    ordered_json j;
    j["input_dim"] = cfg.input_dim;
    j["num_classes"] = cfg.num_classes;
    j["per_class"] = cfg.per_class;
    j["mean_radius"] = cfg.mean_radius;
    j["noise_sigma"] = cfg.noise_sigma;
    j["widths"] = cfg.widths;
    j["stage"] = stage_config_to_json(cfg.stage);
    j["target_train_acc"] = cfg.target_train_acc;
    j["data_seed"] = cfg.data_seed;
    return j;
}

ordered_json downstream_config_to_json(const DownstreamConfig& cfg) {
    ordered_json j;
    j["class_subset"] = cfg.class_subset;
    j["rotation_angle"] = cfg.rotation_angle;
    j["scale"] = cfg.scale;
    j["extra_noise_sigma"] = cfg.extra_noise_sigma;
    j["per_class_train"] = cfg.per_class_train;
    j["per_class_valid"] = cfg.per_class_valid;
    j["shift_seed"] = cfg.shift_seed;
    return j;
}

ordered_json head_spec_to_json(const HeadSpec& spec) {
    ordered_json j;
    j["kind"] = to_string(spec.kind);
    j["hidden_width"] = spec.hidden_width;
    return j;
}

ordered_json hpft_config_to_json(const HpFtConfig& cfg) {
    ordered_json j;
    j["hp"] = stage_config_to_json(cfg.hp);
    j["ft"] = stage_config_to_json(cfg.ft);
    j["probe_count"] = cfg.probe_count;
    j["snapshot_every"] = cfg.snapshot_every;
    return j;
}

}  // namespace hpft
