// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: strict schema validation (unknown keys rejected by
// name) and conversion from validated JSON into the domain config structs.
// The schema is embedded so the binary and the published schema file cannot
// drift apart unnoticed.

#include <string>

#include <json.hpp>

#include "hpft/errors.hpp"
#include "hpft/experiments.hpp"

namespace hpft {

// The published configuration schema, verbatim (docs/config-schema.json).
const std::string& config_schema_text();

// Validates a command's configuration tree against the embedded schema.
// Throws ConfigError naming the offending key (unknown key, missing
// required key, or wrong type) or the unsupported schema_version.
void validate_config(const std::string& command, const nlohmann::ordered_json& cfg);

// ---------------------------------------------------------------------------
// validated JSON -> domain structs (absent keys take the struct defaults)
// ---------------------------------------------------------------------------

StageConfig parse_stage_config(const nlohmann::ordered_json& j, StageConfig defaults);
PretrainConfig parse_pretrain_config(const nlohmann::ordered_json& j);
DownstreamConfig parse_downstream_config(const nlohmann::ordered_json& j);
HeadSpec parse_head_spec(const nlohmann::ordered_json& j);
HpFtConfig parse_hpft_config(const nlohmann::ordered_json& j);

// CLI defaults for an HP->FT run (full batch, plain GD).
HpFtConfig default_hpft_config();

// ---------------------------------------------------------------------------
// domain structs -> JSON (inverse of the parsers: emit(x) validates against
// the schema and parses back to x)
// ---------------------------------------------------------------------------

nlohmann::ordered_json stage_config_to_json(const StageConfig& cfg);
nlohmann::ordered_json pretrain_config_to_json(const PretrainConfig& cfg);
nlohmann::ordered_json downstream_config_to_json(const DownstreamConfig& cfg);
nlohmann::ordered_json head_spec_to_json(const HeadSpec& spec);
nlohmann::ordered_json hpft_config_to_json(const HpFtConfig& cfg);

}  // namespace hpft
