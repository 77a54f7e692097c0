// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run persistence: FNV-1a content hashes, text-file helpers, the RunStore
// output-directory layout (manifest.json + metrics/ + checkpoints/ +
// snapshots/), a versioned JSON envelope for network checkpoints, and CSV
// round-trips for feature snapshots. Everything written through a RunStore
// is hashed and listed in its manifest; nothing here emits timestamps, so
// identical runs produce identical bytes.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hpft/errors.hpp"
#include "hpft/model.hpp"
#include "hpft/train.hpp"

namespace hpft {

// 64-bit FNV-1a over the raw bytes.
uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

// Reads a whole file; throws MissingInputError when it cannot be opened.
std::string read_text_file(const std::string& path);

// Writes bytes, creating parent directories as needed.
void write_text_file(const std::string& path, const std::string& bytes);

// Splits CSV text into rows of cells. Our CSVs never quote, so a plain
// comma/newline split is exact; empty trailing lines are dropped.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// ---------------------------------------------------------------------------
// output directory
// ---------------------------------------------------------------------------

// Owns one run's output directory. The constructor refuses a non-empty
// directory unless force is set (then the previous contents are deleted).
// Every put() records the file's content hash; finalize() writes
// manifest.json listing all files plus the caller's config/result payload.
class RunStore {
  public:
    RunStore(const std::string& root, bool force);

    // Writes bytes to <root>/<relpath> and records its hash. Forward-slash
    // relative paths only; each path may be written once.
    void put(const std::string& relpath, const std::string& bytes);

    // Writes manifest.json: {"format", "version", "command", "config",
    // "results", "files": [{"path", "fnv1a64", "bytes"} ...]} with files
    // sorted by path. Call once, after the last put().
    void finalize(const std::string& command, const nlohmann::ordered_json& config,
                  const nlohmann::ordered_json& results);

    const std::string& root() const { return root_; }

  private:
    std::string root_;
    bool finalized_ = false;
    std::map<std::string, std::pair<std::string, size_t>> files_;  // path -> (hash, bytes)
};

// Loads <dir>/manifest.json; throws MissingInputError when absent or not a
// run manifest.
nlohmann::ordered_json load_manifest(const std::string& dir);

// Re-hashes every file listed in the manifest. Returns the paths whose hash
// or size no longer matches (missing files included); empty means intact.
std::vector<std::string> verify_manifest(const std::string& dir);

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

// Versioned JSON envelope for a network; parameter arrays are serialized as
// shortest round-trip decimals, so from(to(net)) is bit-exact. `meta` is an
// optional caller payload (e.g. the generating config) stored verbatim.
std::string network_to_json(const Network& net,
                            const nlohmann::ordered_json& meta = nlohmann::ordered_json());
Network network_from_json(const std::string& text);
nlohmann::ordered_json network_meta_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// feature snapshots
// ---------------------------------------------------------------------------

// Columns: probe_id, z0..z{h-1}; one row per probe.
std::string snapshot_to_csv(const FeatureSnapshot& snap);
FeatureSnapshot snapshot_from_csv(const std::string& csv, const std::string& tag);

}  // namespace hpft
