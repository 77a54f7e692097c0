// SPDX-License-Identifier: Apache-2.0
#include "hpft/store.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hpft/csv.hpp"

namespace fs = std::filesystem;

namespace hpft {

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& bytes) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), "cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    require(static_cast<bool>(out), "short write: " + path);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    for (char c : text) {
        if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\n') {
            row.push_back(std::move(cell));
            cell.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    if (!cell.empty() || !row.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// output directory
// ---------------------------------------------------------------------------

RunStore::RunStore(const std::string& root, bool force) : root_(root) {
    require(!root.empty(), "RunStore: empty output directory");
    const fs::path dir(root);
    if (fs::exists(dir)) {
        require(fs::is_directory(dir), "RunStore: output path is not a directory: " + root);
        if (!fs::is_empty(dir)) {
            if (!force)
                throw OutputConflictError("output directory already holds files: " + root +
                                          " (pass --force to replace it)");
            fs::remove_all(dir);
        }
    }
    fs::create_directories(dir);
}

void RunStore::put(const std::string& relpath, const std::string& bytes) {
    require(!finalized_, "RunStore: put after finalize");
    require(!relpath.empty() && relpath.front() != '/' && relpath.find("..") == std::string::npos,
            "RunStore: relative forward paths only: " + relpath);
    require(!files_.count(relpath), "RunStore: duplicate file: " + relpath);
    write_text_file((fs::path(root_) / relpath).string(), bytes);
    files_[relpath] = {fnv1a64_hex(bytes), bytes.size()};
}

void RunStore::finalize(const std::string& command, const nlohmann::ordered_json& config,
                        const nlohmann::ordered_json& results) {
    require(!finalized_, "RunStore: finalize called twice");
    nlohmann::ordered_json m;
    m["format"] = "hpft-run";
    m["version"] = 1;
    m["command"] = command;
    m["config"] = config;
    m["results"] = results;
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    for (const auto& [path, meta] : files_) {
        nlohmann::ordered_json f;
        f["path"] = path;
        f["fnv1a64"] = meta.first;
        f["bytes"] = meta.second;
        files.push_back(std::move(f));
    }
    m["files"] = std::move(files);
    write_text_file((fs::path(root_) / "manifest.json").string(), m.dump(2) + "\n");
    finalized_ = true;
}

nlohmann::ordered_json load_manifest(const std::string& dir) {
    const std::string text = read_text_file((fs::path(dir) / "manifest.json").string());
    nlohmann::ordered_json m;
    try {
        m = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw MissingInputError("unreadable manifest in " + dir + ": " + e.what());
    }
    if (!m.is_object() || m.value("format", "") != "hpft-run")
        throw MissingInputError("not a run manifest: " + dir + "/manifest.json");
    return m;
}

std::vector<std::string> verify_manifest(const std::string& dir) {
    const nlohmann::ordered_json m = load_manifest(dir);
    std::vector<std::string> bad;
    for (const auto& f : m.at("files")) {
        const std::string rel = f.at("path").get<std::string>();
        const fs::path full = fs::path(dir) / rel;
        if (!fs::exists(full)) {
            bad.push_back(rel);
            continue;
        }
        const std::string bytes = read_text_file(full.string());
        if (fnv1a64_hex(bytes) != f.at("fnv1a64").get<std::string>() ||
            bytes.size() != f.at("bytes").get<size_t>())
            bad.push_back(rel);
    }
    return bad;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

std::string act_name(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation act_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw ContractViolation("unknown activation in checkpoint: " + s);
}

nlohmann::ordered_json layer_to_json(const DenseLayer& l) {
    nlohmann::ordered_json j;
    j["rows"] = l.w.rows;
    j["cols"] = l.w.cols;
    j["w"] = l.w.data;
    j["b"] = l.b;
    j["use_bias"] = l.use_bias;
    j["act"] = act_name(l.act);
    return j;
}

DenseLayer layer_from_json(const nlohmann::ordered_json& j) {
    DenseLayer l;
    l.w = Matrix(j.at("rows").get<int>(), j.at("cols").get<int>());
    l.w.data = j.at("w").get<Vector>();
    require(l.w.data.size() == static_cast<size_t>(l.w.rows) * l.w.cols,
            "checkpoint layer weight array has the wrong length");
    l.b = j.at("b").get<Vector>();
    l.use_bias = j.at("use_bias").get<bool>();
    l.act = act_from_name(j.at("act").get<std::string>());
    require(!l.use_bias || l.b.size() == static_cast<size_t>(l.w.rows),
            "checkpoint layer bias array has the wrong length");
    return l;
}

}  // namespace

std::string network_to_json(const Network& net, const nlohmann::ordered_json& meta) {
    nlohmann::ordered_json j;
    j["format"] = "hpft-network";
    j["version"] = 1;
    if (!meta.is_null()) j["meta"] = meta;
    auto stack = [](const std::vector<DenseLayer>& layers) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const DenseLayer& l : layers) arr.push_back(layer_to_json(l));
        return arr;
    };
    j["backbone"] = stack(net.backbone);
    j["head"] = stack(net.head);
    return j.dump(2) + "\n";
}

namespace {

nlohmann::ordered_json parse_network_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ContractViolation(std::string("unreadable network checkpoint: ") + e.what());
    }
    require(j.is_object() && j.value("format", "") == "hpft-network",
            "not a network checkpoint");
    require(j.value("version", 0) == 1, "unsupported network checkpoint version");
    return j;
}

}  // namespace

Network network_from_json(const std::string& text) {
    const nlohmann::ordered_json j = parse_network_json(text);
    Network net;
    for (const auto& l : j.at("backbone")) net.backbone.push_back(layer_from_json(l));
    for (const auto& l : j.at("head")) net.head.push_back(layer_from_json(l));
    require(!net.backbone.empty() && !net.head.empty(), "checkpoint network has empty stacks");
    return net;
}

nlohmann::ordered_json network_meta_from_json(const std::string& text) {
    const nlohmann::ordered_json j = parse_network_json(text);
    return j.contains("meta") ? j.at("meta") : nlohmann::ordered_json();
}

// ---------------------------------------------------------------------------
// feature snapshots
// ---------------------------------------------------------------------------

std::string snapshot_to_csv(const FeatureSnapshot& snap) {
    std::vector<std::string> header = {"probe_id"};
    for (int c = 0; c < snap.features.cols; ++c) header.push_back("z" + std::to_string(c));
    CsvWriter w(header);
    for (int r = 0; r < snap.features.rows; ++r) {
        w.cell(snap.probe_ids[r]);
        for (int c = 0; c < snap.features.cols; ++c) w.cell(snap.features(r, c));
        w.end_row();
    }
    return w.str();
}

FeatureSnapshot snapshot_from_csv(const std::string& csv, const std::string& tag) {
    const auto rows = parse_csv(csv);
    require(rows.size() >= 2 && rows.front().size() >= 2 && rows.front()[0] == "probe_id",
            "snapshot CSV must have a probe_id header and at least one row");
    FeatureSnapshot snap;
    snap.tag = tag;
    const int h = static_cast<int>(rows.front().size()) - 1;
    snap.features = Matrix(static_cast<int>(rows.size()) - 1, h);
    for (size_t r = 1; r < rows.size(); ++r) {
        require(rows[r].size() == rows.front().size(), "ragged snapshot CSV row");
        snap.probe_ids.push_back(std::stoi(rows[r][0]));
        for (int c = 0; c < h; ++c)
            snap.features(static_cast<int>(r) - 1, c) = std::stod(rows[r][c + 1]);
    }
    return snap;
}

}  // namespace hpft
