#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <json.hpp>

#include "fable/types.hpp"

namespace fable {

struct ManifestCounts {
    std::size_t documents = 0;
    std::size_t units = 0;
    std::map<std::string, std::size_t> triplets_per_facet;
    bool operator==(const ManifestCounts&) const = default;
};

/// Provenance record written next to every output. Contains no timestamps or
/// absolute paths, so identical inputs and seed give identical bytes.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::map<std::string, std::string> prompt_hashes;
    std::map<std::string, std::string> backend_ids;
    ManifestCounts counts;
    std::string tool_version;
    json effective_config = json::object();
    /// Stage name to status ("completed", "skipped: labeled", ...), in run order.
    std::vector<std::pair<std::string, std::string>> stages;
    /// Output file name to its record count.
    std::map<std::string, std::size_t> files;
    json stats = json::object();

    bool operator==(const RunManifest&) const = default;
};

/// Version string compiled into the library.
std::string tool_version();

/// Digest of the canonical serialization of an effective configuration.
std::string config_hash(const json& effective_config);

/// Starts a manifest for `command`, filling the version and config hash.
RunManifest make_manifest(std::string command, std::uint64_t seed, json effective_config);

std::map<std::string, std::size_t> count_per_facet(std::span<const Triplet> triplets);

void to_json(json& j, const RunManifest& v);
void from_json(const json& j, RunManifest& v);

/// "<file>.manifest.json" beside an output file.
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// Non-blank lines of a JSONL file.
std::size_t count_jsonl_records(const std::filesystem::path& path);

}  // namespace fable
