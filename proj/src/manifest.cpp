#include "fable/manifest.hpp"

#include <fstream>

#include "fable/corpus.hpp"
#include "fable/error.hpp"
#include "fable/hashing.hpp"

namespace fable {

std::string tool_version() { return FABLE_VERSION; }

std::string config_hash(const json& effective_config) {
    return sha256_hex(effective_config.dump());
}

RunManifest make_manifest(std::string command, std::uint64_t seed, json effective_config) {
    RunManifest m;
    m.command = std::move(command);
    m.seed = seed;
    m.config_hash = config_hash(effective_config);
    m.effective_config = std::move(effective_config);
    m.tool_version = tool_version();
    return m;
}

std::map<std::string, std::size_t> count_per_facet(std::span<const Triplet> triplets) {
    std::map<std::string, std::size_t> out;
    for (const auto& t : triplets) {
        ++out[t.target_facet];
    }
    return out;
}

void to_json(json& j, const RunManifest& v) {
    json stages = json::array();
    for (const auto& [name, status] : v.stages) {
        stages.push_back({{"stage", name}, {"status", status}});
    }
    j = json{{"command", v.command},
             {"seed", v.seed},
             {"config_hash", v.config_hash},
             {"prompt_hashes", v.prompt_hashes},
             {"backend_ids", v.backend_ids},
             {"counts",
              {{"documents", v.counts.documents},
               {"units", v.counts.units},
               {"triplets_per_facet", v.counts.triplets_per_facet}}},
             {"tool_version", v.tool_version},
             {"effective_config", v.effective_config},
             {"stages", stages},
             {"files", v.files},
             {"stats", v.stats}};
}

void from_json(const json& j, RunManifest& v) {
    v.command = j.value("command", std::string());
    v.seed = j.at("seed").get<std::uint64_t>();
    v.config_hash = j.at("config_hash").get<std::string>();
    v.prompt_hashes = j.value("prompt_hashes", std::map<std::string, std::string>{});
    v.backend_ids = j.value("backend_ids", std::map<std::string, std::string>{});
    const auto& counts = j.at("counts");
    v.counts.documents = counts.at("documents").get<std::size_t>();
    v.counts.units = counts.at("units").get<std::size_t>();
    v.counts.triplets_per_facet =
        counts.value("triplets_per_facet", std::map<std::string, std::size_t>{});
    v.tool_version = j.at("tool_version").get<std::string>();
    v.effective_config = j.value("effective_config", json::object());
    v.stages.clear();
    for (const auto& s : j.value("stages", json::array())) {
        v.stages.emplace_back(s.at("stage").get<std::string>(), s.at("status").get<std::string>());
    }
    v.files = j.value("files", std::map<std::string, std::size_t>{});
    v.stats = j.value("stats", json::object());
}

std::filesystem::path manifest_path_for(const std::filesystem::path& output) {
    auto p = output;
    p += ".manifest.json";
    return p;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    write_json_file(path, json(manifest));
}

RunManifest read_manifest(const std::filesystem::path& path) {
    try {
        return read_json_file(path).get<RunManifest>();
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed manifest: " + e.what());
    }
}

std::size_t count_jsonl_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            ++n;
        }
    }
    return n;
}

}  // namespace fable
