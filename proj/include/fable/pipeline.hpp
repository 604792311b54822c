#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "fable/backends.hpp"
#include "fable/decompose.hpp"
#include "fable/manifest.hpp"
#include "fable/mine.hpp"
#include "fable/recompose.hpp"
#include "fable/synthesize.hpp"

namespace fable {

/// Per-stage seed derived from the run seed, shared by the pipeline and the
/// single-stage commands so each stage reproduces on its own.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage);

struct PipelineConfig {
    std::string schema = "abstract";
    std::filesystem::path docs;
    std::string input_shape = "documents";
    std::optional<std::filesystem::path> template_dir;
    std::uint64_t seed = 0;
    std::size_t concurrency = 4;
    std::string backend = "mock";

    DecomposeOptions decompose;
    SynthesizeOptions synthesize;
    RecomposeOptions recompose;

    bool mine = false;
    MiningConfig mining;

    /// Document-level train/validation split of the triplets.
    std::optional<double> split_ratio;
    /// Reuse complete decompositions already present in the output directory.
    bool resume = false;

    void validate() const;
};

/// Effective configuration as recorded in the manifest. Output locations are
/// excluded so that the same run written to two places records the same bytes.
nlohmann::json to_json_value(const PipelineConfig& config);
/// Missing keys keep their defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

struct PipelineArtifacts {
    std::filesystem::path decomposition_units;
    std::filesystem::path units;
    std::filesystem::path pseudo_documents;
    std::filesystem::path triplets;
    std::optional<std::filesystem::path> scored_units;
    std::optional<std::filesystem::path> hard_negative_triplets;
    std::optional<std::filesystem::path> hard_negative_pseudo_documents;
    std::optional<std::filesystem::path> mining_report;
    std::optional<std::filesystem::path> train_triplets;
    std::optional<std::filesystem::path> val_triplets;
    std::filesystem::path manifest_path;
    RunManifest manifest;
};

/// decompose (or adopt labels) -> synthesize -> [mine] -> recompose, writing
/// every intermediate file and one manifest into `out_dir`. When mining is on
/// it runs before recomposition so that dropped negatives are excluded from
/// the base triplets. A stage that fails for some documents writes what it
/// completed and throws PartialCompletion.
PipelineArtifacts run_pipeline(const PipelineConfig& config, const BackendSet& backends,
                               const std::filesystem::path& out_dir);

}  // namespace fable
