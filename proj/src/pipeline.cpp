#include "fable/pipeline.hpp"

#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fable/corpus.hpp"
#include "fable/error.hpp"
#include "fable/prompts.hpp"
#include "fable/random.hpp"

namespace fable {

namespace {

std::string summarize_failures(std::string_view stage, std::size_t processed, std::size_t total,
                               const std::vector<StageFailure>& failures) {
    return fmt::format("{} stopped: {} of {} documents completed, {} failed (first: {}: {})",
                       stage, processed, total, failures.size(), failures.front().doc_id,
                       failures.front().message);
}

/// Partial stages always surface as PartialCompletion with a resume hint.
[[noreturn]] void raise_partial(const std::string& message, const std::string& hint) {
    throw PartialCompletion(message + "; " + hint);
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) {
    return derive_seed(seed, stage);
}

void PipelineConfig::validate() const {
    resolve_schema(schema);
    parse_record_shape(input_shape);
    if (docs.empty()) {
        throw ValidationError("pipeline: no input documents configured");
    }
    if (concurrency == 0) {
        throw ValidationError("concurrency must be >= 1");
    }
    if (backend != "mock" && backend != "http") {
        throw ValidationError("backend must be mock or http, got '" + backend + "'");
    }
    if (synthesize.variants == 0) {
        throw ValidationError("variants must be >= 1");
    }
    recompose.pairing.validate();
    if (mine) {
        mining.validate();
    }
    if (split_ratio && !(*split_ratio > 0.0 && *split_ratio < 1.0)) {
        throw ValidationError("split ratio must lie in (0, 1)");
    }
}

nlohmann::json to_json_value(const PipelineConfig& c) {
    nlohmann::json j{
        {"schema", c.schema},
        {"docs", c.docs.generic_string()},
        {"input_shape", c.input_shape},
        {"template_dir", c.template_dir ? nlohmann::json(c.template_dir->generic_string())
                                        : nlohmann::json(nullptr)},
        {"seed", c.seed},
        {"concurrency", c.concurrency},
        {"backend", c.backend},
        {"decompose",
         {{"temperature", c.decompose.temperature},
          {"max_tokens", c.decompose.max_tokens},
          {"max_retries", c.decompose.max_retries},
          {"summary_word_cap", c.decompose.summary_word_cap}}},
        {"synthesize",
         {{"temperature", c.synthesize.temperature},
          {"max_tokens", c.synthesize.max_tokens},
          {"max_retries", c.synthesize.max_retries},
          {"variants", c.synthesize.variants}}},
        {"recompose",
         {{"mode", std::string(to_string(c.recompose.pairing.mode))},
          {"fraction", c.recompose.pairing.subsample_fraction},
          {"separator", c.recompose.separator},
          {"per_doc_cap", c.recompose.per_doc_cap ? nlohmann::json(*c.recompose.per_doc_cap)
                                                  : nlohmann::json(nullptr)}}},
        {"mine",
         {{"enabled", c.mine},
          {"easy", c.mining.easy_threshold},
          {"ceiling", c.mining.hard_ceiling},
          {"band_low", c.mining.target_band.low},
          {"band_high", c.mining.target_band.high},
          {"rounds", c.mining.max_rounds},
          {"over_ceiling", std::string(to_string(c.mining.over_ceiling_policy))}}},
        {"split_ratio", c.split_ratio ? nlohmann::json(*c.split_ratio) : nlohmann::json(nullptr)},
        {"resume", c.resume}};
    return j;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        c.schema = j.value("schema", c.schema);
        c.docs = j.value("docs", std::string());
        c.input_shape = j.value("input_shape", c.input_shape);
        if (j.contains("template_dir") && !j["template_dir"].is_null()) {
            c.template_dir = j["template_dir"].get<std::string>();
        }
        c.seed = j.value("seed", c.seed);
        c.concurrency = j.value("concurrency", c.concurrency);
        c.backend = j.value("backend", c.backend);
        const auto d = j.value("decompose", nlohmann::json::object());
        c.decompose.temperature = d.value("temperature", c.decompose.temperature);
        c.decompose.max_tokens = d.value("max_tokens", c.decompose.max_tokens);
        c.decompose.max_retries = d.value("max_retries", c.decompose.max_retries);
        c.decompose.summary_word_cap = d.value("summary_word_cap", c.decompose.summary_word_cap);
        const auto s = j.value("synthesize", nlohmann::json::object());
        c.synthesize.temperature = s.value("temperature", c.synthesize.temperature);
        c.synthesize.max_tokens = s.value("max_tokens", c.synthesize.max_tokens);
        c.synthesize.max_retries = s.value("max_retries", c.synthesize.max_retries);
        c.synthesize.variants = s.value("variants", c.synthesize.variants);
        const auto r = j.value("recompose", nlohmann::json::object());
        c.recompose.pairing.mode = parse_triplet_mode(
            r.value("mode", std::string(to_string(c.recompose.pairing.mode))));
        c.recompose.pairing.subsample_fraction =
            r.value("fraction", c.recompose.pairing.subsample_fraction);
        c.recompose.separator = r.value("separator", c.recompose.separator);
        if (r.contains("per_doc_cap") && !r["per_doc_cap"].is_null()) {
            c.recompose.per_doc_cap = r["per_doc_cap"].get<std::size_t>();
        }
        const auto m = j.value("mine", nlohmann::json::object());
        c.mine = m.value("enabled", c.mine);
        c.mining.easy_threshold = m.value("easy", c.mining.easy_threshold);
        c.mining.hard_ceiling = m.value("ceiling", c.mining.hard_ceiling);
        c.mining.target_band.low = m.value("band_low", c.mining.target_band.low);
        c.mining.target_band.high = m.value("band_high", c.mining.target_band.high);
        c.mining.max_rounds = m.value("rounds", c.mining.max_rounds);
        c.mining.over_ceiling_policy = parse_over_ceiling_policy(
            m.value("over_ceiling", std::string(to_string(c.mining.over_ceiling_policy))));
        if (j.contains("split_ratio") && !j["split_ratio"].is_null()) {
            c.split_ratio = j["split_ratio"].get<double>();
        }
        c.resume = j.value("resume", c.resume);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("pipeline config: ") + e.what());
    }
    return c;
}

PipelineArtifacts run_pipeline(const PipelineConfig& config, const BackendSet& backends,
                               const std::filesystem::path& out_dir) {
    config.validate();
    if (!backends.generator || !backends.scorer) {
        throw ValidationError("pipeline needs a generator and a scorer backend");
    }
    const auto schema = resolve_schema(config.schema);
    const auto prompts =
        config.template_dir ? PromptSet::load_dir(*config.template_dir) : PromptSet::defaults();
    const auto shape = parse_record_shape(config.input_shape);
    const auto docs = shape == RecordShape::documents ? load_documents(config.docs, schema)
                                                      : ingest_records(config.docs, shape, schema);
    if (docs.empty()) {
        throw ValidationError("pipeline: " + config.docs.string() + " holds no documents");
    }
    std::filesystem::create_directories(out_dir);

    PipelineArtifacts art;
    art.decomposition_units = out_dir / "units.jsonl";
    art.units = out_dir / "units2.jsonl";
    art.pseudo_documents = out_dir / "pseudo_documents.jsonl";
    art.triplets = out_dir / "triplets.jsonl";
    art.manifest_path = out_dir / "manifest.json";

    auto& manifest = art.manifest;
    manifest = make_manifest("pipeline", config.seed, to_json_value(config));
    manifest.prompt_hashes = prompts.hashes();
    manifest.backend_ids["generator"] = backends.generator->id();
    manifest.backend_ids["scorer"] = backends.scorer->id();
    manifest.counts.documents = docs.size();
    const std::string resume_hint =
        "completed per-document outputs are in " + out_dir.string() + "; rerun with --resume";

    auto finish_partial = [&](const std::string& stage, const std::string& message) {
        manifest.stages.emplace_back(stage, "partial");
        write_manifest(art.manifest_path, manifest);
        raise_partial(message, resume_hint);
    };

    // Decompose.
    std::vector<FacetUnit> existing;
    if (config.resume && std::filesystem::exists(art.decomposition_units)) {
        existing = read_jsonl<FacetUnit>(art.decomposition_units);
    }
    auto dopts = config.decompose;
    dopts.seed = stage_seed(config.seed, "decompose");
    dopts.concurrency = config.concurrency;
    auto decomposed = decompose_corpus(docs, schema, prompts, *backends.generator, dopts, existing);
    write_jsonl(art.decomposition_units, decomposed.units);
    manifest.files["units.jsonl"] = decomposed.units.size();
    manifest.stats["decompose"] = {{"documents", decomposed.documents_processed},
                                   {"summaries", decomposed.summaries},
                                   {"adopted", decomposed.adopted},
                                   {"long_summaries", decomposed.long_summaries},
                                   {"reused_documents", decomposed.reused_documents},
                                   {"failures", decomposed.failures.size()}};
    if (!decomposed.failures.empty()) {
        finish_partial("decompose", summarize_failures("decompose", decomposed.documents_processed,
                                                       docs.size(), decomposed.failures));
    }
    manifest.stages.emplace_back(
        "decompose", decomposed.fully_labeled_documents == docs.size() ? "skipped: labeled"
                                                                        : "completed");

    // Synthesize.
    auto sopts = config.synthesize;
    sopts.seed = stage_seed(config.seed, "synthesize");
    sopts.concurrency = config.concurrency;
    auto synthesized =
        synthesize_corpus(docs, decomposed.units, schema, prompts, *backends.generator, sopts);
    write_jsonl(art.units, synthesized.units);
    manifest.files["units2.jsonl"] = synthesized.units.size();
    manifest.stats["synthesize"] = {{"documents", synthesized.documents_processed},
                                    {"similar", synthesized.similar},
                                    {"dissimilar", synthesized.dissimilar},
                                    {"failures", synthesized.failures.size()}};
    if (!synthesized.failures.empty()) {
        finish_partial("synthesize",
                       summarize_failures("synthesize", synthesized.documents_processed,
                                          docs.size(), synthesized.failures));
    }
    manifest.stages.emplace_back("synthesize", "completed");

    // Optional mining, ahead of recomposition.
    std::vector<FacetUnit> final_units = synthesized.units;
    std::optional<MiningResult> mined;
    if (config.mine) {
        MiningOptions mopts;
        mopts.seed = stage_seed(config.seed, "mine");
        mopts.concurrency = config.concurrency;
        mopts.synthesis = sopts;
        mopts.synthesis.seed = stage_seed(config.seed, "mine/regenerate");
        mopts.pairing = config.recompose.pairing.mode == TripletMode::sample_one
                            ? TripletMode::sample_one
                            : TripletMode::cross_all;
        mopts.separator = config.recompose.separator;
        mined = mine_hard_negatives(docs, synthesized.units, schema, prompts, *backends.generator,
                                    *backends.scorer, config.mining, mopts);
        final_units = mined->units;
        art.scored_units = out_dir / "units_scored.jsonl";
        art.hard_negative_triplets = out_dir / "triplets_hn.jsonl";
        art.hard_negative_pseudo_documents = out_dir / "pseudo_documents_hn.jsonl";
        art.mining_report = out_dir / "mining_report.json";
        write_jsonl(*art.scored_units, mined->units);
        write_jsonl(*art.hard_negative_triplets, mined->triplets);
        write_jsonl(*art.hard_negative_pseudo_documents, mined->pseudo_documents);
        write_json_file(*art.mining_report, to_json_value(mined->report));
        manifest.files["units_scored.jsonl"] = mined->units.size();
        manifest.files["triplets_hn.jsonl"] = mined->triplets.size();
        manifest.files["pseudo_documents_hn.jsonl"] = mined->pseudo_documents.size();
        manifest.stats["mine"] = {{"accepted", mined->report.accepted},
                                  {"regenerations", mined->report.regenerations},
                                  {"rejected", mined->report.rejected},
                                  {"dropped", mined->report.dropped},
                                  {"failures", mined->failures.size()},
                                  {"hard_negative_triplets_per_facet",
                                   count_per_facet(mined->triplets)}};
    }

    // Recompose.
    auto ropts = config.recompose;
    ropts.pairing.seed = stage_seed(config.seed, "recompose");
    auto recomposed = recompose_corpus(final_units, schema, ropts);
    write_jsonl(art.pseudo_documents, recomposed.pseudo_documents);
    write_jsonl(art.triplets, recomposed.triplets);
    manifest.files["pseudo_documents.jsonl"] = recomposed.pseudo_documents.size();
    manifest.files["triplets.jsonl"] = recomposed.triplets.size();
    manifest.stats["recompose"] = {{"documents_used", recomposed.documents_used},
                                   {"warnings", recomposed.warnings}};
    manifest.stages.emplace_back("recompose", "completed");
    if (config.mine) {
        manifest.stages.emplace_back("mine", "completed");
    }

    if (config.split_ratio) {
        std::vector<std::string> doc_ids;
        std::set<std::string> seen;
        for (const auto& t : recomposed.triplets) {
            if (seen.insert(t.doc_id).second) {
                doc_ids.push_back(t.doc_id);
            }
        }
        if (doc_ids.empty()) {
            throw ValidationError("split: no triplets to split");
        }
        auto split = split_train_val(doc_ids, *config.split_ratio, stage_seed(config.seed, "split"));
        if (split.warning) {
            spdlog::warn("split: {}", *split.warning);
        }
        const std::set<std::string> train_docs(split.train.begin(), split.train.end());
        std::vector<Triplet> train, val;
        for (const auto& t : recomposed.triplets) {
            (train_docs.contains(t.doc_id) ? train : val).push_back(t);
        }
        art.train_triplets = out_dir / "triplets_train.jsonl";
        art.val_triplets = out_dir / "triplets_val.jsonl";
        write_jsonl(*art.train_triplets, train);
        write_jsonl(*art.val_triplets, val);
        manifest.files["triplets_train.jsonl"] = train.size();
        manifest.files["triplets_val.jsonl"] = val.size();
        manifest.stages.emplace_back("split", "completed");
    }

    manifest.counts.units = final_units.size();
    manifest.counts.triplets_per_facet = recomposed.triplets_per_facet;
    write_manifest(art.manifest_path, manifest);
    spdlog::info("pipeline: {} documents, {} triplets written to {}", docs.size(),
                 recomposed.triplets.size(), out_dir.string());
    return art;
}

}  // namespace fable
