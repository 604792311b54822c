// fable: facet-conditioned triplet synthesis, evaluation, and benchmark tooling.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fable/backends.hpp"
#include "fable/benchbuild.hpp"
#include "fable/corpus.hpp"
#include "fable/decompose.hpp"
#include "fable/error.hpp"
#include "fable/evaluate.hpp"
#include "fable/http_backends.hpp"
#include "fable/manifest.hpp"
#include "fable/metrics.hpp"
#include "fable/mine.hpp"
#include "fable/pipeline.hpp"
#include "fable/prompts.hpp"
#include "fable/recompose.hpp"
#include "fable/synthesize.hpp"

namespace fs = std::filesystem;
using namespace fable;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;
constexpr int kExitPartial = 3;

struct Globals {
    std::uint64_t seed = 0;
    std::string backend = "mock";
    std::size_t concurrency = 4;
    fs::path out_dir = ".";
    std::string normalization = "identity";
    int max_retries = 3;
    int timeout_ms = 60000;
    std::string log_level = "info";
};

fs::path output_path(const Globals& g, const fs::path& p) {
    return p.is_absolute() ? p : g.out_dir / p;
}

/// out.jsonl -> out.<suffix>
fs::path sibling(const fs::path& out, const std::string& suffix) {
    return out.parent_path() / (out.stem().string() + "." + suffix);
}

BackendSet make_backends(const Globals& g) {
    if (g.backend == "mock") {
        return make_mock_backends(g.seed);
    }
    if (g.backend != "http") {
        throw ValidationError("--backend must be mock or http");
    }
    BackendPolicy policy;
    policy.max_concurrency = g.concurrency;
    policy.max_retries = g.max_retries;
    policy.timeout = std::chrono::milliseconds(g.timeout_ms);
    return make_http_backends(policy, parse_normalization(g.normalization));
}

template <typename T>
T& require(const std::shared_ptr<T>& backend, const char* env) {
    if (!backend) {
        throw ValidationError(fmt::format("http backend not configured: set {}", env));
    }
    return *backend;
}

/// Effective values of every option of `sub` and its parent, after CLI flags,
/// config file, and defaults have been merged. Output locations are omitted.
nlohmann::json effective_config(const CLI::App& sub) {
    nlohmann::json j = nlohmann::json::object();
    auto add = [&j](const CLI::App& app) {
        for (const CLI::Option* o : app.get_options()) {
            const auto name = o->get_single_name();
            if (name == "help" || name == "config" || name == "out-dir" || name == "log-level") {
                continue;
            }
            if (o->get_type_size() == 0) {
                j[name] = o->count() > 0;
            } else if (o->count() > 0) {
                const auto& r = o->results();
                j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
            } else if (!o->get_default_str().empty()) {
                j[name] = o->get_default_str();
            } else {
                j[name] = nullptr;
            }
        }
    };
    if (sub.get_parent() != nullptr) {
        add(*sub.get_parent());
    }
    add(sub);
    return j;
}

RunManifest start_manifest(const CLI::App& sub, const Globals& g) {
    return make_manifest(sub.get_name(), g.seed, effective_config(sub));
}

void finish_manifest(RunManifest& m, const fs::path& primary_output) {
    const auto path = manifest_path_for(primary_output);
    write_manifest(path, m);
    spdlog::info("{}: manifest {}", m.command, path.string());
}

PromptSet load_prompts(const std::optional<fs::path>& dir) {
    return dir ? PromptSet::load_dir(*dir) : PromptSet::defaults();
}

std::string stage_failure_message(std::string_view stage, std::size_t done, std::size_t total,
                                  const std::vector<StageFailure>& failures) {
    return fmt::format("{}: {} of {} documents completed, {} failed (first: {}: {})", stage, done,
                       total, failures.size(), failures.front().doc_id,
                       failures.front().message);
}

std::vector<double> parse_percents(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(part, &used));
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw ValidationError("--percents: cannot parse '" + part + "'");
        }
    }
    return out;
}

std::map<std::string, std::size_t> parse_balance(const std::string& text) {
    std::map<std::string, std::size_t> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) {
            throw ValidationError("--balance expects type:count pairs, got '" + part + "'");
        }
        try {
            out[part.substr(0, colon)] = std::stoul(part.substr(colon + 1));
        } catch (const std::exception&) {
            throw ValidationError("--balance: bad count in '" + part + "'");
        }
    }
    return out;
}

// ---- ingest -----------------------------------------------------------------

struct IngestArgs {
    fs::path in;
    std::string shape = "documents";
    std::string schema = "abstract";
    fs::path out = "docs.jsonl";
};

void run_ingest(const CLI::App& sub, const Globals& g, const IngestArgs& a) {
    const auto schema = resolve_schema(a.schema);
    auto docs = ingest_records(a.in, parse_record_shape(a.shape), schema);
    const auto out = output_path(g, a.out);
    write_jsonl(out, docs);
    auto m = start_manifest(sub, g);
    m.counts.documents = docs.size();
    m.files[out.filename().string()] = docs.size();
    finish_manifest(m, out);
}

// ---- decompose --------------------------------------------------------------

struct DecomposeArgs {
    fs::path in;
    std::string schema = "abstract";
    fs::path out = "units.jsonl";
    std::optional<fs::path> template_dir;
    double temperature = 0.0;
    int max_tokens = 256;
    std::size_t word_cap = 120;
    bool resume = false;
};

void run_decompose(const CLI::App& sub, const Globals& g, const DecomposeArgs& a) {
    const auto schema = resolve_schema(a.schema);
    const auto docs = load_documents(a.in, schema);
    const auto prompts = load_prompts(a.template_dir);
    auto backends = make_backends(g);
    auto& gen = require(backends.generator, "FABLE_GEN_URL");

    const auto out = output_path(g, a.out);
    std::vector<FacetUnit> existing;
    if (a.resume && fs::exists(out)) {
        existing = read_jsonl<FacetUnit>(out);
    }
    DecomposeOptions opts;
    opts.seed = stage_seed(g.seed, "decompose");
    opts.temperature = a.temperature;
    opts.max_tokens = a.max_tokens;
    opts.summary_word_cap = a.word_cap;
    opts.concurrency = g.concurrency;
    auto result = decompose_corpus(docs, schema, prompts, gen, opts, existing);
    write_jsonl(out, result.units);

    auto m = start_manifest(sub, g);
    m.prompt_hashes = prompts.hashes();
    m.backend_ids["generator"] = gen.id();
    m.counts.documents = docs.size();
    m.counts.units = result.units.size();
    m.files[out.filename().string()] = result.units.size();
    m.stats = {{"summaries", result.summaries},
               {"adopted", result.adopted},
               {"long_summaries", result.long_summaries},
               {"reused_documents", result.reused_documents},
               {"failures", result.failures.size()}};
    const bool all_labeled = result.fully_labeled_documents == docs.size();
    m.stages.emplace_back("decompose", !result.failures.empty() ? "partial"
                                       : all_labeled            ? "skipped: labeled"
                                                                : "completed");
    finish_manifest(m, out);
    if (!result.failures.empty()) {
        throw PartialCompletion(
            stage_failure_message("decompose", result.documents_processed, docs.size(),
                                  result.failures) +
            "; completed units are in " + out.string() + "; rerun with --resume");
    }
}

// ---- synthesize -------------------------------------------------------------

struct SynthesizeArgs {
    fs::path units;
    fs::path docs;
    std::string schema = "abstract";
    fs::path out = "units2.jsonl";
    std::optional<fs::path> template_dir;
    double temperature = 0.7;
    int max_tokens = 512;
    std::size_t variants = 1;
};

void run_synthesize(const CLI::App& sub, const Globals& g, const SynthesizeArgs& a) {
    const auto schema = resolve_schema(a.schema);
    const auto docs = load_documents(a.docs, schema);
    const auto units = read_jsonl<FacetUnit>(a.units);
    const auto prompts = load_prompts(a.template_dir);
    auto backends = make_backends(g);
    auto& gen = require(backends.generator, "FABLE_GEN_URL");

    SynthesizeOptions opts;
    opts.seed = stage_seed(g.seed, "synthesize");
    opts.temperature = a.temperature;
    opts.max_tokens = a.max_tokens;
    opts.variants = a.variants;
    opts.concurrency = g.concurrency;
    auto result = synthesize_corpus(docs, units, schema, prompts, gen, opts);
    const auto out = output_path(g, a.out);
    write_jsonl(out, result.units);

    auto m = start_manifest(sub, g);
    m.prompt_hashes = prompts.hashes();
    m.backend_ids["generator"] = gen.id();
    m.counts.documents = docs.size();
    m.counts.units = result.units.size();
    m.files[out.filename().string()] = result.units.size();
    m.stats = {{"similar", result.similar},
               {"dissimilar", result.dissimilar},
               {"failures", result.failures.size()}};
    m.stages.emplace_back("synthesize", result.failures.empty() ? "completed" : "partial");
    finish_manifest(m, out);
    if (!result.failures.empty()) {
        throw PartialCompletion(stage_failure_message("synthesize", result.documents_processed,
                                                      docs.size(), result.failures) +
                                "; completed units are in " + out.string());
    }
}

// ---- recompose --------------------------------------------------------------

struct RecomposeArgs {
    fs::path units;
    std::string schema = "abstract";
    std::string mode = "cross_all";
    double fraction = 1.0;
    std::string separator = " ";
    std::optional<std::size_t> per_doc_cap;
    fs::path out = "triplets.jsonl";
    std::optional<fs::path> pseudo_out;
};

void run_recompose(const CLI::App& sub, const Globals& g, const RecomposeArgs& a) {
    const auto schema = resolve_schema(a.schema);
    const auto units = read_jsonl<FacetUnit>(a.units);
    RecomposeOptions opts;
    opts.pairing.mode = parse_triplet_mode(a.mode);
    opts.pairing.seed = stage_seed(g.seed, "recompose");
    opts.pairing.subsample_fraction = a.fraction;
    opts.separator = a.separator;
    opts.per_doc_cap = a.per_doc_cap;
    auto result = recompose_corpus(units, schema, opts);

    const auto out = output_path(g, a.out);
    const auto pseudo = a.pseudo_out ? output_path(g, *a.pseudo_out)
                                     : sibling(out, "pseudo_documents.jsonl");
    write_jsonl(out, result.triplets);
    write_jsonl(pseudo, result.pseudo_documents);

    auto m = start_manifest(sub, g);
    m.counts.documents = result.documents_used;
    m.counts.units = units.size();
    m.counts.triplets_per_facet = result.triplets_per_facet;
    m.files[out.filename().string()] = result.triplets.size();
    m.files[pseudo.filename().string()] = result.pseudo_documents.size();
    m.stats = {{"warnings", result.warnings}};
    m.stages.emplace_back("recompose", "completed");
    finish_manifest(m, out);
}

// ---- mine -------------------------------------------------------------------

struct MineArgs {
    fs::path units;
    fs::path docs;
    std::string schema = "abstract";
    std::optional<fs::path> template_dir;
    double easy = 0.25;
    double ceiling = 0.5;
    double band_low = 0.25;
    double band_high = 0.5;
    int rounds = 1;
    std::string over_ceiling = "keep_warn";
    std::string pairing = "cross_all";
    std::string separator = " ";
    fs::path out = "triplets_hn.jsonl";
    fs::path report = "report.json";
};

void run_mine(const CLI::App& sub, const Globals& g, const MineArgs& a) {
    const auto schema = resolve_schema(a.schema);
    const auto docs = load_documents(a.docs, schema);
    const auto units = read_jsonl<FacetUnit>(a.units);
    const auto prompts = load_prompts(a.template_dir);
    auto backends = make_backends(g);
    auto& gen = require(backends.generator, "FABLE_GEN_URL");
    auto& scorer = require(backends.scorer, "FABLE_SCORE_URL");

    MiningConfig config;
    config.easy_threshold = a.easy;
    config.hard_ceiling = a.ceiling;
    config.target_band = {a.band_low, a.band_high};
    config.max_rounds = a.rounds;
    config.over_ceiling_policy = parse_over_ceiling_policy(a.over_ceiling);
    MiningOptions opts;
    opts.seed = stage_seed(g.seed, "mine");
    opts.concurrency = g.concurrency;
    opts.synthesis.seed = stage_seed(g.seed, "mine/regenerate");
    opts.synthesis.concurrency = g.concurrency;
    opts.pairing = parse_triplet_mode(a.pairing);
    opts.separator = a.separator;
    auto result = mine_hard_negatives(docs, units, schema, prompts, gen, scorer, config, opts);

    const auto out = output_path(g, a.out);
    const auto pseudo = sibling(out, "pseudo_documents.jsonl");
    const auto scored = sibling(out, "units.jsonl");
    const auto report = output_path(g, a.report);
    write_jsonl(out, result.triplets);
    write_jsonl(pseudo, result.pseudo_documents);
    write_jsonl(scored, result.units);
    write_json_file(report, to_json_value(result.report));

    auto m = start_manifest(sub, g);
    m.prompt_hashes = prompts.hashes();
    m.backend_ids = {{"generator", gen.id()}, {"scorer", scorer.id()}};
    m.counts.documents = docs.size();
    m.counts.units = result.units.size();
    m.counts.triplets_per_facet = count_per_facet(result.triplets);
    m.files[out.filename().string()] = result.triplets.size();
    m.files[pseudo.filename().string()] = result.pseudo_documents.size();
    m.files[scored.filename().string()] = result.units.size();
    m.files[report.filename().string()] = 1;
    m.stats = {{"accepted", result.report.accepted},
               {"regenerations", result.report.regenerations},
               {"failures", result.failures.size()}};
    m.stages.emplace_back("mine", "completed");
    finish_manifest(m, out);
    for (const auto& f : result.failures) {
        spdlog::warn("mine: regeneration failed for {}: {}", f.doc_id, f.message);
    }
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
    fs::path pools;
    std::optional<std::string> csfcube_facet;
    std::optional<fs::path> embeddings;
    std::optional<fs::path> docs;
    std::string schema = "abstract";
    std::optional<fs::path> write_embeddings_to;
    std::string percents = "0.1,0.2";
    std::string gain = "linear";
    int map_threshold = 1;
    std::string similarity = "cosine";
    fs::path out = "report.json";
};

void run_evaluate(const CLI::App& sub, const Globals& g, const EvaluateArgs& a) {
    const auto pools =
        a.csfcube_facet ? load_csfcube_pools(a.pools, *a.csfcube_facet) : load_pools(a.pools);
    if (a.embeddings.has_value() == a.docs.has_value()) {
        throw ValidationError("evaluate needs exactly one of --embeddings or --docs");
    }
    auto m = start_manifest(sub, g);
    EmbeddingTable table;
    if (a.embeddings) {
        table = load_embeddings(*a.embeddings);
    } else {
        const auto docs = load_documents(*a.docs, resolve_schema(a.schema));
        auto backends = make_backends(g);
        auto& embedder = require(backends.embedder, "FABLE_EMBED_URL");
        m.backend_ids["embedder"] = embedder.id();
        table = embed_documents(docs, embedder, g.concurrency);
        if (a.write_embeddings_to) {
            std::vector<std::string> ids;
            for (const auto& d : docs) {
                ids.push_back(d.id);
            }
            const auto path = output_path(g, *a.write_embeddings_to);
            write_embeddings(path, ids, table);
            m.files[path.filename().string()] = ids.size();
        }
    }
    EvalConfig config;
    config.ndcg_percents = parse_percents(a.percents);
    config.gain = parse_gain(a.gain);
    config.map_threshold = a.map_threshold;
    config.similarity = parse_similarity(a.similarity);
    auto report = evaluate_run(pools, table, config);
    const auto out = output_path(g, a.out);
    report.manifest = manifest_path_for(out).filename().string();
    write_json_file(out, to_json_value(report));

    m.counts.documents = table.size();
    m.files[out.filename().string()] = report.per_query.size();
    m.stages.emplace_back("evaluate", "completed");
    finish_manifest(m, out);

    const auto names = config.metric_names();
    std::string line = "aggregated";
    for (std::size_t i = 0; i < config.ndcg_percents.size(); ++i) {
        line += fmt::format(" {}={:.4f}", names[i], report.aggregated.ndcg[i]);
    }
    line += fmt::format(" map={:.4f} queries={}", report.aggregated.map, report.aggregated.queries);
    std::cout << line << '\n';
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
    fs::path a;
    fs::path b;
    std::optional<fs::path> out;
};

void run_compare(const CLI::App& sub, const Globals& g, const CompareArgs& args) {
    const auto ra = eval_report_from_json(read_json_file(args.a));
    const auto rb = eval_report_from_json(read_json_file(args.b));
    const auto value = to_json_value(compare_runs(ra, rb));
    if (!args.out) {
        std::cout << value.dump(2) << '\n';
        return;
    }
    const auto out = output_path(g, *args.out);
    write_json_file(out, value);
    auto m = start_manifest(sub, g);
    m.files[out.filename().string()] = value.at("per_query").size();
    m.stages.emplace_back("compare", "completed");
    finish_manifest(m, out);
}

// ---- benchbuild -------------------------------------------------------------

struct BenchbuildArgs {
    fs::path items;
    std::string shape = "documents";
    std::string schema = "education";
    std::string facet;
    std::size_t queries = 8;
    std::size_t candidates = 80;
    std::optional<std::string> balance;
    std::vector<fs::path> annotations;
    fs::path out = "pools.jsonl";
};

void run_benchbuild(const CLI::App& sub, const Globals& g, const BenchbuildArgs& a) {
    const auto schema = resolve_schema(a.schema);
    if (!schema.contains(a.facet)) {
        throw ValidationError("facet '" + a.facet + "' is not in schema " + schema.domain_name);
    }
    const auto docs = ingest_records(a.items, parse_record_shape(a.shape), schema);
    const auto items = facet_items(docs, a.facet);
    auto backends = make_backends(g);
    auto& scorer = require(backends.scorer, "FABLE_SCORE_URL");

    const auto dispersion = score_dispersion(score_matrix(items, scorer, g.concurrency));
    std::optional<std::map<std::string, std::size_t>> balance;
    if (a.balance) {
        balance = parse_balance(*a.balance);
    }
    const auto queries = select_queries(items, dispersion, a.queries, balance);
    const auto candidates = select_candidates(items, dispersion, queries, a.candidates);
    if (candidates.saturated) {
        spdlog::warn("benchbuild: {} candidates requested, {} available; using all remaining",
                     a.candidates, candidates.ids.size());
    }
    auto pools = build_pools(a.facet, items, dispersion, queries, candidates);

    auto m = start_manifest(sub, g);
    m.backend_ids["scorer"] = scorer.id();
    m.counts.documents = items.size();
    m.stats = {{"items", items.size()},
               {"queries", queries.size()},
               {"candidates", candidates.ids.size()},
               {"candidates_saturated", candidates.saturated}};
    if (!a.annotations.empty()) {
        std::vector<AnnotationSet> sets;
        for (const auto& p : a.annotations) {
            sets.push_back(load_annotations(p));
        }
        apply_annotations(pools, sets);
        nlohmann::json pairs = nlohmann::json::array();
        for (std::size_t i = 0; i < sets.size(); ++i) {
            for (std::size_t j = i + 1; j < sets.size(); ++j) {
                auto value = to_json_value(pooled_agreement(pools, sets[i], sets[j]));
                value["annotators"] = {i, j};
                pairs.push_back(value);
            }
        }
        m.stats["agreement"] = pairs;
        if (!pairs.empty()) {
            std::cout << pairs.dump(2) << '\n';
        }
    }
    for (const auto& p : pools) {
        p.validate();
    }
    const auto out = output_path(g, a.out);
    write_jsonl(out, pools);
    m.files[out.filename().string()] = pools.size();
    m.stages.emplace_back("benchbuild", "completed");
    finish_manifest(m, out);
}

// ---- pipeline ---------------------------------------------------------------

struct PipelineArgs {
    PipelineConfig config;
    std::optional<double> split;
    std::optional<std::size_t> per_doc_cap;
    std::optional<fs::path> template_dir;
    std::string mode = "cross_all";
    std::string over_ceiling = "keep_warn";
};

void run_pipeline_command(const Globals& g, PipelineArgs& a) {
    auto& c = a.config;
    c.seed = g.seed;
    c.concurrency = g.concurrency;
    c.backend = g.backend;
    c.split_ratio = a.split;
    c.template_dir = a.template_dir;
    c.recompose.per_doc_cap = a.per_doc_cap;
    c.recompose.pairing.mode = parse_triplet_mode(a.mode);
    c.mining.over_ceiling_policy = parse_over_ceiling_policy(a.over_ceiling);
    auto backends = make_backends(g);
    if (g.backend == "http") {
        require(backends.generator, "FABLE_GEN_URL");
        require(backends.scorer, "FABLE_SCORE_URL");
    }
    auto artifacts = run_pipeline(c, backends, g.out_dir);
    std::cout << "manifest: " << artifacts.manifest_path.string() << '\n';
}

int report_error(const char* kind, const std::exception& e, int code) {
    spdlog::error("{}: {}", kind, e.what());
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("fable");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Facet-conditioned triplet synthesis, evaluation, and benchmark construction"};
    app.set_version_flag("--version", tool_version());
    app.set_config("--config", "", "TOML/INI file; CLI flags override it");
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Run seed; every stage derives its own stream");
    app.add_option("--backend", g.backend, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    app.add_option("--concurrency", g.concurrency, "Maximum in-flight backend calls")
        ->check(CLI::PositiveNumber);
    app.add_option("--out-dir", g.out_dir, "Directory for relative output paths");
    app.add_option("--score-normalization", g.normalization, "identity or logistic (http scorer)")
        ->check(CLI::IsMember({"identity", "logistic"}));
    app.add_option("--max-retries", g.max_retries, "Retries per http request")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--timeout-ms", g.timeout_ms, "Per-request http timeout")
        ->check(CLI::PositiveNumber);
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Convert a raw corpus into documents JSONL");
    ingest_cmd->add_option("--in", ingest.in, "Input file")->required()->check(CLI::ExistingFile);
    ingest_cmd->add_option("--shape", ingest.shape, "documents, s2orc, csfcube, toefl");
    ingest_cmd->add_option("--schema", ingest.schema, "Schema name or JSON file");
    ingest_cmd->add_option("--out", ingest.out, "Documents JSONL");

    DecomposeArgs dec;
    auto* dec_cmd = app.add_subcommand("decompose", "Summarize or adopt one unit per facet");
    dec_cmd->add_option("--in", dec.in, "Documents JSONL")->required()->check(CLI::ExistingFile);
    dec_cmd->add_option("--schema", dec.schema, "Schema name or JSON file");
    dec_cmd->add_option("--out", dec.out, "Units JSONL");
    dec_cmd->add_option("--template-dir", dec.template_dir, "Prompt templates directory");
    dec_cmd->add_option("--temperature", dec.temperature);
    dec_cmd->add_option("--max-tokens", dec.max_tokens);
    dec_cmd->add_option("--summary-word-cap", dec.word_cap);
    dec_cmd->add_flag("--resume", dec.resume, "Reuse complete decompositions in --out");

    SynthesizeArgs syn;
    auto* syn_cmd = app.add_subcommand("synthesize", "Generate similar and dissimilar units");
    syn_cmd->add_option("--units", syn.units, "Decomposition units")->required()->check(CLI::ExistingFile);
    syn_cmd->add_option("--docs", syn.docs, "Documents JSONL")->required()->check(CLI::ExistingFile);
    syn_cmd->add_option("--schema", syn.schema, "Schema name or JSON file");
    syn_cmd->add_option("--out", syn.out, "Units JSONL");
    syn_cmd->add_option("--template-dir", syn.template_dir, "Prompt templates directory");
    syn_cmd->add_option("--temperature", syn.temperature);
    syn_cmd->add_option("--max-tokens", syn.max_tokens);
    syn_cmd->add_option("--variants", syn.variants, "Similar/dissimilar units per facet")
        ->check(CLI::PositiveNumber);

    RecomposeArgs rec;
    auto* rec_cmd = app.add_subcommand("recompose", "Build pseudo-documents and triplets");
    rec_cmd->add_option("--units", rec.units, "Synthesized units")->required()->check(CLI::ExistingFile);
    rec_cmd->add_option("--schema", rec.schema, "Schema name or JSON file");
    rec_cmd->add_option("--mode", rec.mode, "cross_all, sample_one, random_negative")
        ->check(CLI::IsMember({"cross_all", "sample_one", "random_negative"}));
    rec_cmd->add_option("--fraction", rec.fraction, "Fraction of documents used");
    rec_cmd->add_option("--separator", rec.separator, "Text between concatenated units");
    rec_cmd->add_option("--per-doc-cap", rec.per_doc_cap, "Maximum triplets per document");
    rec_cmd->add_option("--out", rec.out, "Triplets JSONL");
    rec_cmd->add_option("--pseudo-out", rec.pseudo_out, "Pseudo-documents JSONL");

    MineArgs mine;
    auto* mine_cmd = app.add_subcommand("mine", "Score, regenerate, and recompose hard negatives");
    mine_cmd->add_option("--units", mine.units, "Synthesized units")->required()->check(CLI::ExistingFile);
    mine_cmd->add_option("--docs", mine.docs, "Documents JSONL")->required()->check(CLI::ExistingFile);
    mine_cmd->add_option("--schema", mine.schema, "Schema name or JSON file");
    mine_cmd->add_option("--template-dir", mine.template_dir, "Prompt templates directory");
    mine_cmd->add_option("--easy", mine.easy, "Easy threshold (strictly below)");
    mine_cmd->add_option("--ceiling", mine.ceiling, "Hard ceiling (strictly below)");
    mine_cmd->add_option("--band-low", mine.band_low, "Target band lower edge in the prompt");
    mine_cmd->add_option("--band-high", mine.band_high, "Target band upper edge in the prompt");
    mine_cmd->add_option("--rounds", mine.rounds, "Maximum regeneration rounds");
    mine_cmd->add_option("--over-ceiling", mine.over_ceiling, "keep_warn or drop")
        ->check(CLI::IsMember({"keep_warn", "drop"}));
    mine_cmd->add_option("--pairing", mine.pairing, "cross_all or sample_one")
        ->check(CLI::IsMember({"cross_all", "sample_one"}));
    mine_cmd->add_option("--separator", mine.separator);
    mine_cmd->add_option("--out", mine.out, "Supplemental triplets JSONL");
    mine_cmd->add_option("--report", mine.report, "Score-shift report JSON");

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "NDCG at pool percentages and MAP");
    ev_cmd->add_option("--pools", ev.pools, "Relevance pools")->required()->check(CLI::ExistingFile);
    ev_cmd->add_option("--csfcube-facet", ev.csfcube_facet,
                       "Read --pools as a CSFCube annotation map for this facet");
    ev_cmd->add_option("--embeddings", ev.embeddings, "{id, vector} JSONL")->check(CLI::ExistingFile);
    ev_cmd->add_option("--docs", ev.docs, "Embed documents with the backend embedder")
        ->check(CLI::ExistingFile);
    ev_cmd->add_option("--schema", ev.schema, "Schema for --docs");
    ev_cmd->add_option("--write-embeddings", ev.write_embeddings_to, "Save --docs embeddings");
    ev_cmd->add_option("--percents", ev.percents, "Comma-separated pool fractions");
    ev_cmd->add_option("--gain", ev.gain, "linear or exponential")
        ->check(CLI::IsMember({"linear", "exponential"}));
    ev_cmd->add_option("--map-threshold", ev.map_threshold, "Relevant iff relevance >= this");
    ev_cmd->add_option("--similarity", ev.similarity, "cosine or euclidean")
        ->check(CLI::IsMember({"cosine", "euclidean"}));
    ev_cmd->add_option("--out", ev.out, "Report JSON");

    CompareArgs cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "Per-query deltas between two reports");
    cmp_cmd->add_option("--a", cmp.a, "Baseline report")->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--b", cmp.b, "Candidate report")->required()->check(CLI::ExistingFile);
    cmp_cmd->add_option("--out", cmp.out, "Write JSON here instead of stdout");

    BenchbuildArgs bb;
    auto* bb_cmd = app.add_subcommand("benchbuild", "Select queries and candidate pools");
    bb_cmd->add_option("--items", bb.items, "Items file")->required()->check(CLI::ExistingFile);
    bb_cmd->add_option("--shape", bb.shape, "documents or toefl");
    bb_cmd->add_option("--schema", bb.schema, "Schema name or JSON file");
    bb_cmd->add_option("--facet", bb.facet, "Facet to build pools for")->required();
    bb_cmd->add_option("--queries", bb.queries, "Number of queries")->check(CLI::PositiveNumber);
    bb_cmd->add_option("--candidates", bb.candidates, "Candidates per pool");
    bb_cmd->add_option("--balance", bb.balance, "Per-type query counts, e.g. conversation:4,lecture:4");
    bb_cmd->add_option("--annotations", bb.annotations, "One label file per annotator")
        ->check(CLI::ExistingFile);
    bb_cmd->add_option("--out", bb.out, "Pools JSONL");

    PipelineArgs pl;
    auto* pl_cmd = app.add_subcommand("pipeline", "decompose, synthesize, [mine], recompose");
    pl_cmd->add_option("--docs", pl.config.docs, "Input corpus")->required()->check(CLI::ExistingFile);
    pl_cmd->add_option("--input-shape", pl.config.input_shape, "documents, s2orc, csfcube, toefl");
    pl_cmd->add_option("--schema", pl.config.schema, "Schema name or JSON file");
    pl_cmd->add_option("--template-dir", pl.template_dir, "Prompt templates directory");
    pl_cmd->add_option("--summary-temperature", pl.config.decompose.temperature);
    pl_cmd->add_option("--temperature", pl.config.synthesize.temperature);
    pl_cmd->add_option("--variants", pl.config.synthesize.variants)->check(CLI::PositiveNumber);
    pl_cmd->add_option("--mode", pl.mode, "cross_all, sample_one, random_negative")
        ->check(CLI::IsMember({"cross_all", "sample_one", "random_negative"}));
    pl_cmd->add_option("--fraction", pl.config.recompose.pairing.subsample_fraction);
    pl_cmd->add_option("--separator", pl.config.recompose.separator);
    pl_cmd->add_option("--per-doc-cap", pl.per_doc_cap);
    pl_cmd->add_flag("--mine", pl.config.mine, "Run hard-negative mining");
    pl_cmd->add_option("--easy", pl.config.mining.easy_threshold);
    pl_cmd->add_option("--ceiling", pl.config.mining.hard_ceiling);
    pl_cmd->add_option("--band-low", pl.config.mining.target_band.low);
    pl_cmd->add_option("--band-high", pl.config.mining.target_band.high);
    pl_cmd->add_option("--rounds", pl.config.mining.max_rounds);
    pl_cmd->add_option("--over-ceiling", pl.over_ceiling)
        ->check(CLI::IsMember({"keep_warn", "drop"}));
    pl_cmd->add_option("--split", pl.split, "Train fraction for a document-level split");
    pl_cmd->add_flag("--resume", pl.config.resume, "Reuse complete decompositions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        spdlog::set_level(spdlog::level::from_str(g.log_level));
        fs::create_directories(g.out_dir);
        if (*ingest_cmd) run_ingest(*ingest_cmd, g, ingest);
        if (*dec_cmd) run_decompose(*dec_cmd, g, dec);
        if (*syn_cmd) run_synthesize(*syn_cmd, g, syn);
        if (*rec_cmd) run_recompose(*rec_cmd, g, rec);
        if (*mine_cmd) run_mine(*mine_cmd, g, mine);
        if (*ev_cmd) run_evaluate(*ev_cmd, g, ev);
        if (*cmp_cmd) run_compare(*cmp_cmd, g, cmp);
        if (*bb_cmd) run_benchbuild(*bb_cmd, g, bb);
        if (*pl_cmd) run_pipeline_command(g, pl);
    } catch (const PartialCompletion& e) {
        return report_error("partial completion", e, kExitPartial);
    } catch (const BackendError& e) {
        return report_error("backend failure", e, kExitBackend);
    } catch (const ValidationError& e) {
        return report_error("validation error", e, kExitValidation);
    } catch (const std::exception& e) {
        return report_error("error", e, kExitValidation);
    }
    return kExitOk;
}
