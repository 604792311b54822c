#include "fable/synthesize.hpp"

#include <map>
#include <optional>

#include <spdlog/spdlog.h>

#include "fable/error.hpp"
#include "fable/parallel.hpp"
#include "fable/random.hpp"

namespace fable {

namespace {

FacetUnit make_generated(const Document& doc, const FacetUnit& decomposition, UnitKind kind,
                         std::size_t variant, std::string text, const Generator& generator,
                         const PromptTemplate& stage_template) {
    FacetUnit unit;
    unit.unit_id = unit_id_for(doc.id, decomposition.facet, kind, variant);
    unit.doc_id = doc.id;
    unit.facet = decomposition.facet;
    unit.kind = kind;
    unit.text = std::move(text);
    unit.provenance.backend_id = generator.id();
    unit.provenance.prompt_hash = stage_template.hash();
    unit.provenance.conditioned_on = decomposition.unit_id;
    return unit;
}

void check_decomposition(const Document& doc, const FacetUnit& decomposition) {
    if (!decomposition.is_decomposition()) {
        throw ValidationError("unit " + decomposition.unit_id +
                              " is not a summary or original unit");
    }
    if (decomposition.doc_id != doc.id) {
        throw ValidationError("unit " + decomposition.unit_id + " belongs to document '" +
                              decomposition.doc_id + "', not '" + doc.id + "'");
    }
}

std::string chain_root(const FacetUnit& unit) {
    if (unit.kind != UnitKind::regenerated) {
        return unit.unit_id;
    }
    const auto pos = unit.unit_id.rfind(":r");
    return pos == std::string::npos ? unit.unit_id : unit.unit_id.substr(0, pos);
}

}  // namespace

void ScoreBand::validate() const {
    if (!(low >= 0.0 && high <= 1.0 && low < high)) {
        throw ValidationError("score band needs 0 <= low < high <= 1");
    }
}

std::vector<ChatMessage> decomposition_context(const Document& doc, const FacetUnit& decomposition,
                                               const PromptTemplate& summarize) {
    PromptValues values;
    values.document = doc.text;
    values.facet = decomposition.facet;
    return {{Role::user, summarize.render(values)}, {Role::assistant, decomposition.text}};
}

std::uint64_t variant_seed(std::uint64_t seed, std::size_t variant) {
    return variant == 0 ? seed : derive_seed(seed, "variant/" + std::to_string(variant));
}

ChatRequest synthesis_request(const Document& doc, const FacetUnit& decomposition,
                              const PromptSet& prompts, PromptStage stage,
                              const SynthesizeOptions& options, std::size_t variant) {
    check_decomposition(doc, decomposition);
    if (stage != PromptStage::similar && stage != PromptStage::dissimilar) {
        throw ValidationError("synthesis_request handles the similar and dissimilar stages");
    }
    PromptValues values;
    values.document = doc.text;
    values.facet = decomposition.facet;
    values.summary = decomposition.text;
    ChatRequest request;
    request.messages = decomposition_context(doc, decomposition, prompts.summarize);
    request.messages.push_back({Role::user, prompts.get(stage).render(values)});
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.seed = variant_seed(options.seed, variant);
    return request;
}

FacetUnit generate_similar(const Document& doc, const FacetUnit& decomposition,
                           const PromptSet& prompts, Generator& generator,
                           const SynthesizeOptions& options, std::size_t variant) {
    auto request =
        synthesis_request(doc, decomposition, prompts, PromptStage::similar, options, variant);
    return make_generated(doc, decomposition, UnitKind::similar, variant,
                          generate_with_retries(generator, request, options.max_retries),
                          generator, prompts.similar);
}

FacetUnit generate_dissimilar(const Document& doc, const FacetUnit& decomposition,
                              const PromptSet& prompts, Generator& generator,
                              const SynthesizeOptions& options, std::size_t variant) {
    auto request =
        synthesis_request(doc, decomposition, prompts, PromptStage::dissimilar, options, variant);
    return make_generated(doc, decomposition, UnitKind::dissimilar, variant,
                          generate_with_retries(generator, request, options.max_retries),
                          generator, prompts.dissimilar);
}

ChatRequest regeneration_request(const Document& doc, const FacetUnit& decomposition,
                                 const FacetUnit& prior, double current_score, ScoreBand band,
                                 const PromptSet& prompts, const SynthesizeOptions& options) {
    check_decomposition(doc, decomposition);
    band.validate();
    if (!prior.is_negative()) {
        throw ValidationError("unit " + prior.unit_id + " is not a dissimilar or regenerated unit");
    }
    if (prior.facet != decomposition.facet || prior.doc_id != decomposition.doc_id) {
        throw ValidationError("unit " + prior.unit_id + " does not match decomposition unit " +
                              decomposition.unit_id);
    }
    if (prior.score && *prior.score != current_score) {
        throw ValidationError("current score differs from the stored score of " + prior.unit_id);
    }
    PromptValues values;
    values.document = doc.text;
    values.facet = decomposition.facet;
    values.summary = decomposition.text;
    values.score = format_score(current_score);
    values.low = format_score(band.low);
    values.high = format_score(band.high);

    ChatRequest request;
    request.messages = decomposition_context(doc, decomposition, prompts.summarize);
    request.messages.push_back({Role::user, prompts.dissimilar.render(values)});
    request.messages.push_back({Role::assistant, prior.text});
    request.messages.push_back({Role::user, prompts.regenerate.render(values)});
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;
    request.seed = derive_seed(options.seed, "regenerate/" + prior.unit_id);
    return request;
}

FacetUnit regenerate_negative(const Document& doc, const FacetUnit& decomposition,
                              const FacetUnit& prior, double current_score, ScoreBand band,
                              const PromptSet& prompts, Generator& generator,
                              const SynthesizeOptions& options) {
    auto request =
        regeneration_request(doc, decomposition, prior, current_score, band, prompts, options);
    FacetUnit unit;
    unit.provenance.mining_round = prior.provenance.mining_round + 1;
    unit.unit_id = chain_root(prior) + ":r" + std::to_string(unit.provenance.mining_round);
    unit.doc_id = doc.id;
    unit.facet = prior.facet;
    unit.kind = UnitKind::regenerated;
    unit.text = generate_with_retries(generator, request, options.max_retries);
    unit.provenance.backend_id = generator.id();
    unit.provenance.prompt_hash = prompts.regenerate.hash();
    unit.provenance.conditioned_on = decomposition.unit_id;
    unit.provenance.parent_unit = prior.unit_id;
    return unit;
}

SynthesizeResult synthesize_corpus(std::span<const Document> docs,
                                   std::span<const FacetUnit> decomposition_units,
                                   const FacetSchema& schema, const PromptSet& prompts,
                                   Generator& generator, const SynthesizeOptions& options) {
    if (options.variants < 1) {
        throw ValidationError("variants must be >= 1");
    }
    std::map<std::string, std::size_t> doc_index;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        doc_index[docs[d].id] = d;
    }
    // decomposition[d][f] -> unit
    std::vector<std::vector<std::optional<FacetUnit>>> decomposition(
        docs.size(), std::vector<std::optional<FacetUnit>>(schema.size()));
    for (const auto& u : decomposition_units) {
        if (!u.is_decomposition()) {
            continue;
        }
        auto d = doc_index.find(u.doc_id);
        if (d == doc_index.end()) {
            throw ValidationError("unit " + u.unit_id + " references unknown document '" +
                                  u.doc_id + "'");
        }
        auto f = schema.index_of(u.facet);
        if (!f) {
            throw ValidationError("unit " + u.unit_id + " has facet outside the schema");
        }
        if (decomposition[d->second][*f]) {
            throw ValidationError("document '" + u.doc_id + "' has two decomposition units for '" +
                                  u.facet + "'");
        }
        decomposition[d->second][*f] = u;
    }
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (std::size_t f = 0; f < schema.size(); ++f) {
            if (!decomposition[d][f]) {
                throw ValidationError("document '" + docs[d].id + "' has no decomposition unit for '" +
                                      schema.facets[f] +
                                      "'; generation without decomposition context is refused "
                                      "(run decompose first)");
            }
        }
    }

    // Task layout per document: facet-major, then similar variants, then dissimilar variants.
    const std::size_t per_facet = 2 * options.variants;
    const std::size_t per_doc = schema.size() * per_facet;
    auto outcomes = parallel_try_map(docs.size() * per_doc, options.concurrency, [&](std::size_t i) {
        const std::size_t d = i / per_doc;
        const std::size_t f = (i % per_doc) / per_facet;
        const std::size_t slot = i % per_facet;
        const bool similar = slot < options.variants;
        const std::size_t variant = similar ? slot : slot - options.variants;
        const auto& decomp = *decomposition[d][f];
        return similar ? generate_similar(docs[d], decomp, prompts, generator, options, variant)
                       : generate_dissimilar(docs[d], decomp, prompts, generator, options, variant);
    });

    SynthesizeResult result;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::optional<StageFailure> failure;
        for (std::size_t k = 0; k < per_doc; ++k) {
            const auto& o = outcomes[d * per_doc + k];
            if (o.error && !failure) {
                failure = StageFailure{docs[d].id, describe_exception(o.error),
                                       is_backend_error(o.error)};
            }
        }
        if (failure) {
            spdlog::warn("synthesize: document '{}' failed: {}", docs[d].id, failure->message);
            result.failures.push_back(std::move(*failure));
            continue;
        }
        for (std::size_t f = 0; f < schema.size(); ++f) {
            result.units.push_back(*decomposition[d][f]);
        }
        for (std::size_t k = 0; k < per_doc; ++k) {
            auto& unit = *outcomes[d * per_doc + k].value;
            (unit.kind == UnitKind::similar ? result.similar : result.dissimilar)++;
            result.units.push_back(std::move(unit));
        }
        ++result.documents_processed;
    }
    return result;
}

}  // namespace fable
