#include "fable/decompose.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include <spdlog/spdlog.h>

#include "fable/error.hpp"
#include "fable/parallel.hpp"

namespace fable {

namespace {

std::size_t word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) {
            ++count;
        }
        in_word = !space;
    }
    return count;
}

void check_facet(const FacetSchema& schema, std::string_view facet) {
    if (!schema.contains(facet)) {
        throw ValidationError("facet '" + std::string(facet) + "' is not in schema '" +
                              schema.domain_name + "'");
    }
}

}  // namespace

std::string unit_id_for(std::string_view doc_id, std::string_view facet, UnitKind kind,
                        std::size_t variant) {
    std::string id = std::string(doc_id) + ":" + std::string(facet) + ":" +
                     std::string(to_string(kind));
    if (variant > 0) {
        id += ":v" + std::to_string(variant);
    }
    return id;
}

std::string generate_with_retries(Generator& generator, const ChatRequest& request,
                                  int max_retries) {
    for (int attempt = 0;; ++attempt) {
        try {
            return generator.generate(request);
        } catch (const EmptyCompletionError&) {
            if (attempt >= max_retries) {
                throw BackendError("empty generation after " + std::to_string(max_retries) +
                                   " retries");
            }
        }
    }
}

ChatRequest summary_request(const Document& doc, std::string_view facet,
                            const PromptTemplate& summarize, double temperature, int max_tokens,
                            std::uint64_t seed) {
    if (summarize.stage() != PromptStage::summarize) {
        throw ValidationError("summary_request needs a summarize-stage template");
    }
    PromptValues values;
    values.document = doc.text;
    values.facet = std::string(facet);
    ChatRequest request;
    request.messages = {{Role::user, summarize.render(values)}};
    request.temperature = temperature;
    request.max_tokens = max_tokens;
    request.seed = seed;
    return request;
}

FacetUnit summarize_facet(const Document& doc, const FacetSchema& schema, std::string_view facet,
                          const PromptTemplate& summarize, Generator& generator,
                          const DecomposeOptions& options) {
    check_facet(schema, facet);
    const ChatRequest request = summary_request(doc, facet, summarize, options.temperature,
                                                options.max_tokens, options.seed);
    FacetUnit unit;
    unit.unit_id = unit_id_for(doc.id, facet, UnitKind::summary);
    unit.doc_id = doc.id;
    unit.facet = std::string(facet);
    unit.kind = UnitKind::summary;
    unit.text = generate_with_retries(generator, request, options.max_retries);
    unit.provenance.backend_id = generator.id();
    unit.provenance.prompt_hash = summarize.hash();
    if (options.summary_word_cap > 0 && word_count(unit.text) > options.summary_word_cap) {
        unit.flags.push_back("long_summary");
    }
    return unit;
}

std::vector<FacetUnit> adopt_labeled_facets(const Document& doc, const FacetSchema& schema) {
    if (!doc.has_labels()) {
        throw ValidationError("document '" + doc.id +
                              "' has no facet labels; summarize its facets instead");
    }
    for (const auto& [facet, text] : doc.facet_labels) {
        check_facet(schema, facet);
    }
    std::vector<FacetUnit> units;
    for (const auto& facet : schema.facets) {
        auto it = doc.facet_labels.find(facet);
        if (it == doc.facet_labels.end()) {
            continue;
        }
        if (it->second.empty()) {
            throw ValidationError("document '" + doc.id + "' has an empty label for '" + facet +
                                  "'");
        }
        FacetUnit unit;
        unit.unit_id = unit_id_for(doc.id, facet, UnitKind::original);
        unit.doc_id = doc.id;
        unit.facet = facet;
        unit.kind = UnitKind::original;
        unit.text = it->second;
        unit.provenance.backend_id = "label";
        units.push_back(std::move(unit));
    }
    return units;
}

std::vector<FacetUnit> decompose_document(const Document& doc, const FacetSchema& schema,
                                          const PromptSet& prompts, Generator& generator,
                                          const DecomposeOptions& options) {
    std::vector<FacetUnit> adopted;
    if (doc.has_labels()) {
        adopted = adopt_labeled_facets(doc, schema);
    }
    std::vector<FacetUnit> units;
    units.reserve(schema.size());
    std::size_t next_adopted = 0;
    for (const auto& facet : schema.facets) {
        if (next_adopted < adopted.size() && adopted[next_adopted].facet == facet) {
            units.push_back(std::move(adopted[next_adopted++]));
        } else {
            units.push_back(
                summarize_facet(doc, schema, facet, prompts.summarize, generator, options));
        }
    }
    return units;
}

DecomposeResult decompose_corpus(std::span<const Document> docs, const FacetSchema& schema,
                                 const PromptSet& prompts, Generator& generator,
                                 const DecomposeOptions& options,
                                 std::span<const FacetUnit> existing) {
    std::map<std::string, std::vector<FacetUnit>> reusable;
    for (const auto& u : existing) {
        if (u.is_decomposition()) {
            reusable[u.doc_id].push_back(u);
        }
    }

    // One task per (document, facet); labelled facets resolve without a backend call.
    struct Task {
        std::size_t doc;
        std::size_t facet;
    };
    std::vector<Task> tasks;
    std::vector<bool> reused(docs.size(), false);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (const auto& [facet, text] : docs[d].facet_labels) {
            check_facet(schema, facet);
        }
        if (auto it = reusable.find(docs[d].id);
            it != reusable.end() && it->second.size() == schema.size()) {
            reused[d] = true;
            continue;
        }
        for (std::size_t f = 0; f < schema.size(); ++f) {
            tasks.push_back({d, f});
        }
    }

    auto outcomes = parallel_try_map(tasks.size(), options.concurrency, [&](std::size_t i) {
        const Document& doc = docs[tasks[i].doc];
        const std::string& facet = schema.facets[tasks[i].facet];
        if (auto it = doc.facet_labels.find(facet); it != doc.facet_labels.end()) {
            FacetUnit unit;
            unit.unit_id = unit_id_for(doc.id, facet, UnitKind::original);
            unit.doc_id = doc.id;
            unit.facet = facet;
            unit.kind = UnitKind::original;
            unit.text = it->second;
            unit.provenance.backend_id = "label";
            return unit;
        }
        return summarize_facet(doc, schema, facet, prompts.summarize, generator, options);
    });

    DecomposeResult result;
    std::size_t next = 0;
    for (std::size_t d = 0; d < docs.size(); ++d) {
        const Document& doc = docs[d];
        if (reused[d]) {
            auto units = reusable[doc.id];
            std::sort(units.begin(), units.end(), [&](const FacetUnit& a, const FacetUnit& b) {
                return schema.index_of(a.facet) < schema.index_of(b.facet);
            });
            for (auto& u : units) {
                result.units.push_back(std::move(u));
            }
            ++result.reused_documents;
            ++result.documents_processed;
            continue;
        }
        std::vector<FacetUnit> units;
        std::optional<StageFailure> failure;
        for (std::size_t f = 0; f < schema.size(); ++f, ++next) {
            auto& outcome = outcomes[next];
            if (outcome.error) {
                if (!failure) {
                    failure = StageFailure{doc.id, describe_exception(outcome.error),
                                           is_backend_error(outcome.error)};
                }
                continue;
            }
            units.push_back(std::move(*outcome.value));
        }
        if (failure) {
            spdlog::warn("decompose: document '{}' failed: {}", doc.id, failure->message);
            result.failures.push_back(std::move(*failure));
            continue;
        }
        bool all_labeled = true;
        for (auto& u : units) {
            if (u.kind == UnitKind::original) {
                ++result.adopted;
            } else {
                all_labeled = false;
                ++result.summaries;
                if (u.has_flag("long_summary")) {
                    ++result.long_summaries;
                }
            }
            result.units.push_back(std::move(u));
        }
        if (all_labeled) {
            ++result.fully_labeled_documents;
        }
        ++result.documents_processed;
    }
    return result;
}

}  // namespace fable
