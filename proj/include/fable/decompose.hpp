#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fable/backends.hpp"
#include "fable/prompts.hpp"
#include "fable/types.hpp"

namespace fable {

struct DecomposeOptions {
    std::uint64_t seed = 0;
    double temperature = 0.0;
    int max_tokens = 256;
    /// Re-issues of a request that came back empty.
    int max_retries = 3;
    /// Summaries longer than this many words are kept and flagged "long_summary".
    std::size_t summary_word_cap = 120;
    std::size_t concurrency = 1;
};

/// Stable unit id: "<doc>:<facet>:<kind>[:v<variant>]".
std::string unit_id_for(std::string_view doc_id, std::string_view facet, UnitKind kind,
                        std::size_t variant = 0);

/// Calls the generator, re-issuing the request when the completion is empty.
std::string generate_with_retries(Generator& generator, const ChatRequest& request,
                                  int max_retries);

/// Single-turn summarization request for one facet of a document.
ChatRequest summary_request(const Document& doc, std::string_view facet,
                            const PromptTemplate& summarize, double temperature, int max_tokens,
                            std::uint64_t seed);

/// Zero-shot summary of one facet. The result guides later generation; it is
/// not claimed to be a verbatim span of the document.
FacetUnit summarize_facet(const Document& doc, const FacetSchema& schema, std::string_view facet,
                          const PromptTemplate& summarize, Generator& generator,
                          const DecomposeOptions& options);

/// One original-kind unit per labelled facet, in schema order.
std::vector<FacetUnit> adopt_labeled_facets(const Document& doc, const FacetSchema& schema);

/// Exactly one decomposition unit per schema facet: labelled facets are
/// adopted, the rest summarized.
std::vector<FacetUnit> decompose_document(const Document& doc, const FacetSchema& schema,
                                          const PromptSet& prompts, Generator& generator,
                                          const DecomposeOptions& options);

struct StageFailure {
    std::string doc_id;
    std::string message;
    bool backend = false;
};

struct DecomposeResult {
    std::vector<FacetUnit> units;
    std::size_t documents_processed = 0;
    std::size_t fully_labeled_documents = 0;
    std::size_t summaries = 0;
    std::size_t adopted = 0;
    std::size_t long_summaries = 0;
    std::size_t reused_documents = 0;
    std::vector<StageFailure> failures;
};

/// Decomposes a corpus with bounded parallelism. Documents whose complete
/// decomposition already appears in `existing` are reused. Output order is
/// (document index, facet index); failed documents are reported, not thrown.
DecomposeResult decompose_corpus(std::span<const Document> docs, const FacetSchema& schema,
                                 const PromptSet& prompts, Generator& generator,
                                 const DecomposeOptions& options,
                                 std::span<const FacetUnit> existing = {});

}  // namespace fable
