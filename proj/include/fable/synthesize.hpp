#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fable/backends.hpp"
#include "fable/decompose.hpp"
#include "fable/prompts.hpp"
#include "fable/types.hpp"

namespace fable {

struct SynthesizeOptions {
    std::uint64_t seed = 0;
    double temperature = 0.7;
    int max_tokens = 512;
    int max_retries = 3;
    /// Similar and dissimilar units generated per (document, facet).
    std::size_t variants = 1;
    std::size_t concurrency = 1;
};

/// Score band a regenerated negative is steered toward.
struct ScoreBand {
    double low = 0.25;
    double high = 0.5;
    void validate() const;
};

/// The decomposition exchange replayed as conversation context:
/// [user: summarize prompt, assistant: summary or original label text].
std::vector<ChatMessage> decomposition_context(const Document& doc, const FacetUnit& decomposition,
                                               const PromptTemplate& summarize);

/// Request seed for a variant; variant 0 uses the run seed unchanged.
std::uint64_t variant_seed(std::uint64_t seed, std::size_t variant);

/// Self-fed request for a similar or dissimilar unit: the decomposition
/// exchange followed by the stage prompt.
ChatRequest synthesis_request(const Document& doc, const FacetUnit& decomposition,
                              const PromptSet& prompts, PromptStage stage,
                              const SynthesizeOptions& options, std::size_t variant = 0);

FacetUnit generate_similar(const Document& doc, const FacetUnit& decomposition,
                           const PromptSet& prompts, Generator& generator,
                           const SynthesizeOptions& options, std::size_t variant = 0);

FacetUnit generate_dissimilar(const Document& doc, const FacetUnit& decomposition,
                              const PromptSet& prompts, Generator& generator,
                              const SynthesizeOptions& options, std::size_t variant = 0);

/// Regeneration request: decomposition exchange, dissimilar prompt, the prior
/// negative as the assistant's answer, then the regeneration prompt carrying
/// the current score and target band.
ChatRequest regeneration_request(const Document& doc, const FacetUnit& decomposition,
                                 const FacetUnit& prior, double current_score, ScoreBand band,
                                 const PromptSet& prompts, const SynthesizeOptions& options);

/// Rewrites a negative toward `band`. The new unit's mining_round is the
/// prior's plus one; its id is "<root dissimilar id>:r<round>".
FacetUnit regenerate_negative(const Document& doc, const FacetUnit& decomposition,
                              const FacetUnit& prior, double current_score, ScoreBand band,
                              const PromptSet& prompts, Generator& generator,
                              const SynthesizeOptions& options);

struct SynthesizeResult {
    /// Decomposition units followed by generated units, grouped by document.
    std::vector<FacetUnit> units;
    std::size_t documents_processed = 0;
    std::size_t similar = 0;
    std::size_t dissimilar = 0;
    std::vector<StageFailure> failures;
};

/// Runs generation over every document. Refuses (ValidationError) when any
/// document lacks a decomposition unit for a schema facet.
SynthesizeResult synthesize_corpus(std::span<const Document> docs,
                                   std::span<const FacetUnit> decomposition_units,
                                   const FacetSchema& schema, const PromptSet& prompts,
                                   Generator& generator, const SynthesizeOptions& options);

}  // namespace fable
