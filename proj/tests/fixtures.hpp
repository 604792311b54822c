// Shared test doubles and small corpora.
#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "fable/backends.hpp"
#include "fable/decompose.hpp"
#include "fable/error.hpp"
#include "fable/prompts.hpp"
#include "fable/synthesize.hpp"
#include "fable/types.hpp"

namespace fixtures {

/// Mock generator that keeps every request it receives.
class RecordingGenerator : public fable::MockGenerator {
public:
    std::vector<fable::ChatRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }

protected:
    std::string do_generate(const fable::ChatRequest& request) override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
        }
        return fable::MockGenerator::do_generate(request);
    }

private:
    mutable std::mutex mutex_;
    std::vector<fable::ChatRequest> requests_;
};

/// Fails any request whose first message mentions `marker`.
class FailingGenerator : public fable::MockGenerator {
public:
    explicit FailingGenerator(std::string marker) : marker_(std::move(marker)) {}

protected:
    std::string do_generate(const fable::ChatRequest& request) override {
        if (request.messages.front().text.find(marker_) != std::string::npos) {
            throw fable::BackendError("service unavailable", true);
        }
        return fable::MockGenerator::do_generate(request);
    }

private:
    std::string marker_;
};

inline std::vector<fable::Document> abstracts(std::size_t n) {
    static const char* topics[] = {"graph coloring", "protein folding", "query expansion",
                                   "speech recognition", "image denoising", "type inference",
                                   "solar forecasting", "code search", "crop yield", "robot grasping"};
    std::vector<fable::Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string topic = topics[i % 10];
        docs.push_back({"doc" + std::to_string(i),
                        "Work on " + topic + " is limited. We propose method " +
                            std::to_string(i) + " for " + topic +
                            ". Results improve accuracy by " + std::to_string(3 + i) + " points.",
                        {},
                        fable::json::object()});
    }
    return docs;
}

inline fable::Document toefl_item(const std::string& id, const std::string& type) {
    return {id,
            "story " + id + "\nquestion " + id + "\noptions " + id,
            {{"story", "A " + type + " about " + id},
             {"question", "What is " + id + "?"},
             {"options", "A\nB\nC\nD " + id}},
            fable::json{{"type", type}}};
}

/// Answers a regeneration request (five turns, prior negative at index 3)
/// with "R(<prior text>)" so that chained texts are predictable; other
/// requests get the mock output. Records every regenerated prior text.
class ChainGenerator : public fable::MockGenerator {
public:
    std::vector<std::string> regenerated_priors() const {
        std::lock_guard lock(mutex_);
        return priors_;
    }

protected:
    std::string do_generate(const fable::ChatRequest& request) override {
        if (request.messages.size() == 5) {
            std::lock_guard lock(mutex_);
            priors_.push_back(request.messages[3].text);
            return "R(" + request.messages[3].text + ")";
        }
        return fable::MockGenerator::do_generate(request);
    }

private:
    mutable std::mutex mutex_;
    std::vector<std::string> priors_;
};

/// Ten two-facet documents: twenty dissimilar units with scripted scores.
struct MiningFixture {
    fable::FacetSchema schema;
    std::vector<fable::Document> docs;
    std::vector<fable::FacetUnit> units;
    std::vector<std::string> negative_texts;
    std::vector<double> initial;
    /// Scores of the first and second regeneration of each easy negative.
    std::map<std::size_t, double> round1;
    std::map<std::size_t, double> round2;
};

inline MiningFixture mining_fixture() {
    MiningFixture f;
    f.schema = fable::FacetSchema::make("pair", {"claim", "evidence"});
    for (int i = 0; i < 10; ++i) {
        const std::string id = "m" + std::to_string(i);
        f.docs.push_back({id, "Claim " + id + ". Evidence for " + id + ".", {}, fable::json::object()});
    }
    fable::MockGenerator gen;
    const auto prompts = fable::PromptSet::defaults();
    auto dec = fable::decompose_corpus(f.docs, f.schema, prompts, gen, {});
    f.units = fable::synthesize_corpus(f.docs, dec.units, f.schema, prompts, gen, {}).units;
    for (const auto& u : f.units) {
        if (u.kind == fable::UnitKind::dissimilar) f.negative_texts.push_back(u.text);
    }
    f.initial = {0.05, 0.10, 0.20, 0.249, 0.0,  0.15, 0.22, 0.12, 0.25, 0.30,
                 0.40, 0.499, 0.35, 0.45, 0.5,  0.6,  0.75, 0.9,  1.0,  0.55};
    f.round1 = {{0, 0.30}, {1, 0.45}, {2, 0.60}, {3, 0.50},
                {4, 0.10}, {5, 0.26}, {6, 0.249}, {7, 0.40}};
    f.round2 = {{4, 0.35}, {6, 0.20}};
    return f;
}

inline void script_scores(fable::ScriptedScorer& scorer, const MiningFixture& f) {
    for (std::size_t i = 0; i < f.negative_texts.size(); ++i) {
        scorer.set_for_text(f.negative_texts[i], f.initial[i]);
    }
    for (const auto& [i, s] : f.round1) scorer.set_for_text("R(" + f.negative_texts[i] + ")", s);
    for (const auto& [i, s] : f.round2) {
        scorer.set_for_text("R(R(" + f.negative_texts[i] + "))", s);
    }
}

}  // namespace fixtures
