#include "fable/prompts.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "fable/error.hpp"
#include "fable/hashing.hpp"

namespace fable {

namespace {

std::vector<std::string_view> required_placeholders(PromptStage stage) {
    switch (stage) {
        case PromptStage::summarize: return {"{document}", "{facet}"};
        case PromptStage::similar:
        case PromptStage::dissimilar: return {"{facet}"};
        case PromptStage::regenerate: return {"{facet}", "{score}", "{low}", "{high}"};
    }
    return {};
}

void replace_all(std::string& text, std::string_view token, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(token, pos)) != std::string::npos) {
        text.replace(pos, token.size(), value);
        pos += value.size();
    }
}

constexpr std::string_view kSummarize =
    "Read the document below and summarize its {facet} in two or three sentences. "
    "Describe only the {facet}; leave out every other aspect of the document.\n"
    "\n"
    "Document:\n"
    "{document}\n";

constexpr std::string_view kSimilar =
    "Using the {facet} summary you just wrote as a guide, write a new passage whose {facet} "
    "is similar to it. Write only about the {facet}, in the style of the original document.\n";

constexpr std::string_view kDissimilar =
    "Using the {facet} summary you just wrote as a guide, write a new passage whose {facet} "
    "is clearly different from it. Write only about the {facet}, in the style of the original "
    "document.\n";

constexpr std::string_view kRegenerate =
    "The passage you just wrote has a similarity score of {score} to the original {facet}, "
    "on a scale from 0 to 1. Rewrite it so that its similarity score lies between {low} and "
    "{high}: it must stay different from the original {facet}, but be closer to it than "
    "before. Write only about the {facet}.\n";

}  // namespace

std::string_view to_string(PromptStage stage) {
    switch (stage) {
        case PromptStage::summarize: return "summarize";
        case PromptStage::similar: return "similar";
        case PromptStage::dissimilar: return "dissimilar";
        case PromptStage::regenerate: return "regenerate";
    }
    return "?";
}

std::string_view default_template_text(PromptStage stage) {
    switch (stage) {
        case PromptStage::summarize: return kSummarize;
        case PromptStage::similar: return kSimilar;
        case PromptStage::dissimilar: return kDissimilar;
        case PromptStage::regenerate: return kRegenerate;
    }
    return {};
}

PromptTemplate::PromptTemplate(PromptStage stage, std::string text)
    : stage_(stage), text_(std::move(text)) {
    for (auto placeholder : required_placeholders(stage_)) {
        if (text_.find(placeholder) == std::string::npos) {
            throw ValidationError(std::string(to_string(stage_)) + " template lacks " +
                                  std::string(placeholder));
        }
    }
    hash_ = short_digest(std::string(to_string(stage_)) + "\n" + text_);
}

std::string PromptTemplate::render(const PromptValues& values) const {
    std::string out = text_;
    replace_all(out, "{document}", values.document);
    replace_all(out, "{facet}", values.facet);
    replace_all(out, "{summary}", values.summary);
    replace_all(out, "{score}", values.score);
    replace_all(out, "{low}", values.low);
    replace_all(out, "{high}", values.high);
    return out;
}

PromptSet PromptSet::defaults() {
    return PromptSet{
        PromptTemplate(PromptStage::summarize, std::string(kSummarize)),
        PromptTemplate(PromptStage::similar, std::string(kSimilar)),
        PromptTemplate(PromptStage::dissimilar, std::string(kDissimilar)),
        PromptTemplate(PromptStage::regenerate, std::string(kRegenerate)),
    };
}

PromptSet PromptSet::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ValidationError("template directory " + dir.string() + " does not exist");
    }
    auto load = [&](PromptStage stage) {
        const auto path = dir / (std::string(to_string(stage)) + ".txt");
        if (!std::filesystem::exists(path)) {
            return PromptTemplate(stage, std::string(default_template_text(stage)));
        }
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return PromptTemplate(stage, buffer.str());
    };
    return PromptSet{load(PromptStage::summarize), load(PromptStage::similar),
                     load(PromptStage::dissimilar), load(PromptStage::regenerate)};
}

const PromptTemplate& PromptSet::get(PromptStage stage) const {
    switch (stage) {
        case PromptStage::summarize: return summarize;
        case PromptStage::similar: return similar;
        case PromptStage::dissimilar: return dissimilar;
        case PromptStage::regenerate: return regenerate;
    }
    return summarize;
}

std::map<std::string, std::string> PromptSet::hashes() const {
    std::map<std::string, std::string> out;
    for (auto stage : {PromptStage::summarize, PromptStage::similar, PromptStage::dissimilar,
                       PromptStage::regenerate}) {
        out[std::string(to_string(stage))] = get(stage).hash();
    }
    return out;
}

std::string format_score(double value) { return fmt::format("{:.2f}", value); }

}  // namespace fable
