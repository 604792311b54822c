#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace fable {

enum class PromptStage { summarize, similar, dissimilar, regenerate };

std::string_view to_string(PromptStage stage);

/// Values substituted for {document}, {facet}, {summary}, {score}, {low}, {high}.
struct PromptValues {
    std::string document;
    std::string facet;
    std::string summary;
    std::string score;
    std::string low;
    std::string high;
};

/// Prompt text with named placeholders. Construction checks that every
/// placeholder the stage needs is present; the hash is a content digest.
class PromptTemplate {
public:
    PromptTemplate(PromptStage stage, std::string text);

    PromptStage stage() const { return stage_; }
    const std::string& text() const { return text_; }
    const std::string& hash() const { return hash_; }

    /// Substitutes known placeholders; other braces are left untouched.
    std::string render(const PromptValues& values) const;

private:
    PromptStage stage_;
    std::string text_;
    std::string hash_;
};

/// The four stage templates used by a run.
struct PromptSet {
    PromptTemplate summarize;
    PromptTemplate similar;
    PromptTemplate dissimilar;
    PromptTemplate regenerate;

    static PromptSet defaults();

    /// Loads summarize.txt, similar.txt, dissimilar.txt, regenerate.txt from `dir`;
    /// stages without a file keep the default template.
    static PromptSet load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(PromptStage stage) const;
    std::map<std::string, std::string> hashes() const;
};

/// Built-in template text for a stage (same as assets/prompts/<stage>.txt).
std::string_view default_template_text(PromptStage stage);

/// Two-decimal rendering used for {score}, {low}, {high}.
std::string format_score(double value);

}  // namespace fable
