#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fable/error.hpp"
#include "fable/random.hpp"
#include "fable/types.hpp"

namespace fable {

/// Reads one JSON object per non-blank line. Errors carry the file name and
/// 1-based line number.
template <typename T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    std::vector<T> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(json::parse(line).get<T>());
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                                  ": malformed record: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " +
                                  e.what());
        }
    }
    return records;
}

/// Writes one compact JSON object per line, '\n' terminated.
template <typename Range>
void write_jsonl(const std::filesystem::path& path, const Range& records) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    for (const auto& record : records) {
        out << json(record).dump() << '\n';
    }
}

void write_json_file(const std::filesystem::path& path, const json& value);
json read_json_file(const std::filesystem::path& path);

/// Checks document invariants against a schema. Throws ValidationError.
void validate_document(const Document& doc, const FacetSchema& schema);

/// Loads and validates a documents JSONL file; duplicate ids are rejected.
std::vector<Document> load_documents(const std::filesystem::path& path,
                                     const FacetSchema& schema);

/// Raw record shapes accepted by `ingest_records`.
enum class RecordShape {
    documents,  ///< {id, text, facet_labels?, meta?}
    s2orc,      ///< {paper_id, abstract (string or sentence list), title?}
    csfcube,    ///< {paper_id, abstract: [sentences], pred_labels: [..._label]}
    toefl,      ///< {id, story, question, options: [..], type?}
};

RecordShape parse_record_shape(std::string_view text);

/// Converts a raw corpus file into validated Documents.
std::vector<Document> ingest_records(const std::filesystem::path& path, RecordShape shape,
                                     const FacetSchema& schema);

/// Reads relevance pools and validates each one.
std::vector<RelevancePool> load_pools(const std::filesystem::path& path);

/// Reads CSFCube-style annotation maps {query_id: {cands: [...], relevance_adju: [...]}}.
std::vector<RelevancePool> load_csfcube_pools(const std::filesystem::path& path,
                                              const std::string& facet);

template <typename T>
struct Split {
    std::vector<T> train;
    std::vector<T> val;
    std::optional<std::string> warning;
};

/// Seeded train/validation partition with |train| = round_half_up(ratio * N).
/// Relative order is preserved inside each part.
template <typename T>
Split<T> split_train_val(const std::vector<T>& items, double ratio, std::uint64_t seed) {
    if (items.empty()) {
        throw ValidationError("split_train_val: empty input");
    }
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw ValidationError("split_train_val: ratio must lie in (0, 1)");
    }
    const std::size_t n_train = std::min(items.size(), round_half_up(ratio * items.size()));
    Rng rng(derive_seed(seed, "split"));
    auto chosen = rng.sample_indices(items.size(), n_train);
    std::vector<bool> in_train(items.size(), false);
    for (auto i : chosen) {
        in_train[i] = true;
    }
    Split<T> split;
    for (std::size_t i = 0; i < items.size(); ++i) {
        (in_train[i] ? split.train : split.val).push_back(items[i]);
    }
    if (split.val.empty() || split.train.empty()) {
        split.warning = "split of " + std::to_string(items.size()) +
                        " records leaves one side empty";
    }
    return split;
}

}  // namespace fable
