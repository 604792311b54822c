#include "fable/corpus.hpp"

#include <set>

namespace fable {

namespace {

std::string id_string(const json& value) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    if (value.is_number_integer()) {
        return std::to_string(value.get<long long>());
    }
    throw ValidationError("record id must be a string or integer");
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

std::string text_or_lines(const json& value, std::string_view sep) {
    if (value.is_string()) {
        return value.get<std::string>();
    }
    if (value.is_array()) {
        return join(value.get<std::vector<std::string>>(), sep);
    }
    throw ValidationError("expected a string or an array of strings");
}

Document from_s2orc(const json& j) {
    Document doc;
    doc.id = id_string(j.at("paper_id"));
    doc.text = text_or_lines(j.at("abstract"), " ");
    if (auto it = j.find("title"); it != j.end() && it->is_string()) {
        doc.meta["title"] = *it;
    }
    return doc;
}

Document from_csfcube(const json& j, const FacetSchema& schema) {
    Document doc = from_s2orc(j);
    const auto sentences = j.at("abstract").get<std::vector<std::string>>();
    const auto labels = j.value("pred_labels", std::vector<std::string>{});
    if (!labels.empty() && labels.size() != sentences.size()) {
        throw ValidationError("pred_labels length differs from abstract sentence count");
    }
    std::map<std::string, std::vector<std::string>> grouped;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::string facet = labels[i];
        if (auto pos = facet.rfind("_label"); pos != std::string::npos) {
            facet.erase(pos);
        }
        if (facet == "objective") {
            facet = "background";
        }
        if (schema.contains(facet)) {
            grouped[facet].push_back(sentences[i]);
        }
    }
    for (const auto& [facet, parts] : grouped) {
        doc.facet_labels[facet] = join(parts, " ");
    }
    return doc;
}

Document from_toefl(const json& j) {
    Document doc;
    doc.id = id_string(j.at("id"));
    const std::string story = j.at("story").get<std::string>();
    const std::string question = j.at("question").get<std::string>();
    const std::string options = text_or_lines(j.at("options"), "\n");
    doc.facet_labels = {{"story", story}, {"question", question}, {"options", options}};
    doc.text = story + "\n" + question + "\n" + options;
    if (auto it = j.find("type"); it != j.end() && it->is_string()) {
        doc.meta["type"] = *it;
    }
    return doc;
}

void check_unique(const std::vector<Document>& docs) {
    std::set<std::string> seen;
    for (const auto& d : docs) {
        if (!seen.insert(d.id).second) {
            throw ValidationError("duplicate document id '" + d.id + "'");
        }
    }
}

}  // namespace

void write_json_file(const std::filesystem::path& path, const json& value) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ValidationError("cannot write " + path.string());
    }
    out << value.dump(2) << '\n';
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
}

void validate_document(const Document& doc, const FacetSchema& schema) {
    if (doc.id.empty()) {
        throw ValidationError("document with empty id");
    }
    if (doc.text.empty()) {
        throw ValidationError("document '" + doc.id + "' has empty text");
    }
    for (const auto& [facet, text] : doc.facet_labels) {
        if (!schema.contains(facet)) {
            throw ValidationError("document '" + doc.id + "' labels facet '" + facet +
                                  "' outside schema '" + schema.domain_name + "'");
        }
        if (text.empty()) {
            throw ValidationError("document '" + doc.id + "' has an empty label for '" + facet +
                                  "'");
        }
    }
}

std::vector<Document> load_documents(const std::filesystem::path& path,
                                     const FacetSchema& schema) {
    auto docs = read_jsonl<Document>(path);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        try {
            validate_document(docs[i], schema);
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ": record " + std::to_string(i + 1) + ": " +
                                  e.what());
        }
    }
    check_unique(docs);
    return docs;
}

RecordShape parse_record_shape(std::string_view text) {
    if (text == "documents") return RecordShape::documents;
    if (text == "s2orc") return RecordShape::s2orc;
    if (text == "csfcube") return RecordShape::csfcube;
    if (text == "toefl") return RecordShape::toefl;
    throw ValidationError("unknown record shape '" + std::string(text) +
                          "' (documents, s2orc, csfcube, toefl)");
}

std::vector<Document> ingest_records(const std::filesystem::path& path, RecordShape shape,
                                     const FacetSchema& schema) {
    if (shape == RecordShape::documents) {
        return load_documents(path, schema);
    }
    auto raw = read_jsonl<json>(path);
    std::vector<Document> docs;
    docs.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        try {
            Document doc;
            switch (shape) {
                case RecordShape::s2orc: doc = from_s2orc(raw[i]); break;
                case RecordShape::csfcube: doc = from_csfcube(raw[i], schema); break;
                case RecordShape::toefl: doc = from_toefl(raw[i]); break;
                case RecordShape::documents: break;
            }
            validate_document(doc, schema);
            docs.push_back(std::move(doc));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ":" + std::to_string(i + 1) +
                                  ": malformed record: " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    check_unique(docs);
    return docs;
}

std::vector<RelevancePool> load_pools(const std::filesystem::path& path) {
    auto pools = read_jsonl<RelevancePool>(path);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& p : pools) {
        p.validate();
        if (!seen.insert({p.facet, p.query_id}).second) {
            throw ValidationError("duplicate pool for facet '" + p.facet + "', query '" +
                                  p.query_id + "'");
        }
    }
    return pools;
}

std::vector<RelevancePool> load_csfcube_pools(const std::filesystem::path& path,
                                              const std::string& facet) {
    const json root = read_json_file(path);
    std::vector<RelevancePool> pools;
    for (const auto& [query_id, entry] : root.items()) {
        RelevancePool pool;
        pool.facet = facet;
        pool.query_id = query_id;
        const auto cands = entry.at("cands").get<std::vector<std::string>>();
        const auto rels = entry.at("relevance_adju").get<std::vector<int>>();
        if (cands.size() != rels.size()) {
            throw ValidationError(path.string() + ": query " + query_id +
                                  " has mismatched cands/relevance_adju lengths");
        }
        for (std::size_t i = 0; i < cands.size(); ++i) {
            if (cands[i] != query_id) {
                pool.candidates.push_back({cands[i], rels[i]});
            }
        }
        pool.validate();
        pools.push_back(std::move(pool));
    }
    return pools;
}

}  // namespace fable
