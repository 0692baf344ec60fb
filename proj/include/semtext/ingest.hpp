#pragma once

// JSONL corpus ingestion: one {"doc_id", "text", "metadata"} object per line.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "semtext/chunking.hpp"
#include "semtext/config.hpp"
#include "semtext/error.hpp"
#include "semtext/fnv.hpp"
#include "semtext/index.hpp"
#include "semtext/providers.hpp"

namespace semtext {

struct CorpusRecord {
    std::string doc_id;
    std::string text;
    Metadata metadata;

    friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

struct SkippedLine {
    std::size_t line = 0; ///< 1-based
    std::string reason;

    friend bool operator==(const SkippedLine&, const SkippedLine&) = default;
};

struct CorpusFile {
    std::vector<CorpusRecord> records;
    std::vector<SkippedLine> skipped;
};

/// Blank lines are ignored. Bad lines are reported and skipped; a repeated doc_id
/// keeps its first occurrence. Non-string metadata values are stored as compact JSON.
inline CorpusFile parse_corpus(std::istream& in) {
    CorpusFile out;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::is_blank(line)) continue;
        const auto doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            out.skipped.push_back({line_no, "not a JSON object"});
            continue;
        }
        const auto id = doc.find("doc_id");
        const auto body = doc.find("text");
        if (id == doc.end() || !id->is_string() || id->get<std::string>().empty()) {
            out.skipped.push_back({line_no, "missing doc_id"});
            continue;
        }
        if (body == doc.end() || !body->is_string() || text::is_blank(body->get<std::string>())) {
            out.skipped.push_back({line_no, "missing or empty text"});
            continue;
        }
        CorpusRecord rec{id->get<std::string>(), body->get<std::string>(), {}};
        if (const auto meta = doc.find("metadata"); meta != doc.end() && !meta->is_null()) {
            if (!meta->is_object()) {
                out.skipped.push_back({line_no, "metadata is not an object"});
                continue;
            }
            for (const auto& [k, v] : meta->items()) rec.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        if (!seen.insert(rec.doc_id).second) {
            out.skipped.push_back({line_no, "duplicate doc_id " + rec.doc_id});
            continue;
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

inline CorpusFile read_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot read corpus " + path.string());
    return parse_corpus(in);
}

inline std::uint64_t chunk_item_id(std::string_view doc_id, std::size_t ordinal) {
    return fnv1a64_joined(doc_id, std::to_string(ordinal));
}

/// score x 100 rounded half away from zero to two decimals, e.g. 0.6423 -> "64.23%".
/// Rounding is decided on the decimal expansion, so 0.64235 gives "64.24%".
inline std::string format_percentage(double score) {
    if (!std::isfinite(score)) fail(ErrorCode::InvalidArgument, "score is not finite");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10f", std::fabs(score) * 100.0);
    std::string digits(buf);
    const std::size_t dot = digits.find('.');
    const bool up = digits[dot + 3] >= '5';
    std::string kept = digits.substr(0, dot) + digits.substr(dot + 1, 2);
    if (up) {
        std::size_t i = kept.size();
        while (i > 0) {
            --i;
            if (kept[i] == '9') {
                kept[i] = '0';
                continue;
            }
            ++kept[i];
            break;
        }
        if (kept.find_first_not_of('0') == std::string::npos) kept.insert(kept.begin(), '1');
    }
    std::string out = kept.substr(0, kept.size() - 2) + "." + kept.substr(kept.size() - 2);
    const bool negative = score < 0.0 && out.find_first_not_of("0.") != std::string::npos;
    return (negative ? "-" : "") + out + "%";
}

struct IngestReport {
    std::size_t docs = 0;
    std::size_t chunks = 0;
    std::vector<SkippedLine> skipped;
};

struct PreparedChunk {
    std::uint64_t item_id = 0;
    std::string doc_id;
    Chunk chunk;
    const CorpusRecord* record = nullptr;
};

/// Chunks every record after noise removal. Whitespace-only chunks are dropped but
/// keep their ordinal, so ids are stable under changes to the noise rules.
inline std::vector<PreparedChunk> prepare_chunks(const std::vector<CorpusRecord>& records, const AppConfig& cfg) {
    const auto rules = cfg.noise_rules();
    std::vector<PreparedChunk> out;
    for (const auto& rec : records) {
        const std::string cleaned = strip_noise(rec.text, rules);
        const auto chunks = split(rec.doc_id, cleaned, cfg.chunk_policy);
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (text::is_blank(chunks[i].text)) continue;
            out.push_back({chunk_item_id(rec.doc_id, i), rec.doc_id, chunks[i], &rec});
        }
    }
    return out;
}

inline std::vector<Embedding> embed_texts(EmbeddingProvider& provider, const AppConfig& cfg,
                                          std::span<const std::string> texts) {
    if (texts.empty()) return {};
    if (cfg.cache_dir) {
        const EmbedCache cache(*cfg.cache_dir);
        return cached_embed(provider, cache, texts);
    }
    return provider.embed(texts);
}

/// Builds the index that results from upserting `records` into `existing`: live
/// records of other documents are carried over, every chunk of a re-ingested
/// doc_id is replaced.
inline VectorIndex build_index(const std::vector<CorpusRecord>& records, const AppConfig& cfg,
                               EmbeddingProvider& provider, const VectorIndex* existing, IngestReport& report) {
    if (existing != nullptr && !existing->empty() && existing->model_id() != provider.model_id()) {
        fail(ErrorCode::ModelMismatch, "index holds '" + existing->model_id() + "' vectors but the provider is '" +
                                           provider.model_id() + "'; remove the index to rebuild it");
    }
    const auto prepared = prepare_chunks(records, cfg);
    std::vector<std::string> texts;
    texts.reserve(prepared.size());
    for (const auto& p : prepared) texts.push_back(p.chunk.text);
    const std::vector<Embedding> vectors = embed_texts(provider, cfg, texts);

    VectorIndex index(cfg.hnsw);
    std::set<std::string> incoming;
    for (const auto& r : records) incoming.insert(r.doc_id);
    if (existing != nullptr) {
        for (const auto& rec : existing->records()) {
            const auto it = rec.metadata.find("doc_id");
            if (it != rec.metadata.end() && incoming.contains(it->second)) continue;
            std::vector<double> values(rec.vector.values().begin(), rec.vector.values().end());
            for (double& v : values) v *= rec.vector.norm();
            index.add({rec.item_id, Embedding(std::move(values), rec.vector.model_id()), rec.metadata});
        }
    }
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        const auto& p = prepared[i];
        Metadata meta = p.record->metadata;
        meta["doc_id"] = p.doc_id;
        meta["chunk_id"] = p.chunk.chunk_id;
        meta["char_start"] = std::to_string(p.chunk.char_start);
        meta["char_end"] = std::to_string(p.chunk.char_end);
        meta["text"] = p.chunk.text;
        index.add({p.item_id, vectors[i], std::move(meta)});
    }
    report.docs = records.size();
    report.chunks = prepared.size();
    return index;
}

/// Reads the corpus, upserts it into the index at cfg.index_path and saves it.
/// Any provider failure aborts before anything is written.
inline IngestReport ingest_corpus(const std::filesystem::path& path, const AppConfig& cfg,
                                  EmbeddingProvider& provider) {
    CorpusFile corpus = read_corpus(path);
    IngestReport report;
    report.skipped = std::move(corpus.skipped);
    std::optional<VectorIndex> existing;
    if (std::filesystem::exists(cfg.index_path)) existing.emplace(VectorIndex::load(cfg.index_path, cfg.hnsw));
    VectorIndex index = build_index(corpus.records, cfg, provider, existing ? &*existing : nullptr, report);
    if (cfg.index_path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.index_path.parent_path(), ec);
    }
    index.save(cfg.index_path);
    return report;
}

inline IngestReport ingest_corpus(const std::filesystem::path& path, const AppConfig& cfg) {
    auto provider = make_provider(cfg.provider);
    return ingest_corpus(path, cfg, *provider);
}

inline nlohmann::json to_json(const IngestReport& r) {
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& s : r.skipped) skipped.push_back({{"line", s.line}, {"reason", s.reason}});
    return {{"docs", r.docs}, {"chunks", r.chunks}, {"skipped", skipped}};
}

} // namespace semtext
