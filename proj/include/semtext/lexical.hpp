#pragma once

// Pre-embedding baselines: dictionary flagging and smoothed TF-IDF search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semtext/error.hpp"
#include "semtext/text.hpp"
#include "semtext/vector.hpp"

namespace semtext {

struct TermDictionary {
    std::string name;
    std::set<std::string> terms; // lowercase

    void validate() const {
        if (terms.empty()) fail(ErrorCode::InvalidArgument, "dictionary '" + name + "' has no terms");
        for (const auto& t : terms) {
            if (text::is_blank(t)) fail(ErrorCode::InvalidArgument, "dictionary terms must not be blank");
        }
    }
};

inline TermDictionary make_dictionary(std::string name, const std::vector<std::string>& terms) {
    TermDictionary d{std::move(name), {}};
    for (const auto& t : terms) {
        d.terms.insert(text::to_lower_utf8(text::trim(t)));
    }
    d.validate();
    return d;
}

/// One term per line; blank lines and lines starting with '#' are ignored.
inline TermDictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoFailure, "cannot open dictionary " + path.string());
    std::vector<std::string> terms;
    std::string line;
    while (std::getline(in, line)) {
        const std::string_view t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        terms.emplace_back(t);
    }
    return make_dictionary(path.stem().string(), terms);
}

struct DictionaryHit {
    std::string term;
    std::size_t offset = 0; // byte offset into the original text

    friend bool operator==(const DictionaryHit&, const DictionaryHit&) = default;
};

struct FlagResult {
    bool flagged = false;
    std::vector<DictionaryHit> hits; // ascending offset, then term
};

/// Case-insensitive whole-word matching; a boundary is a non-letter/digit or the string edge.
inline FlagResult dictionary_flag(const TermDictionary& dict, std::string_view input) {
    // Case folding keeps byte lengths, so offsets in `lower` are offsets in `input`.
    const std::string lower = text::to_lower_utf8(input);
    const auto boundary_before = [&](std::size_t pos) {
        if (pos == 0) return true;
        std::size_t start = pos - 1;
        while (start > 0 && (static_cast<std::uint8_t>(lower[start]) & 0xC0) == 0x80) --start;
        return !text::is_alnum(text::decode_utf8(lower, start).value);
    };
    const auto boundary_after = [&](std::size_t pos) {
        return pos >= lower.size() || !text::is_alnum(text::decode_utf8(lower, pos).value);
    };
    FlagResult result;
    for (const std::string& term : dict.terms) {
        for (std::size_t hit = lower.find(term); hit != std::string::npos; hit = lower.find(term, hit + 1)) {
            if (boundary_before(hit) && boundary_after(hit + term.size())) {
                result.hits.push_back({term, hit});
            }
        }
    }
    std::sort(result.hits.begin(), result.hits.end(), [](const auto& a, const auto& b) {
        return a.offset != b.offset ? a.offset < b.offset : a.term < b.term;
    });
    result.flagged = !result.hits.empty();
    return result;
}

/// Lowercased whitespace-delimited words, the same word rule as the token counter.
inline std::vector<std::string> tfidf_tokens(std::string_view s) {
    const std::string lower = text::to_lower_utf8(s);
    std::vector<std::string> out;
    for (const auto& w : text::word_spans(lower)) out.emplace_back(lower.substr(w.begin, w.size()));
    return out;
}

using SparseVector = std::vector<std::pair<std::uint32_t, double>>; // sorted by column

struct TfidfModel {
    std::map<std::string, std::uint32_t> vocabulary; // term -> column (columns follow term order)
    std::vector<double> idf;                         // by column
    std::size_t doc_count = 0;

    /// Smoothed inverse document frequency.
    static double smoothed_idf(std::size_t doc_count, std::size_t df) {
        return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + static_cast<double>(df))) + 1.0;
    }

    /// L2-normalized tf·idf vector; out-of-vocabulary terms contribute nothing.
    SparseVector vectorize(std::string_view s) const {
        std::map<std::uint32_t, double> tf;
        for (const auto& tok : tfidf_tokens(s)) {
            if (auto it = vocabulary.find(tok); it != vocabulary.end()) tf[it->second] += 1.0;
        }
        SparseVector v;
        double sq = 0.0;
        for (const auto& [col, count] : tf) {
            const double w = count * idf[col];
            v.emplace_back(col, w);
            sq += w * w;
        }
        if (sq > 0.0) {
            const double len = std::sqrt(sq);
            for (auto& [col, w] : v) w /= len;
        }
        return v;
    }
};

struct TfidfIndex {
    TfidfModel model;
    std::vector<std::string> doc_ids;
    std::vector<SparseVector> doc_vectors; // unit length, or empty for token-free docs
    std::vector<std::string> empty_docs;   // ids of documents with no tokens
};

inline TfidfIndex build_tfidf(const std::vector<std::pair<std::string, std::string>>& corpus) {
    if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "tf-idf needs at least one document");
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(corpus.size());
    std::map<std::string, std::size_t> df;
    for (const auto& [id, body] : corpus) {
        tokens.push_back(tfidf_tokens(body));
        for (const auto& t : std::set<std::string>(tokens.back().begin(), tokens.back().end())) ++df[t];
    }
    if (df.empty()) fail(ErrorCode::EmptyCorpus, "corpus contains no tokens");

    TfidfIndex out;
    out.model.doc_count = corpus.size();
    std::uint32_t col = 0;
    for (const auto& [term, freq] : df) {
        out.model.vocabulary.emplace(term, col++);
        out.model.idf.push_back(TfidfModel::smoothed_idf(corpus.size(), freq));
    }
    for (std::size_t d = 0; d < corpus.size(); ++d) {
        out.doc_ids.push_back(corpus[d].first);
        out.doc_vectors.push_back(out.model.vectorize(corpus[d].second));
        if (out.doc_vectors.back().empty()) out.empty_docs.push_back(corpus[d].first);
    }
    return out;
}

inline double sparse_dot(const SparseVector& a, const SparseVector& b) {
    double acc = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i].first == b[j].first) {
            acc += a[i++].second * b[j++].second;
        } else if (a[i].first < b[j].first) {
            ++i;
        } else {
            ++j;
        }
    }
    return acc;
}

/// Cosine ranking of the non-empty documents; an all-out-of-vocabulary query yields no results.
inline std::vector<BasicSimilarityResult<std::string>> tfidf_search(const TfidfIndex& index, std::string_view query,
                                                                    std::size_t top_n) {
    const SparseVector q = index.model.vectorize(query);
    std::vector<BasicSimilarityResult<std::string>> results;
    if (q.empty() || top_n == 0) return results;
    for (std::size_t d = 0; d < index.doc_ids.size(); ++d) {
        if (index.doc_vectors[d].empty()) continue;
        results.push_back({index.doc_ids[d], clamp_unit(sparse_dot(q, index.doc_vectors[d])), 0});
    }
    assign_ranks(results);
    if (results.size() > top_n) results.resize(top_n);
    return results;
}

} // namespace semtext
