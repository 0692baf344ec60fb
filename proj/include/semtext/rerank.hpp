#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/net.hpp"
#include "semtext/text.hpp"

namespace semtext {

struct RerankCandidate {
    std::uint64_t item_id = 0;
    std::string text;
    double retrieval_score = 0.0;
    std::size_t retrieval_rank = 0;
    double rerank_score = 0.0;
};

/// Scores (query, candidate) pairs; higher is more relevant.
class RerankScorer {
public:
    virtual ~RerankScorer() = default;
    virtual std::vector<double> score(std::string_view query, std::span<const std::string> candidates) = 0;
};

/// Jaccard overlap of lowercased word sets.
inline double lexical_overlap(std::string_view a, std::string_view b) {
    const auto ta = text::alnum_tokens(a);
    const auto tb = text::alnum_tokens(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t shared = 0;
    for (const auto& w : sa) shared += sb.count(w);
    return static_cast<double>(shared) / static_cast<double>(sa.size() + sb.size() - shared);
}

class LexicalOverlapScorer final : public RerankScorer {
public:
    std::vector<double> score(std::string_view query, std::span<const std::string> candidates) override {
        std::vector<double> out;
        out.reserve(candidates.size());
        for (const auto& c : candidates) out.push_back(lexical_overlap(query, c));
        return out;
    }
};

/// External scorer: POST {"query", "candidates"} -> {"scores"} with matching length.
class HttpRerankScorer final : public RerankScorer {
public:
    explicit HttpRerankScorer(std::string url, int timeout_ms = 30000)
        : url_(std::move(url)), timeout_ms_(timeout_ms) {}

    std::vector<double> score(std::string_view query, std::span<const std::string> candidates) override {
        const nlohmann::json body = {{"query", query}, {"candidates", candidates}};
        std::optional<net::Response> res;
        try {
            res = net::post_json(url_, body.dump(), {}, timeout_ms_);
        } catch (const Error& e) {
            fail(ErrorCode::ScorerUnavailable, e.what());
        }
        if (!res) fail(ErrorCode::ScorerUnavailable, "reranker at " + url_ + " is unreachable");
        if (!res->ok()) fail(ErrorCode::ScorerUnavailable, "reranker returned status " + std::to_string(res->status));
        const auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("scores") || !doc["scores"].is_array() ||
            doc["scores"].size() != candidates.size()) {
            fail(ErrorCode::ScorerUnavailable, "reranker response is malformed");
        }
        std::vector<double> out;
        for (const auto& s : doc["scores"]) {
            if (!s.is_number()) fail(ErrorCode::ScorerUnavailable, "reranker score is not a number");
            out.push_back(s.get<double>());
        }
        return out;
    }

private:
    std::string url_;
    int timeout_ms_;
};

/// Re-scores retrieved candidates and keeps the best `top_m`. Equal scores keep
/// their retrieval order. The output is always a subset of the input.
inline std::vector<RerankCandidate> rerank(std::string_view query, std::vector<RerankCandidate> candidates,
                                           RerankScorer& scorer, std::size_t top_m) {
    if (candidates.empty()) fail(ErrorCode::EmptyInput, "rerank needs at least one candidate");
    if (top_m == 0 || top_m > candidates.size()) {
        fail(ErrorCode::InvalidArgument, "top_m must be in 1.." + std::to_string(candidates.size()));
    }
    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& c : candidates) texts.push_back(c.text);
    const std::vector<double> scores = scorer.score(query, texts);
    if (scores.size() != candidates.size()) {
        fail(ErrorCode::ScorerUnavailable, "scorer returned a different number of scores");
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].rerank_score = scores[i];
    std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        if (a.rerank_score != b.rerank_score) return a.rerank_score > b.rerank_score;
        return a.retrieval_rank < b.retrieval_rank;
    });
    candidates.resize(top_m);
    return candidates;
}

} // namespace semtext
