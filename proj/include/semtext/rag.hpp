#pragma once

// Retrieval-augmented answering: embed the question with the ingestion model,
// retrieve the closest chunks, and prompt a language model with them.

#include <cstdint>
#include <cstdlib>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/fnv.hpp"
#include "semtext/index.hpp"
#include "semtext/net.hpp"
#include "semtext/providers.hpp"

namespace semtext {

inline constexpr std::string_view kDefaultPromptTemplate =
    "Answer using ONLY the context below. If the context is insufficient, say so.\n\n"
    "Context:\n{context}\n\nQuestion: {question}\n";

inline constexpr std::string_view kNoContextBlock = "NO RELEVANT CONTEXT FOUND";

enum class LlmKind { Mock, Http };

struct LlmConfig {
    LlmKind kind = LlmKind::Mock;
    std::string endpoint_url;
    std::string model_id;
    std::string api_key_env;
    int timeout_ms = 60000;
    int retries = 1;
};

struct RagConfig {
    std::size_t top_k = 4;
    double min_score = 0.3;
    std::string prompt_template{kDefaultPromptTemplate};
    LlmConfig llm;
    /// Above this many records retrieval switches from exact to HNSW search.
    std::size_t hnsw_threshold = 50000;

    void validate() const;
};

namespace detail {

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

} // namespace detail

inline void validate_template(std::string_view tmpl) {
    if (detail::count_occurrences(tmpl, "{context}") != 1 || detail::count_occurrences(tmpl, "{question}") != 1) {
        fail(ErrorCode::TemplateInvalid, "prompt template needs {context} and {question} exactly once each");
    }
}

inline void RagConfig::validate() const {
    if (top_k == 0) fail(ErrorCode::InvalidArgument, "top_k must be positive");
    if (!(min_score >= -1.0 && min_score <= 1.0)) fail(ErrorCode::InvalidArgument, "min_score must lie in [-1, 1]");
    validate_template(prompt_template);
    if (llm.kind == LlmKind::Http && llm.endpoint_url.empty()) {
        fail(ErrorCode::InvalidArgument, "http LLM needs an endpoint");
    }
}

/// A retrieved chunk. Text and ids come from the index record metadata.
struct RetrievedChunk {
    std::uint64_t item_id = 0;
    std::string chunk_id;
    std::string doc_id;
    double score = 0.0;
    std::string text;

    friend bool operator==(const RetrievedChunk&, const RetrievedChunk&) = default;
};

inline std::vector<SearchResult> search_index(const VectorIndex& index, const Embedding& query, std::size_t k,
                                              std::size_t hnsw_threshold) {
    return index.size() > hnsw_threshold ? index.search_hnsw(query, k) : index.search_flat(query, k);
}

inline RetrievedChunk to_retrieved(const VectorIndex& index, const SearchResult& r) {
    RetrievedChunk c{r.item_id, std::to_string(r.item_id), "", r.score, ""};
    if (auto rec = index.get(r.item_id)) {
        const auto& m = rec->metadata;
        if (auto it = m.find("chunk_id"); it != m.end()) c.chunk_id = it->second;
        if (auto it = m.find("doc_id"); it != m.end()) c.doc_id = it->second;
        if (auto it = m.find("text"); it != m.end()) c.text = it->second;
    }
    return c;
}

inline void require_same_model(const VectorIndex& index, const EmbeddingProvider& provider) {
    if (index.model_id() != provider.model_id()) {
        fail(ErrorCode::ModelMismatch, "index was built with '" + index.model_id() + "' but the question provider is '" +
                                           provider.model_id() + "'");
    }
}

/// Top-k chunks by cosine with scores >= min_score, best first.
inline std::vector<RetrievedChunk> retrieve_context(const std::string& question, const VectorIndex& index,
                                                    EmbeddingProvider& provider, const RagConfig& cfg) {
    cfg.validate();
    if (index.empty()) fail(ErrorCode::NotFound, "knowledge base index is empty");
    require_same_model(index, provider);
    const Embedding q = provider.embed_one(question);
    std::vector<RetrievedChunk> out;
    for (const auto& r : search_index(index, q, cfg.top_k, cfg.hnsw_threshold)) {
        if (r.score >= cfg.min_score) out.push_back(to_retrieved(index, r));
    }
    return out;
}

/// Substitutes both placeholders in a single pass, so placeholder-like text inside
/// the chunks or the question is never expanded.
inline std::string assemble_prompt(const std::string& question, const std::vector<RetrievedChunk>& chunks,
                                   std::string_view tmpl) {
    validate_template(tmpl);
    std::string context;
    if (chunks.empty()) {
        context = kNoContextBlock;
    } else {
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            if (i > 0) context += "\n---\n";
            context += "[source " + chunks[i].chunk_id + "] " + chunks[i].text;
        }
    }
    const std::size_t ctx_at = tmpl.find("{context}");
    const std::size_t q_at = tmpl.find("{question}");
    std::string out;
    if (ctx_at < q_at) {
        out.append(tmpl.substr(0, ctx_at)).append(context);
        out.append(tmpl.substr(ctx_at + 9, q_at - ctx_at - 9)).append(question);
        out.append(tmpl.substr(q_at + 10));
    } else {
        out.append(tmpl.substr(0, q_at)).append(question);
        out.append(tmpl.substr(q_at + 10, ctx_at - q_at - 10)).append(context);
        out.append(tmpl.substr(ctx_at + 9));
    }
    return out;
}

/// Deterministic stand-in for a language model: "MOCK:" + FNV-1a-64 hex of the prompt.
inline std::string mock_llm(std::string_view prompt) { return "MOCK:" + to_hex(fnv1a64(prompt)); }

class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

class MockLlm final : public LlmClient {
public:
    std::string complete(const std::string& prompt) override { return mock_llm(prompt); }
};

/// Chat-completions style client: {"model", "messages": [{"role": "user", "content"}]}
/// -> choices[0].message.content.
class HttpLlm final : public LlmClient {
public:
    explicit HttpLlm(LlmConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint_url.empty()) fail(ErrorCode::InvalidArgument, "http LLM needs an endpoint");
    }

    std::string complete(const std::string& prompt) override {
        std::vector<std::pair<std::string, std::string>> headers;
        if (!cfg_.api_key_env.empty()) {
            const char* key = std::getenv(cfg_.api_key_env.c_str());
            if (key == nullptr || *key == '\0') {
                fail(ErrorCode::LlmUnavailable, "credential variable " + cfg_.api_key_env + " is not set");
            }
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
        const nlohmann::json body = {
            {"model", cfg_.model_id},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        };
        std::string problem = "no attempt made";
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            std::optional<net::Response> res;
            try {
                res = net::post_json(cfg_.endpoint_url, body.dump(), headers, cfg_.timeout_ms);
            } catch (const Error& e) {
                fail(ErrorCode::LlmUnavailable, e.what());
            }
            if (!res) {
                problem = "transport failure";
                continue;
            }
            if (!res->ok()) {
                problem = "status " + std::to_string(res->status);
                continue;
            }
            const auto doc = nlohmann::json::parse(res->body, nullptr, false);
            try {
                return doc.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const nlohmann::json::exception&) {
                problem = "malformed response body";
            }
        }
        fail(ErrorCode::LlmUnavailable, cfg_.endpoint_url + ": " + problem);
    }

private:
    LlmConfig cfg_;
};

inline std::unique_ptr<LlmClient> make_llm(const LlmConfig& cfg) {
    if (cfg.kind == LlmKind::Mock) return std::make_unique<MockLlm>();
    return std::make_unique<HttpLlm>(cfg);
}

struct RagSource {
    std::string chunk_id;
    std::string doc_id;
    double score = 0.0;
    std::string excerpt;

    friend bool operator==(const RagSource&, const RagSource&) = default;
};

struct RagAnswer {
    std::string answer_text;
    std::vector<RagSource> sources; ///< retrieval order, scores descending
    std::string prompt_used;

    friend bool operator==(const RagAnswer&, const RagAnswer&) = default;
};

/// retrieve_context -> assemble_prompt -> LLM. Every source excerpt appears verbatim
/// in `prompt_used`.
inline RagAnswer ask(const std::string& question, const VectorIndex& index, EmbeddingProvider& provider,
                     LlmClient& llm, const RagConfig& cfg) {
    if (text::is_blank(question)) fail(ErrorCode::EmptyInput, "question is blank");
    const auto chunks = retrieve_context(question, index, provider, cfg);
    RagAnswer answer;
    answer.prompt_used = assemble_prompt(question, chunks, cfg.prompt_template);
    for (const auto& c : chunks) {
        if (answer.prompt_used.find(c.text) == std::string::npos) {
            throw std::logic_error("source " + c.chunk_id + " missing from prompt");
        }
        answer.sources.push_back({c.chunk_id, c.doc_id, c.score, c.text});
    }
    answer.answer_text = llm.complete(answer.prompt_used);
    return answer;
}

} // namespace semtext
