#pragma once

// Application configuration, read from TOML:
//
//   [provider]  kind = "hash" | "http", model_id, dim, endpoint_url, api_key_env,
//               batch_size, max_parallel, timeout_ms, retries, cache_dir
//   [chunking]  strategy = "recursive" | "sliding", max_tokens, overlap_tokens,
//               separators = [...], noise_patterns = [...], default_noise = true
//   [index]     path, hnsw_threshold, M, ef_construction, ef_search, seed
//   [rerank]    kind = "lexical" | "http", url, pool
//   [rag]       top_k, min_score, prompt_template
//   [rag.llm]   kind = "mock" | "http", endpoint_url, model_id, api_key_env, timeout_ms
//   [server]    bind, port
//   [corpus]    path
//
// Relative paths are resolved against the directory of the config file. Credentials
// are never read from this file; `api_key_env` names the environment variable.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <toml.hpp>

#include "semtext/chunking.hpp"
#include "semtext/error.hpp"
#include "semtext/index.hpp"
#include "semtext/providers.hpp"
#include "semtext/rag.hpp"

namespace semtext {

enum class RerankKind { Lexical, Http };

struct RerankConfig {
    RerankKind kind = RerankKind::Lexical;
    std::string url;
    std::size_t pool = 50; ///< candidates retrieved before reranking
};

struct ServerConfig {
    std::string bind = "127.0.0.1";
    int port = 8080;
};

struct AppConfig {
    ProviderConfig provider;
    std::optional<std::filesystem::path> cache_dir;
    ChunkPolicy chunk_policy;
    bool default_noise = true;
    std::vector<std::string> noise_patterns;
    std::filesystem::path index_path = "semtext.index";
    std::size_t hnsw_threshold = 50000;
    HnswParams hnsw;
    RerankConfig rerank;
    RagConfig rag;
    ServerConfig server;
    std::optional<std::filesystem::path> corpus_path;
    std::filesystem::path base_dir = "."; ///< directory of the config file

    std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : base_dir / p; }

    std::vector<NoiseRule> noise_rules() const {
        std::vector<NoiseRule> rules = default_noise ? default_noise_rules() : std::vector<NoiseRule>{};
        for (std::size_t i = 0; i < noise_patterns.size(); ++i) {
            rules.push_back(NoiseRule::pattern("user-" + std::to_string(i), noise_patterns[i]));
        }
        return rules;
    }

    void validate() const {
        provider.validate();
        chunk_policy.validate();
        hnsw.validate();
        rag.validate();
        if (rerank.kind == RerankKind::Http && rerank.url.empty()) {
            fail(ErrorCode::InvalidArgument, "http reranker needs a url");
        }
        if (server.port <= 0 || server.port > 65535) fail(ErrorCode::InvalidArgument, "server port out of range");
        (void)noise_rules(); // compiles user patterns
    }
};

namespace detail {

template <class T>
T get_or(const toml::node_view<const toml::node>& node, T fallback) {
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = node.value<std::string>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = node.value<bool>()) return *v;
    } else if constexpr (std::is_floating_point_v<T>) {
        if (auto v = node.value<double>()) return static_cast<T>(*v);
    } else {
        if (auto v = node.value<std::int64_t>()) {
            if (*v < 0) fail(ErrorCode::InvalidArgument, "config value must be nonnegative");
            return static_cast<T>(*v);
        }
    }
    fail(ErrorCode::InvalidArgument, "config value has the wrong type");
}

inline std::vector<std::string> string_list(const toml::node_view<const toml::node>& node,
                                            std::vector<std::string> fallback) {
    if (!node) return fallback;
    const auto* arr = node.as_array();
    if (arr == nullptr) fail(ErrorCode::InvalidArgument, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& el : *arr) {
        auto v = el.value<std::string>();
        if (!v) fail(ErrorCode::InvalidArgument, "expected an array of strings");
        out.push_back(*v);
    }
    return out;
}

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace detail

inline AppConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir = ".") {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        fail(ErrorCode::InvalidArgument, std::string("config: ") + std::string(e.description()));
    }
    const toml::table& t = root;
    AppConfig cfg;
    cfg.base_dir = base_dir;
    using detail::get_or;

    const auto prov = t["provider"];
    const std::string kind = get_or<std::string>(prov["kind"], "hash");
    if (kind == "hash") {
        cfg.provider.kind = ProviderKind::Hash;
    } else if (kind == "http") {
        cfg.provider.kind = ProviderKind::Http;
    } else {
        fail(ErrorCode::InvalidArgument, "provider.kind must be hash or http");
    }
    cfg.provider.dim = get_or<std::size_t>(prov["dim"], 256);
    cfg.provider.model_id = cfg.provider.kind == ProviderKind::Hash
                                ? hash_model_id(cfg.provider.dim)
                                : get_or<std::string>(prov["model_id"], "");
    if (cfg.provider.kind == ProviderKind::Http && cfg.provider.model_id.empty()) {
        fail(ErrorCode::InvalidArgument, "provider.model_id is required for http providers");
    }
    cfg.provider.endpoint_url = get_or<std::string>(prov["endpoint_url"], "");
    cfg.provider.api_key_env = get_or<std::string>(prov["api_key_env"], "");
    if (prov["api_key"]) {
        fail(ErrorCode::InvalidArgument, "put credentials in an environment variable and set provider.api_key_env");
    }
    cfg.provider.batch_size = get_or<std::size_t>(prov["batch_size"], 32);
    cfg.provider.max_parallel = get_or<std::size_t>(prov["max_parallel"], 4);
    cfg.provider.timeout_ms = get_or<int>(prov["timeout_ms"], 30000);
    cfg.provider.retries = get_or<int>(prov["retries"], 2);
    cfg.provider.retry_backoff_ms = get_or<int>(prov["retry_backoff_ms"], 200);
    if (prov["cache_dir"]) cfg.cache_dir = detail::resolve(base_dir, get_or<std::string>(prov["cache_dir"], ""));

    const auto chunk = t["chunking"];
    const std::string strategy = get_or<std::string>(chunk["strategy"], "recursive");
    if (strategy == "recursive") {
        cfg.chunk_policy.strategy = ChunkStrategy::Recursive;
    } else if (strategy == "sliding") {
        cfg.chunk_policy.strategy = ChunkStrategy::Sliding;
    } else {
        fail(ErrorCode::InvalidArgument, "chunking.strategy must be recursive or sliding");
    }
    cfg.chunk_policy.max_tokens = get_or<std::size_t>(chunk["max_tokens"], 256);
    cfg.chunk_policy.overlap_tokens = get_or<std::size_t>(chunk["overlap_tokens"], 32);
    cfg.chunk_policy.separators = detail::string_list(chunk["separators"], cfg.chunk_policy.separators);
    cfg.noise_patterns = detail::string_list(chunk["noise_patterns"], {});
    cfg.default_noise = get_or<bool>(chunk["default_noise"], true);

    const auto idx = t["index"];
    cfg.index_path = detail::resolve(base_dir, get_or<std::string>(idx["path"], "semtext.index"));
    cfg.hnsw_threshold = get_or<std::size_t>(idx["hnsw_threshold"], 50000);
    cfg.hnsw.M = get_or<std::size_t>(idx["M"], 16);
    cfg.hnsw.ef_construction = get_or<std::size_t>(idx["ef_construction"], 200);
    cfg.hnsw.ef_search = get_or<std::size_t>(idx["ef_search"], 100);
    cfg.hnsw.seed = get_or<std::uint64_t>(idx["seed"], 0x5eed);

    const auto rr = t["rerank"];
    const std::string rr_kind = get_or<std::string>(rr["kind"], "lexical");
    if (rr_kind == "lexical") {
        cfg.rerank.kind = RerankKind::Lexical;
    } else if (rr_kind == "http") {
        cfg.rerank.kind = RerankKind::Http;
    } else {
        fail(ErrorCode::InvalidArgument, "rerank.kind must be lexical or http");
    }
    cfg.rerank.url = get_or<std::string>(rr["url"], "");
    cfg.rerank.pool = get_or<std::size_t>(rr["pool"], 50);

    const auto rag = t["rag"];
    cfg.rag.top_k = get_or<std::size_t>(rag["top_k"], 4);
    cfg.rag.min_score = get_or<double>(rag["min_score"], 0.3);
    cfg.rag.prompt_template = get_or<std::string>(rag["prompt_template"], std::string(kDefaultPromptTemplate));
    cfg.rag.hnsw_threshold = cfg.hnsw_threshold;
    const auto llm = rag["llm"];
    const std::string llm_kind = get_or<std::string>(llm["kind"], "mock");
    if (llm_kind == "mock") {
        cfg.rag.llm.kind = LlmKind::Mock;
    } else if (llm_kind == "http") {
        cfg.rag.llm.kind = LlmKind::Http;
    } else {
        fail(ErrorCode::InvalidArgument, "rag.llm.kind must be mock or http");
    }
    cfg.rag.llm.endpoint_url = get_or<std::string>(llm["endpoint_url"], "");
    cfg.rag.llm.model_id = get_or<std::string>(llm["model_id"], "");
    cfg.rag.llm.api_key_env = get_or<std::string>(llm["api_key_env"], "");
    cfg.rag.llm.timeout_ms = get_or<int>(llm["timeout_ms"], 60000);

    const auto srv = t["server"];
    cfg.server.bind = get_or<std::string>(srv["bind"], "127.0.0.1");
    cfg.server.port = get_or<int>(srv["port"], 8080);

    if (t["corpus"]["path"]) cfg.corpus_path = detail::resolve(base_dir, get_or<std::string>(t["corpus"]["path"], ""));

    cfg.validate();
    return cfg;
}

inline AppConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot read config " + path.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text, std::filesystem::absolute(path).parent_path());
}

} // namespace semtext
