#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/fnv.hpp"
#include "semtext/net.hpp"
#include "semtext/text.hpp"
#include "semtext/vector.hpp"

namespace semtext {

enum class ProviderKind { Hash, Http };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Hash;
    std::string model_id = "hash-v1-256";
    std::size_t dim = 256;
    std::string endpoint_url;
    std::string api_key_env; ///< name of the variable holding the key, never the key itself
    std::size_t batch_size = 32;
    std::size_t max_parallel = 4;
    int timeout_ms = 30000;
    int retries = 2;
    int retry_backoff_ms = 200;

    void validate() const {
        if (dim == 0) fail(ErrorCode::InvalidArgument, "provider dim must be positive");
        if (batch_size == 0) fail(ErrorCode::InvalidArgument, "batch_size must be positive");
        if (max_parallel == 0) fail(ErrorCode::InvalidArgument, "max_parallel must be positive");
        if (timeout_ms <= 0) fail(ErrorCode::InvalidArgument, "timeout_ms must be positive");
        if (retries < 0) fail(ErrorCode::InvalidArgument, "retries must be nonnegative");
        if (kind == ProviderKind::Http && endpoint_url.empty()) {
            fail(ErrorCode::InvalidArgument, "http provider needs endpoint_url");
        }
    }
};

inline std::string hash_model_id(std::size_t dim) { return "hash-v1-" + std::to_string(dim); }

/// Rejects empty requests and texts that are blank after trimming.
inline void validate_texts(std::span<const std::string> texts) {
    if (texts.empty()) {
        fail(ErrorCode::EmptyInput, "embed request has no texts");
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (text::is_blank(texts[i])) {
            fail(ErrorCode::EmptyInput, "text at index " + std::to_string(i) + " is blank");
        }
    }
}

/// Deterministic feature-hashing embedder.
///
/// Features are the lowercased letter/digit tokens plus every adjacent token
/// bigram joined by one space. Each feature adds +1 or -1 (sign from the top bit
/// of its FNV-1a hash) at `hash % dim`; the result is L2-normalized. The output
/// depends only on the input bytes, so it is stable across runs and platforms.
inline Embedding hash_embed(std::string_view text, std::size_t dim = 256) {
    if (dim == 0) fail(ErrorCode::InvalidArgument, "dim must be positive");
    const std::vector<std::string> tokens = text::alnum_tokens(text);
    if (tokens.empty()) {
        fail(ErrorCode::EmptyInput, "text has no tokens");
    }
    std::vector<double> acc(dim, 0.0);
    const auto add_feature = [&](std::uint64_t h) {
        const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
        acc[h % dim] += sign;
    };
    for (const std::string& tok : tokens) {
        add_feature(fnv1a64(tok));
    }
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        add_feature(Fnv1a64{}.update(tokens[i]).update_byte(' ').update(tokens[i + 1]).digest());
    }
    // 2t-1 features for t tokens: an odd count of ±1 terms can never cancel to zero.
    const Embedding raw(std::move(acc), hash_model_id(dim));
    return normalize(raw);
}

/// Source of embeddings for a fixed model.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual const std::string& model_id() const = 0;
    virtual std::size_t dim() const = 0;

    /// One embedding per text, in input order.
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;

    Embedding embed_one(const std::string& text) {
        auto out = embed(std::span<const std::string>(&text, 1));
        return std::move(out.front());
    }
};

class HashProvider final : public EmbeddingProvider {
public:
    explicit HashProvider(std::size_t dim = 256) : dim_(dim), model_id_(hash_model_id(dim)) {
        if (dim == 0) fail(ErrorCode::InvalidArgument, "dim must be positive");
    }

    const std::string& model_id() const override { return model_id_; }
    std::size_t dim() const override { return dim_; }

    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        validate_texts(texts);
        std::vector<Embedding> out;
        out.reserve(texts.size());
        for (const std::string& t : texts) {
            out.push_back(hash_embed(t, dim_));
        }
        return out;
    }

private:
    std::size_t dim_;
    std::string model_id_;
};

/// Client for the common `{"model", "input"} -> {"data": [{"index", "embedding"}]}` shape.
///
/// Requests larger than `batch_size` are split; up to `max_parallel` batches are in
/// flight at once. Each batch is retried `retries` times before the call fails
/// with ProviderUnavailable.
class HttpProvider final : public EmbeddingProvider {
public:
    explicit HttpProvider(ProviderConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.kind = ProviderKind::Http;
        cfg_.validate();
    }

    const std::string& model_id() const override { return cfg_.model_id; }
    std::size_t dim() const override { return cfg_.dim; }

    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        validate_texts(texts);
        std::vector<std::pair<std::string, std::string>> headers;
        if (!cfg_.api_key_env.empty()) {
            const char* key = std::getenv(cfg_.api_key_env.c_str());
            if (key == nullptr || *key == '\0') {
                fail(ErrorCode::ProviderUnavailable, "credential variable " + cfg_.api_key_env + " is not set");
            }
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }

        const std::size_t n = texts.size();
        const std::size_t batches = (n + cfg_.batch_size - 1) / cfg_.batch_size;
        std::vector<std::vector<Embedding>> parts(batches);
        for (std::size_t wave = 0; wave < batches; wave += cfg_.max_parallel) {
            const std::size_t wave_end = std::min(batches, wave + cfg_.max_parallel);
            std::vector<std::future<std::vector<Embedding>>> inflight;
            for (std::size_t b = wave; b < wave_end; ++b) {
                const std::size_t lo = b * cfg_.batch_size;
                const std::size_t hi = std::min(n, lo + cfg_.batch_size);
                inflight.push_back(std::async(std::launch::async, [this, texts, lo, hi, &headers] {
                    return request_batch(texts.subspan(lo, hi - lo), headers);
                }));
            }
            // get() on every future before rethrowing so no task outlives `headers`.
            std::exception_ptr first_error;
            for (std::size_t i = 0; i < inflight.size(); ++i) {
                try {
                    parts[wave + i] = inflight[i].get();
                } catch (...) {
                    if (!first_error) first_error = std::current_exception();
                }
            }
            if (first_error) std::rethrow_exception(first_error);
        }

        std::vector<Embedding> out;
        out.reserve(n);
        for (auto& part : parts) {
            for (auto& e : part) out.push_back(std::move(e));
        }
        return out;
    }

private:
    std::vector<Embedding> request_batch(std::span<const std::string> texts,
                                         const std::vector<std::pair<std::string, std::string>>& headers) const {
        nlohmann::json body = {{"model", cfg_.model_id}, {"input", texts}};
        const std::string payload = body.dump();
        std::string last_problem = "no attempt made";
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) net::backoff(attempt - 1, cfg_.retry_backoff_ms);
            const auto res = net::post_json(cfg_.endpoint_url, payload, headers, cfg_.timeout_ms);
            if (!res) {
                last_problem = "transport failure";
                continue;
            }
            if (!res->ok()) {
                last_problem = "status " + std::to_string(res->status);
                continue;
            }
            auto parsed = parse_response(res->body, texts.size());
            if (!parsed) {
                last_problem = "malformed response body";
                continue;
            }
            return std::move(*parsed);
        }
        fail(ErrorCode::ProviderUnavailable,
             cfg_.endpoint_url + " failed after " + std::to_string(cfg_.retries + 1) + " attempts (" +
                 last_problem + ")");
    }

    // nullopt for a malformed body; DimensionDrift is raised directly.
    std::optional<std::vector<Embedding>> parse_response(const std::string& body, std::size_t expected) const {
        const auto doc = nlohmann::json::parse(body, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
            return std::nullopt;
        }
        const auto& data = doc["data"];
        if (data.size() != expected) return std::nullopt;
        std::vector<std::optional<Embedding>> slots(expected);
        for (const auto& item : data) {
            if (!item.is_object() || !item.contains("index") || !item["index"].is_number_integer() ||
                !item.contains("embedding") || !item["embedding"].is_array()) {
                return std::nullopt;
            }
            const auto idx = item["index"].get<long long>();
            if (idx < 0 || static_cast<std::size_t>(idx) >= expected || slots[static_cast<std::size_t>(idx)]) {
                return std::nullopt;
            }
            std::vector<double> values;
            values.reserve(item["embedding"].size());
            for (const auto& v : item["embedding"]) {
                if (!v.is_number()) return std::nullopt;
                values.push_back(v.get<double>());
            }
            if (values.size() != cfg_.dim) {
                fail(ErrorCode::DimensionDrift, "expected dim " + std::to_string(cfg_.dim) + ", provider returned " +
                                                    std::to_string(values.size()));
            }
            try {
                slots[static_cast<std::size_t>(idx)] = Embedding(std::move(values), cfg_.model_id);
            } catch (const Error&) {
                return std::nullopt; // non-finite values
            }
        }
        std::vector<Embedding> out;
        out.reserve(expected);
        for (auto& s : slots) out.push_back(std::move(*s));
        return out;
    }

    ProviderConfig cfg_;
};

inline std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& cfg) {
    cfg.validate();
    if (cfg.kind == ProviderKind::Hash) {
        return std::make_unique<HashProvider>(cfg.dim);
    }
    return std::make_unique<HttpProvider>(cfg);
}

/// One-shot embedding of a request with the provider described by `cfg`.
inline std::vector<Embedding> embed_batch(const ProviderConfig& cfg, std::span<const std::string> texts) {
    return make_provider(cfg)->embed(texts);
}

/// On-disk embedding cache, one file per (model, text) key.
///
/// File layout: "SEMC", u8 version 1, u32 dim, f32[dim] little-endian, then the
/// u64 FNV-1a of the value bytes. Unreadable or mismatching records count as
/// misses and are overwritten on the next store.
class EmbedCache {
public:
    explicit EmbedCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) fail(ErrorCode::IoFailure, "cannot create cache directory " + dir_.string());
    }

    static std::string key(std::string_view model_id, std::string_view text) {
        return to_hex(fnv1a64_joined(model_id, text));
    }

    std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".semc"); }
    const std::filesystem::path& dir() const noexcept { return dir_; }

    std::optional<std::vector<float>> load(const std::string& key, std::size_t dim) const {
        std::ifstream in(path_for(key), std::ios::binary);
        if (!in) return std::nullopt;
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        auto decoded = decode(bytes, dim);
        if (!decoded) corrupt_.fetch_add(1, std::memory_order_relaxed);
        return decoded;
    }

    void store(const std::string& key, std::span<const float> values) const {
        const std::string bytes = encode(values);
        const auto final_path = path_for(key);
        auto tmp = final_path;
        tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) fail(ErrorCode::IoFailure, "cannot write cache record " + tmp.string());
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out) fail(ErrorCode::IoFailure, "short write to " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, final_path, ec);
        if (ec) fail(ErrorCode::IoFailure, "cannot publish cache record " + final_path.string());
    }

    void clear() const {
        std::error_code ec;
        for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
            if (entry.path().extension() == ".semc") std::filesystem::remove(entry.path(), ec);
        }
    }

    std::size_t corrupt_records_seen() const noexcept { return corrupt_.load(); }

    static std::string encode(std::span<const float> values) {
        std::string out = "SEMC";
        out.push_back(static_cast<char>(1));
        put_le(out, static_cast<std::uint32_t>(values.size()), 4);
        Fnv1a64 sum;
        for (float v : values) {
            const auto bits = std::bit_cast<std::uint32_t>(v);
            const std::size_t at = out.size();
            put_le(out, bits, 4);
            sum.update(std::string_view(out).substr(at, 4));
        }
        put_le(out, sum.digest(), 8);
        return out;
    }

    static std::optional<std::vector<float>> decode(std::string_view bytes, std::size_t dim) {
        constexpr std::size_t header = 4 + 1 + 4;
        if (bytes.size() < header || bytes.substr(0, 4) != "SEMC" || bytes[4] != 1) return std::nullopt;
        const auto stored_dim = static_cast<std::size_t>(get_le(bytes, 5, 4));
        if (stored_dim != dim || bytes.size() != header + 4 * dim + 8) return std::nullopt;
        const std::string_view value_bytes = bytes.substr(header, 4 * dim);
        if (fnv1a64(value_bytes) != get_le(bytes, header + 4 * dim, 8)) return std::nullopt;
        std::vector<float> values(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, header + 4 * i, 4)));
            if (!std::isfinite(values[i])) return std::nullopt;
        }
        return values;
    }

private:
    static void put_le(std::string& out, std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }

    static std::uint64_t get_le(std::string_view in, std::size_t at, int width) {
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
        }
        return v;
    }

    std::filesystem::path dir_;
    mutable std::atomic<std::size_t> corrupt_{0};
};

namespace detail {

inline Embedding from_f32(std::span<const float> values, const std::string& model_id) {
    return Embedding(std::vector<double>(values.begin(), values.end()), model_id);
}

} // namespace detail

/// Embeds through the cache. Hits never reach the provider; all misses go out in a
/// single provider call and are persisted. Both paths return the stored f32
/// precision, so a hit and a miss for the same text are bit-identical.
inline std::vector<Embedding> cached_embed(EmbeddingProvider& provider, const EmbedCache& cache,
                                           std::span<const std::string> texts) {
    validate_texts(texts);
    const std::size_t dim = provider.dim();
    std::vector<std::optional<Embedding>> out(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::string> miss_texts;
    std::unordered_map<std::string, std::size_t> miss_slot; // key -> position in miss_texts
    for (std::size_t i = 0; i < texts.size(); ++i) {
        keys[i] = EmbedCache::key(provider.model_id(), texts[i]);
        if (auto hit = cache.load(keys[i], dim)) {
            out[i] = detail::from_f32(*hit, provider.model_id());
        } else if (!miss_slot.contains(keys[i])) {
            miss_slot.emplace(keys[i], miss_texts.size());
            miss_texts.push_back(texts[i]);
        }
    }
    if (!miss_texts.empty()) {
        const std::vector<Embedding> fresh = provider.embed(miss_texts);
        if (fresh.size() != miss_texts.size()) {
            fail(ErrorCode::ProviderUnavailable, "provider returned a different number of embeddings");
        }
        std::vector<std::vector<float>> narrowed(fresh.size());
        for (std::size_t m = 0; m < fresh.size(); ++m) {
            if (fresh[m].dim() != dim) {
                fail(ErrorCode::DimensionDrift, "provider returned dim " + std::to_string(fresh[m].dim()));
            }
            narrowed[m].assign(fresh[m].values().begin(), fresh[m].values().end());
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (out[i]) continue;
            const std::size_t m = miss_slot.at(keys[i]);
            out[i] = detail::from_f32(narrowed[m], provider.model_id());
        }
        for (const auto& [key, m] : miss_slot) {
            cache.store(key, narrowed[m]);
        }
    }
    std::vector<Embedding> result;
    result.reserve(out.size());
    for (auto& e : out) result.push_back(std::move(*e));
    return result;
}

} // namespace semtext
