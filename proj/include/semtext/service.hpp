#pragma once

// Application operations over a loaded index. The HTTP server and the CLI both go
// through this class; every result is plain JSON.

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "semtext/analysis.hpp"
#include "semtext/config.hpp"
#include "semtext/error.hpp"
#include "semtext/index.hpp"
#include "semtext/ingest.hpp"
#include "semtext/providers.hpp"
#include "semtext/rag.hpp"
#include "semtext/rerank.hpp"
#include "semtext/tsne.hpp"

namespace semtext {

inline std::unique_ptr<RerankScorer> make_reranker(const RerankConfig& cfg, int timeout_ms) {
    if (cfg.kind == RerankKind::Http) return std::make_unique<HttpRerankScorer>(cfg.url, timeout_ms);
    return std::make_unique<LexicalOverlapScorer>();
}

/// One vector per document: the mean of its chunk vectors.
struct DocumentVectors {
    std::vector<std::string> doc_ids;
    std::vector<std::string> labels; ///< metadata "label", or empty
    std::vector<Embedding> vectors;
    std::vector<Metadata> metadata;
};

inline DocumentVectors document_vectors(const VectorIndex& index) {
    struct Acc {
        std::vector<double> sum;
        std::size_t count = 0;
        Metadata meta;
    };
    std::map<std::string, Acc> docs;
    std::string model;
    for (const auto& rec : index.records()) {
        const auto it = rec.metadata.find("doc_id");
        const std::string doc_id = it != rec.metadata.end() ? it->second : std::to_string(rec.item_id);
        Acc& acc = docs[doc_id];
        if (acc.sum.empty()) {
            acc.sum.assign(rec.vector.dim(), 0.0);
            acc.meta = rec.metadata;
        }
        for (std::size_t d = 0; d < acc.sum.size(); ++d) acc.sum[d] += rec.vector[d];
        ++acc.count;
        model = rec.vector.model_id();
    }
    DocumentVectors out;
    for (auto& [doc_id, acc] : docs) {
        for (double& v : acc.sum) v /= static_cast<double>(acc.count);
        out.doc_ids.push_back(doc_id);
        const auto label = acc.meta.find("label");
        out.labels.push_back(label != acc.meta.end() ? label->second : "");
        acc.meta.erase("text");
        acc.meta.erase("chunk_id");
        acc.meta.erase("char_start");
        acc.meta.erase("char_end");
        out.metadata.push_back(std::move(acc.meta));
        out.vectors.emplace_back(std::move(acc.sum), model);
    }
    return out;
}

inline nlohmann::json metadata_json(const Metadata& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : m) {
        if (k != "text") out[k] = v;
    }
    return out;
}

class Service {
public:
    explicit Service(AppConfig cfg)
        : cfg_(std::move(cfg)),
          provider_(make_provider(cfg_.provider)),
          llm_(make_llm(cfg_.rag.llm)),
          reranker_(make_reranker(cfg_.rerank, cfg_.provider.timeout_ms)),
          index_(cfg_.hnsw) {
        if (std::filesystem::exists(cfg_.index_path)) index_ = VectorIndex::load(cfg_.index_path, cfg_.hnsw);
        ready_ = true;
    }

    /// For tests: inject the collaborators instead of building them from config.
    Service(AppConfig cfg, std::unique_ptr<EmbeddingProvider> provider, std::unique_ptr<LlmClient> llm)
        : cfg_(std::move(cfg)),
          provider_(std::move(provider)),
          llm_(std::move(llm)),
          reranker_(make_reranker(cfg_.rerank, cfg_.provider.timeout_ms)),
          index_(cfg_.hnsw) {
        if (std::filesystem::exists(cfg_.index_path)) index_ = VectorIndex::load(cfg_.index_path, cfg_.hnsw);
        ready_ = true;
    }

    const AppConfig& config() const noexcept { return cfg_; }
    bool ready() const noexcept { return ready_.load(); }
    bool reindexing() const noexcept { return reindexing_.load(); }

    std::size_t size() const {
        auto lock = read_lock();
        return index_.size();
    }

    nlohmann::json health() const {
        return {{"status", ready() ? "ok" : "starting"},
                {"reindexing", reindexing()},
                {"records", ready() && !reindexing() ? size() : 0},
                {"model_id", provider_->model_id()}};
    }

    /// Upserts a JSONL corpus, persists the index and swaps it in. Readers are
    /// rejected with Busy until the swap is done.
    IngestReport ingest(const std::filesystem::path& corpus) {
        if (reindexing_.exchange(true)) fail(ErrorCode::Busy, "a reindex is already running");
        struct Reset {
            std::atomic<bool>& flag;
            ~Reset() { flag = false; }
        } reset{reindexing_};
        std::unique_lock lock(mutex_);
        CorpusFile file = read_corpus(cfg_.resolve(corpus));
        IngestReport report;
        report.skipped = std::move(file.skipped);
        VectorIndex fresh = build_index(file.records, cfg_, *provider_, &index_, report);
        if (cfg_.index_path.has_parent_path()) {
            std::error_code ec;
            std::filesystem::create_directories(cfg_.index_path.parent_path(), ec);
        }
        fresh.save(cfg_.index_path);
        index_ = std::move(fresh);
        return report;
    }

    IngestReport ingest() {
        if (!cfg_.corpus_path) fail(ErrorCode::InvalidArgument, "no corpus path given and none configured");
        return ingest(*cfg_.corpus_path);
    }

    /// Ranked chunks with raw cosine scores and their percentage display. With
    /// `rerank` a wider pool is retrieved and re-scored; `score` stays the cosine.
    nlohmann::json search(const std::string& query, std::size_t top_n, bool rerank_results = false) {
        if (text::is_blank(query)) fail(ErrorCode::EmptyInput, "query is blank");
        if (top_n == 0) fail(ErrorCode::InvalidArgument, "top_n must be positive");
        auto lock = read_lock();
        if (index_.empty()) fail(ErrorCode::NotFound, "index is empty; ingest a corpus first");
        require_same_model(index_, *provider_);
        const Embedding q = provider_->embed_one(query);
        const std::size_t pool = rerank_results ? std::max(top_n, cfg_.rerank.pool) : top_n;
        const auto hits = search_index(index_, q, pool, cfg_.hnsw_threshold);

        std::vector<RerankCandidate> ordered;
        for (std::size_t i = 0; i < hits.size(); ++i) {
            ordered.push_back({hits[i].item_id, to_retrieved(index_, hits[i]).text, hits[i].score, i + 1, 0.0});
        }
        if (rerank_results && !ordered.empty()) {
            ordered = rerank(query, std::move(ordered), *reranker_, std::min(top_n, ordered.size()));
        }
        nlohmann::json results = nlohmann::json::array();
        for (std::size_t i = 0; i < ordered.size() && i < top_n; ++i) {
            const auto& c = ordered[i];
            const auto rec = index_.get(c.item_id);
            const Metadata meta = rec ? rec->metadata : Metadata{};
            nlohmann::json r = {
                {"rank", i + 1},
                {"item_id", std::to_string(c.item_id)},
                {"doc_id", meta.contains("doc_id") ? meta.at("doc_id") : ""},
                {"chunk_id", meta.contains("chunk_id") ? meta.at("chunk_id") : ""},
                {"score", c.retrieval_score},
                {"display", format_percentage(c.retrieval_score)},
                {"excerpt", c.text},
                {"metadata", metadata_json(meta)},
            };
            if (rerank_results) {
                r["rerank_score"] = c.rerank_score;
                r["retrieval_rank"] = c.retrieval_rank;
            }
            results.push_back(std::move(r));
        }
        return results;
    }

    nlohmann::json classify(const std::string& doc_text, const std::filesystem::path& categories_file) {
        if (text::is_blank(doc_text)) fail(ErrorCode::EmptyInput, "text is blank");
        const auto specs = load_categories(cfg_.resolve(categories_file));
        const auto categories = embed_categories(specs, *provider_);
        const auto result = best_fit_classify(provider_->embed_one(doc_text), categories);
        nlohmann::json ranking = nlohmann::json::array();
        for (const auto& s : result.ranking) {
            ranking.push_back({{"category_id", s.category_id},
                               {"score", s.score},
                               {"display", format_percentage(s.score)},
                               {"cohen", interpret(s.score, BandScale::Cohen)},
                               {"practice", interpret(s.score, BandScale::Practice)}});
        }
        return {{"category_id", result.category_id},
                {"score", result.score},
                {"display", format_percentage(result.score)},
                {"margin", result.margin},
                {"runner_up", result.runner_up ? nlohmann::json(*result.runner_up) : nlohmann::json(nullptr)},
                {"tie", result.tie},
                {"ranking", ranking}};
    }

    /// k-means over document vectors, with the five members nearest each centroid.
    nlohmann::json cluster(std::size_t k, std::uint64_t seed) {
        auto lock = read_lock();
        const DocumentVectors docs = document_vectors(index_);
        if (docs.vectors.empty()) fail(ErrorCode::NotFound, "index is empty; ingest a corpus first");
        KMeansOptions opts;
        opts.k = k;
        opts.seed = seed;
        const KMeansResult result = kmeans_cluster(docs.vectors, opts);
        const auto exemplars = label_clusters(result, docs.doc_ids);
        std::vector<std::size_t> sizes(result.centroids.size(), 0);
        nlohmann::json assignments = nlohmann::json::array();
        for (const auto& a : result.assignments) {
            ++sizes[a.cluster];
            assignments.push_back({{"doc_id", docs.doc_ids[a.index]},
                                   {"cluster", a.cluster},
                                   {"distance", a.distance_to_centroid}});
        }
        nlohmann::json clusters = nlohmann::json::array();
        for (std::size_t c = 0; c < exemplars.size(); ++c) {
            nlohmann::json ex = nlohmann::json::array();
            for (const auto& e : exemplars[c]) ex.push_back({{"doc_id", e.item_id}, {"distance", e.distance}});
            clusters.push_back({{"cluster", c}, {"size", sizes[c]}, {"exemplars", ex}});
        }
        return {{"k", k}, {"seed", seed}, {"inertia", result.inertia}, {"clusters", clusters},
                {"assignments", assignments}};
    }

    TsneLayout tsne_layout(double perplexity, std::uint64_t seed) {
        auto lock = read_lock();
        const DocumentVectors docs = document_vectors(index_);
        if (docs.vectors.empty()) fail(ErrorCode::NotFound, "index is empty; ingest a corpus first");
        TsneConfig tc;
        tc.perplexity = perplexity;
        tc.seed = seed;
        TsneLayout layout = tsne_embed(docs.vectors, tc);
        layout.labels = docs.labels;
        layout.item_ids = docs.doc_ids;
        return layout;
    }

    nlohmann::json tsne(double perplexity, std::uint64_t seed) {
        const TsneLayout layout = tsne_layout(perplexity, seed);
        return {{"perplexity", layout.perplexity},
                {"points", nlohmann::json::parse(layout_to_json(layout))},
                {"final_kl", layout.kl_trace.empty() ? 0.0 : layout.kl_trace.back()}};
    }

    RagAnswer answer(const std::string& question, std::optional<std::size_t> top_k = std::nullopt) {
        RagConfig rc = cfg_.rag;
        if (top_k) rc.top_k = *top_k;
        auto lock = read_lock();
        return ask(question, index_, *provider_, *llm_, rc);
    }

    nlohmann::json ask_json(const std::string& question, std::optional<std::size_t> top_k = std::nullopt) {
        const RagAnswer a = answer(question, top_k);
        nlohmann::json sources = nlohmann::json::array();
        for (const auto& s : a.sources) {
            sources.push_back({{"doc_id", s.doc_id},
                               {"chunk_id", s.chunk_id},
                               {"score", s.score},
                               {"display", format_percentage(s.score)},
                               {"excerpt", s.excerpt}});
        }
        return {{"answer", a.answer_text}, {"sources", sources}, {"prompt_used", a.prompt_used}};
    }

private:
    std::shared_lock<std::shared_mutex> read_lock() const {
        if (!ready_) fail(ErrorCode::Busy, "service is starting");
        if (reindexing_) fail(ErrorCode::Busy, "reindex in progress");
        return std::shared_lock<std::shared_mutex>(mutex_);
    }

    AppConfig cfg_;
    std::unique_ptr<EmbeddingProvider> provider_;
    std::unique_ptr<LlmClient> llm_;
    std::unique_ptr<RerankScorer> reranker_;
    mutable std::shared_mutex mutex_;
    VectorIndex index_;
    std::atomic<bool> ready_{false};
    std::atomic<bool> reindexing_{false};
};

} // namespace semtext
