#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/providers.hpp"
#include "semtext/random.hpp"
#include "semtext/vector.hpp"

namespace semtext {

// ---------------------------------------------------------------------------
// Score interpretation
// ---------------------------------------------------------------------------

enum class BandScale { Cohen, Practice };

/// Cohen: [-1, 0.2) small, [0.2, 0.5) medium, [0.5, 1] large.
/// Practice: [-1, 0.60) low, [0.60, 0.80] moderate, (0.80, 1] very high.
inline std::string_view interpret(double score, BandScale scale) {
    if (!(score >= -1.0 - 1e-9 && score <= 1.0 + 1e-9)) {
        fail(ErrorCode::OutOfRange, "similarity score outside [-1, 1]");
    }
    if (scale == BandScale::Cohen) {
        if (score < 0.2) return "small";
        if (score < 0.5) return "medium";
        return "large";
    }
    if (score > 0.80) return "very high";
    if (score >= 0.60) return "moderate";
    return "low";
}

// ---------------------------------------------------------------------------
// Ranking and best-fit classification
// ---------------------------------------------------------------------------

struct RankedText {
    std::string text;
    double score = 0.0;
    std::size_t input_index = 0;
};

/// Candidates ordered by descending cosine to `base`; equal scores keep input order.
inline std::vector<RankedText> rank_by_similarity(const std::string& base, const std::vector<std::string>& candidates,
                                                  EmbeddingProvider& provider) {
    if (candidates.empty()) fail(ErrorCode::EmptyInput, "need at least one candidate");
    std::vector<std::string> all{base};
    all.insert(all.end(), candidates.begin(), candidates.end());
    const std::vector<Embedding> vecs = provider.embed(all);
    std::vector<RankedText> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        out.push_back({candidates[i], cosine_similarity(vecs[0], vecs[i + 1]), i});
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
}

struct Category {
    std::string category_id;
    std::string description;
    Embedding centroid;
};

struct CategoryScore {
    std::string category_id;
    double score = 0.0;
};

struct Classification {
    std::string category_id;
    double score = 0.0;
    double margin = 0.0;                  ///< best minus runner-up, 0 with one category
    std::optional<std::string> runner_up;
    bool tie = false;                     ///< best and runner-up scores are exactly equal
    std::vector<CategoryScore> ranking;   ///< every category, best first
};

/// Argmax-cosine category; exact ties go to the smaller category id.
inline Classification best_fit_classify(const Embedding& doc, std::span<const Category> categories) {
    if (categories.empty()) fail(ErrorCode::EmptyInput, "need at least one category");
    Classification out;
    for (const auto& c : categories) {
        out.ranking.push_back({c.category_id, cosine_similarity(doc, c.centroid)});
    }
    std::sort(out.ranking.begin(), out.ranking.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.category_id < b.category_id;
    });
    out.category_id = out.ranking[0].category_id;
    out.score = out.ranking[0].score;
    if (out.ranking.size() > 1) {
        out.runner_up = out.ranking[1].category_id;
        out.margin = out.ranking[0].score - out.ranking[1].score;
        out.tie = out.ranking[0].score == out.ranking[1].score;
    }
    return out;
}

struct CategorySpec {
    std::string id;
    std::string description;
    std::vector<std::string> exemplars; // optional; when present the centroid is their mean embedding
};

/// Reads `[{"id", "description", "exemplars"?: [...]}, ...]`.
inline std::vector<CategorySpec> parse_categories(const nlohmann::json& doc) {
    if (!doc.is_array() || doc.empty()) fail(ErrorCode::InvalidArgument, "categories must be a nonempty JSON array");
    std::vector<CategorySpec> out;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("id") || !item["id"].is_string() || !item.contains("description") ||
            !item["description"].is_string()) {
            fail(ErrorCode::InvalidArgument, "each category needs string fields id and description");
        }
        CategorySpec spec{item["id"].get<std::string>(), item["description"].get<std::string>(), {}};
        if (item.contains("exemplars")) {
            for (const auto& e : item["exemplars"]) {
                if (!e.is_string()) fail(ErrorCode::InvalidArgument, "exemplars must be strings");
                spec.exemplars.push_back(e.get<std::string>());
            }
        }
        out.push_back(std::move(spec));
    }
    return out;
}

inline std::vector<CategorySpec> load_categories(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoFailure, "cannot open categories file " + path.string());
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) fail(ErrorCode::InvalidArgument, "categories file is not valid JSON");
    return parse_categories(doc);
}

inline std::vector<Category> embed_categories(const std::vector<CategorySpec>& specs, EmbeddingProvider& provider) {
    std::vector<Category> out;
    for (const auto& spec : specs) {
        if (spec.exemplars.empty()) {
            out.push_back({spec.id, spec.description, provider.embed_one(spec.description)});
            continue;
        }
        const auto vecs = provider.embed(spec.exemplars);
        std::vector<double> mean(provider.dim(), 0.0);
        for (const auto& v : vecs) {
            for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d];
        }
        for (double& m : mean) m /= static_cast<double>(vecs.size());
        out.push_back({spec.id, spec.description, Embedding(std::move(mean), provider.model_id())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

struct KMeansOptions {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    std::size_t restarts = 5;
    std::size_t max_iters = 100;
};

struct ClusterAssignment {
    std::size_t index = 0;   ///< position in the input
    std::size_t cluster = 0;
    double distance_to_centroid = 0.0;
};

struct KMeansResult {
    std::vector<ClusterAssignment> assignments;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::size_t best_restart = 0;
    std::vector<std::vector<double>> inertia_traces; ///< per restart, inertia after each Lloyd iteration
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

struct LloydRun {
    std::vector<std::size_t> labels;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::vector<double> trace;
};

inline std::vector<std::vector<double>> kmeans_plus_plus(const std::vector<std::vector<double>>& pts, std::size_t k,
                                                         std::mt19937_64& rng) {
    const std::size_t n = pts.size();
    std::vector<std::vector<double>> centers;
    std::vector<char> chosen(n, 0);
    auto pick = [&](std::size_t i) {
        centers.push_back(pts[i]);
        chosen[i] = 1;
    };
    pick(static_cast<std::size_t>(rng() % n));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(pts[i], centers.back()));
            total += d2[i];
        }
        std::size_t next = n;
        if (total > 0.0) {
            double target = open_unit_interval(rng) * total;
            for (std::size_t i = 0; i < n; ++i) {
                if (d2[i] <= 0.0) continue;
                next = i;
                target -= d2[i];
                if (target <= 0.0) break;
            }
        }
        if (next == n) {
            // Remaining points coincide with chosen centers; take the first unused one.
            next = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
        }
        pick(next);
    }
    return centers;
}

inline LloydRun lloyd(const std::vector<std::vector<double>>& pts, std::vector<std::vector<double>> centers,
                      std::size_t max_iters) {
    const std::size_t n = pts.size();
    const std::size_t k = centers.size();
    const std::size_t dim = pts.front().size();
    LloydRun run;
    run.labels.assign(n, k); // k marks "unassigned"
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = run.labels[i] < k ? run.labels[i] : 0;
            double best_d = squared_distance(pts[i], centers[best]);
            for (std::size_t c = 0; c < k; ++c) {
                const double d = squared_distance(pts[i], centers[c]);
                if (d < best_d) { // strict: keep the current cluster on ties
                    best_d = d;
                    best = c;
                }
            }
            if (best != run.labels[i]) {
                run.labels[i] = best;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[run.labels[i]];
            for (std::size_t d = 0; d < dim; ++d) sums[run.labels[i]][d] += pts[i][d];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue; // empty cluster keeps its previous centroid
            for (std::size_t d = 0; d < dim; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(pts[i], centers[run.labels[i]]);
        run.trace.push_back(inertia);
    }
    run.centroids = std::move(centers);
    run.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) run.inertia += squared_distance(pts[i], run.centroids[run.labels[i]]);
    return run;
}

} // namespace detail

/// k-means++ seeded Lloyd iterations on unit-normalized vectors, best of `restarts`
/// by inertia (ties keep the earlier restart). Centroids are plain means.
inline KMeansResult kmeans_cluster(std::span<const Embedding> items, const KMeansOptions& opts) {
    const std::size_t n = items.size();
    if (opts.k == 0) fail(ErrorCode::InvalidArgument, "k must be at least 1");
    if (opts.k > n) fail(ErrorCode::KTooLarge, "k=" + std::to_string(opts.k) + " exceeds " + std::to_string(n) + " points");
    if (opts.restarts == 0 || opts.max_iters == 0) fail(ErrorCode::InvalidArgument, "restarts and max_iters must be positive");
    std::vector<std::vector<double>> pts;
    pts.reserve(n);
    for (const auto& e : items) {
        if (e.dim() != items.front().dim()) fail(ErrorCode::DimensionMismatch, "all embeddings must share a dimension");
        const Embedding u = normalize(e);
        pts.emplace_back(u.values().begin(), u.values().end());
    }

    KMeansResult result;
    std::mt19937_64 rng(opts.seed);
    std::optional<detail::LloydRun> best;
    for (std::size_t r = 0; r < opts.restarts; ++r) {
        auto run = detail::lloyd(pts, detail::kmeans_plus_plus(pts, opts.k, rng), opts.max_iters);
        result.inertia_traces.push_back(run.trace);
        if (!best || run.inertia < best->inertia) {
            best = std::move(run);
            result.best_restart = r;
        }
    }
    result.centroids = std::move(best->centroids);
    result.inertia = best->inertia;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = best->labels[i];
        result.assignments.push_back({i, c, std::sqrt(detail::squared_distance(pts[i], result.centroids[c]))});
    }
    return result;
}

struct Exemplar {
    std::string item_id;
    double distance = 0.0;
};

/// The `m` members nearest each centroid (ascending distance, ties by item id).
inline std::vector<std::vector<Exemplar>> label_clusters(const KMeansResult& clustering,
                                                         std::span<const std::string> item_ids, std::size_t m = 5) {
    if (item_ids.size() != clustering.assignments.size()) {
        fail(ErrorCode::InvalidArgument, "one item id per clustered point is required");
    }
    std::vector<std::vector<Exemplar>> out(clustering.centroids.size());
    for (const auto& a : clustering.assignments) {
        out[a.cluster].push_back({item_ids[a.index], a.distance_to_centroid});
    }
    for (auto& list : out) {
        std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.item_id < b.item_id;
        });
        if (list.size() > m) list.resize(m);
    }
    return out;
}

} // namespace semtext
