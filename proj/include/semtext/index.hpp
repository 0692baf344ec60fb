#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semtext/error.hpp"
#include "semtext/fnv.hpp"
#include "semtext/random.hpp"
#include "semtext/vector.hpp"

namespace semtext {

using Metadata = std::map<std::string, std::string>;
using SearchResult = BasicSimilarityResult<std::uint64_t>;

struct IndexRecord {
    std::uint64_t item_id = 0;
    Embedding vector;
    Metadata metadata;
};

struct HnswParams {
    std::size_t M = 16;               ///< links per node per layer; layer 0 keeps up to 2*M
    std::size_t ef_construction = 200;
    std::size_t ef_search = 100;
    double level_lambda = 0.0;        ///< 0 selects 1/ln(M)
    std::uint64_t seed = 0x5eed;

    double lambda() const { return level_lambda > 0.0 ? level_lambda : 1.0 / std::log(static_cast<double>(M)); }

    void validate() const {
        if (M < 2) fail(ErrorCode::InvalidArgument, "HNSW M must be at least 2");
        if (ef_construction == 0 || ef_search == 0) fail(ErrorCode::InvalidArgument, "ef values must be positive");
    }
};

/// Embedding store with exact and HNSW search.
///
/// Vectors are stored unit-normalized as f32, so cosine similarity is a single dot
/// product. Removal tombstones a record: it stays in the graph as a routing node
/// but never appears in results. Concurrent readers are allowed; `add` and
/// `remove` take the writer lock.
class VectorIndex {
public:
    explicit VectorIndex(HnswParams params = {}) : params_(params), rng_(params.seed) { params_.validate(); }

    VectorIndex(VectorIndex&& other) noexcept { move_from(std::move(other)); }
    VectorIndex& operator=(VectorIndex&& other) noexcept {
        if (this != &other) move_from(std::move(other));
        return *this;
    }
    VectorIndex(const VectorIndex&) = delete;
    VectorIndex& operator=(const VectorIndex&) = delete;

    const HnswParams& params() const noexcept { return params_; }

    std::size_t dim() const {
        std::shared_lock lock(mutex_);
        return dim_;
    }

    /// Model of the first inserted record; every later record must match it.
    std::string model_id() const {
        std::shared_lock lock(mutex_);
        return model_id_;
    }

    /// Live (non-tombstoned) records.
    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return ids_.size() - dead_count_;
    }

    bool empty() const { return size() == 0; }

    bool contains(std::uint64_t id) const {
        std::shared_lock lock(mutex_);
        const auto it = slot_of_.find(id);
        return it != slot_of_.end() && !dead_[it->second];
    }

    void add(const IndexRecord& record) {
        std::unique_lock lock(mutex_);
        if (slot_of_.contains(record.item_id)) {
            fail(ErrorCode::DuplicateId, "item " + std::to_string(record.item_id) + " already indexed");
        }
        if (ids_.empty() && dim_ == 0) {
            dim_ = record.vector.dim();
            model_id_ = record.vector.model_id();
        } else {
            if (record.vector.dim() != dim_) {
                fail(ErrorCode::DimensionMismatch, "index dim " + std::to_string(dim_) + ", record dim " +
                                                       std::to_string(record.vector.dim()));
            }
            if (record.vector.model_id() != model_id_) {
                fail(ErrorCode::ModelMismatch, "index holds '" + model_id_ + "' vectors, record is '" +
                                                   record.vector.model_id() + "'");
            }
        }
        const Embedding unit = normalize(record.vector);
        const auto slot = static_cast<std::uint32_t>(ids_.size());
        ids_.push_back(record.item_id);
        dead_.push_back(0);
        norms_.push_back(static_cast<float>(unit.norm()));
        metadata_.push_back(record.metadata);
        for (double v : unit.values()) data_.push_back(static_cast<float>(v));
        slot_of_.emplace(record.item_id, slot);

        const std::size_t level = draw_level();
        levels_.push_back(static_cast<std::uint8_t>(level));
        links_.emplace_back(level + 1);
        link_node(slot);
    }

    /// Tombstones a record. Returns false if the id is unknown or already removed.
    bool remove(std::uint64_t id) {
        std::unique_lock lock(mutex_);
        const auto it = slot_of_.find(id);
        if (it == slot_of_.end() || dead_[it->second]) return false;
        dead_[it->second] = 1;
        ++dead_count_;
        return true;
    }

    /// The stored record: unit-normalized f32 values, original norm, metadata.
    std::optional<IndexRecord> get(std::uint64_t id) const {
        std::shared_lock lock(mutex_);
        const auto it = slot_of_.find(id);
        if (it == slot_of_.end() || dead_[it->second]) return std::nullopt;
        return record_at(it->second);
    }

    /// Live records in insertion order.
    std::vector<IndexRecord> records() const {
        std::shared_lock lock(mutex_);
        std::vector<IndexRecord> out;
        out.reserve(ids_.size() - dead_count_);
        for (std::uint32_t s = 0; s < ids_.size(); ++s) {
            if (!dead_[s]) out.push_back(record_at(s));
        }
        return out;
    }

    /// Exact top-k by cosine; ties go to the smaller id.
    std::vector<SearchResult> search_flat(const Embedding& query, std::size_t k) const {
        std::shared_lock lock(mutex_);
        if (k == 0) fail(ErrorCode::InvalidArgument, "k must be at least 1");
        if (ids_.empty()) return {};
        const std::vector<double> q = prepare_query(query);
        std::vector<SearchResult> all;
        all.reserve(ids_.size());
        for (std::uint32_t s = 0; s < ids_.size(); ++s) {
            if (!dead_[s]) all.push_back({ids_[s], clamp_unit(dot(q, s)), 0});
        }
        return top_k(std::move(all), k);
    }

    /// Approximate top-k: greedy descent through the upper layers, then a best-first
    /// beam of width max(ef_search, k) on layer 0. `ef_search == 0` uses the default.
    std::vector<SearchResult> search_hnsw(const Embedding& query, std::size_t k, std::size_t ef_search = 0) const {
        std::shared_lock lock(mutex_);
        if (k == 0) fail(ErrorCode::InvalidArgument, "k must be at least 1");
        if (ids_.empty()) return {};
        const std::vector<double> q = prepare_query(query);
        const std::size_t ef = std::max(ef_search == 0 ? params_.ef_search : ef_search, k);
        std::uint32_t ep = entry_;
        double ep_dist = distance(q, ep);
        for (std::size_t layer = max_layer_; layer > 0; --layer) {
            greedy_step(q, ep, ep_dist, layer);
        }
        const auto beam = search_layer(q, {{ep_dist, ep}}, ef, 0);
        std::vector<SearchResult> found;
        found.reserve(beam.size());
        for (const auto& [d, s] : beam) {
            if (!dead_[s]) found.push_back({ids_[s], clamp_unit(dot(q, s)), 0});
        }
        return top_k(std::move(found), k);
    }

    // Graph introspection (tests and diagnostics).
    std::size_t max_layer() const {
        std::shared_lock lock(mutex_);
        return max_layer_;
    }
    std::optional<std::uint64_t> entry_point() const {
        std::shared_lock lock(mutex_);
        if (ids_.empty()) return std::nullopt;
        return ids_[entry_];
    }
    std::size_t level_of(std::uint64_t id) const {
        std::shared_lock lock(mutex_);
        return levels_.at(slot_of_.at(id));
    }
    std::vector<std::uint64_t> neighbors(std::uint64_t id, std::size_t layer) const {
        std::shared_lock lock(mutex_);
        const auto& per_layer = links_.at(slot_of_.at(id));
        std::vector<std::uint64_t> out;
        if (layer >= per_layer.size()) return out;
        for (std::uint32_t s : per_layer[layer]) out.push_back(ids_[s]);
        return out;
    }

    /// Binary layout (little-endian):
    ///   "SEMK" u8 version=1, u32 dim, u64 count
    ///   per record: u64 id, u8 tombstone, f32[dim], f32 original_norm, u32 len + JSON metadata
    ///   u64 entry point id, u8 max_layer
    ///   per record, per layer 0..max_layer: u32 neighbor count + u64 neighbor ids
    ///   u64 FNV-1a of everything before it
    /// A node's level is the highest layer with links (the entry point sits at max_layer).
    void save(const std::filesystem::path& path) const {
        std::string buf;
        {
            std::shared_lock lock(mutex_);
            buf = serialize();
        }
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) fail(ErrorCode::IoFailure, "cannot write " + tmp.string());
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            if (!out) fail(ErrorCode::IoFailure, "short write to " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) fail(ErrorCode::IoFailure, "cannot move index into place at " + path.string());
    }

    static VectorIndex load(const std::filesystem::path& path, HnswParams params = {}) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(ErrorCode::IoFailure, "cannot open index " + path.string());
        const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return deserialize(bytes, params);
    }

    static constexpr std::uint8_t kFormatVersion = 1;

private:
    struct Reader {
        std::string_view bytes;
        std::size_t pos = 0;

        std::uint64_t uint(int width) {
            need(static_cast<std::size_t>(width));
            std::uint64_t v = 0;
            for (int i = 0; i < width; ++i) {
                v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes[pos++])) << (8 * i);
            }
            return v;
        }
        float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(uint(4))); }
        std::string_view take(std::size_t n) {
            need(n);
            const auto out = bytes.substr(pos, n);
            pos += n;
            return out;
        }
        void need(std::size_t n) const {
            if (n > bytes.size() - pos) fail(ErrorCode::CorruptFile, "index file is truncated");
        }
    };

    static void put(std::string& out, std::uint64_t v, int width) {
        for (int i = 0; i < width; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    static void put_f32(std::string& out, float f) { put(out, std::bit_cast<std::uint32_t>(f), 4); }

    std::string serialize() const {
        std::string out = "SEMK";
        out.push_back(static_cast<char>(kFormatVersion));
        put(out, dim_, 4);
        put(out, ids_.size(), 8);
        for (std::uint32_t s = 0; s < ids_.size(); ++s) {
            put(out, ids_[s], 8);
            out.push_back(static_cast<char>(dead_[s]));
            for (std::size_t d = 0; d < dim_; ++d) put_f32(out, data_[s * dim_ + d]);
            put_f32(out, norms_[s]);
            const nlohmann::json meta = {{"model_id", model_id_}, {"fields", metadata_[s]}};
            const std::string json = meta.dump();
            put(out, json.size(), 4);
            out += json;
        }
        put(out, ids_.empty() ? 0 : ids_[entry_], 8);
        out.push_back(static_cast<char>(max_layer_));
        for (std::uint32_t s = 0; s < ids_.size(); ++s) {
            for (std::size_t layer = 0; layer <= max_layer_; ++layer) {
                const auto& nbrs = layer < links_[s].size() ? links_[s][layer] : kNoLinks;
                put(out, nbrs.size(), 4);
                for (std::uint32_t n : nbrs) put(out, ids_[n], 8);
            }
        }
        put(out, fnv1a64(out), 8);
        return out;
    }

    static VectorIndex deserialize(std::string_view bytes, HnswParams params) {
        if (bytes.size() < 4 + 1 + 4 + 8 + 8 || bytes.substr(0, 4) != "SEMK") {
            fail(ErrorCode::CorruptFile, "not an index file");
        }
        const auto version = static_cast<std::uint8_t>(bytes[4]);
        if (version != kFormatVersion) {
            fail(ErrorCode::VersionUnsupported, "index format version " + std::to_string(version));
        }
        const std::string_view body = bytes.substr(0, bytes.size() - 8);
        Reader tail{bytes, bytes.size() - 8};
        if (fnv1a64(body) != tail.uint(8)) fail(ErrorCode::CorruptFile, "index checksum mismatch");

        Reader r{body, 5};
        VectorIndex idx(params);
        idx.dim_ = static_cast<std::size_t>(r.uint(4));
        const std::uint64_t count = r.uint(8);
        if (count > 0 && idx.dim_ == 0) fail(ErrorCode::CorruptFile, "records without a dimension");
        if (count > body.size()) fail(ErrorCode::CorruptFile, "record count exceeds file size");
        for (std::uint64_t s = 0; s < count; ++s) {
            const std::uint64_t id = r.uint(8);
            const auto dead = static_cast<std::uint8_t>(r.uint(1));
            if (dead > 1) fail(ErrorCode::CorruptFile, "bad tombstone flag");
            for (std::size_t d = 0; d < idx.dim_; ++d) {
                const float v = r.f32();
                if (!std::isfinite(v)) fail(ErrorCode::CorruptFile, "non-finite vector value");
                idx.data_.push_back(v);
            }
            idx.norms_.push_back(r.f32());
            const auto meta_len = static_cast<std::size_t>(r.uint(4));
            const auto meta = nlohmann::json::parse(r.take(meta_len), nullptr, false);
            if (meta.is_discarded() || !meta.is_object() || !meta.contains("fields") ||
                !meta["fields"].is_object() || !meta.contains("model_id") || !meta["model_id"].is_string()) {
                fail(ErrorCode::CorruptFile, "bad record metadata");
            }
            Metadata fields;
            for (const auto& [k, v] : meta["fields"].items()) {
                if (!v.is_string()) fail(ErrorCode::CorruptFile, "metadata values must be strings");
                fields.emplace(k, v.get<std::string>());
            }
            if (s == 0) {
                idx.model_id_ = meta["model_id"].get<std::string>();
            } else if (meta["model_id"].get<std::string>() != idx.model_id_) {
                fail(ErrorCode::CorruptFile, "records disagree on model id");
            }
            if (!idx.slot_of_.emplace(id, static_cast<std::uint32_t>(s)).second) {
                fail(ErrorCode::CorruptFile, "duplicate item id in file");
            }
            idx.ids_.push_back(id);
            idx.dead_.push_back(dead);
            idx.dead_count_ += dead;
            idx.metadata_.push_back(std::move(fields));
        }
        const std::uint64_t entry_id = r.uint(8);
        idx.max_layer_ = static_cast<std::size_t>(r.uint(1));
        idx.links_.resize(count);
        idx.levels_.assign(count, 0);
        for (std::uint64_t s = 0; s < count; ++s) {
            auto& per_layer = idx.links_[s];
            per_layer.resize(idx.max_layer_ + 1);
            for (std::size_t layer = 0; layer <= idx.max_layer_; ++layer) {
                const std::uint64_t n = r.uint(4);
                if (n > count) fail(ErrorCode::CorruptFile, "neighbor count exceeds record count");
                for (std::uint64_t j = 0; j < n; ++j) {
                    const auto it = idx.slot_of_.find(r.uint(8));
                    if (it == idx.slot_of_.end()) fail(ErrorCode::CorruptFile, "neighbor id not in index");
                    per_layer[layer].push_back(it->second);
                }
                if (n > 0) idx.levels_[s] = static_cast<std::uint8_t>(layer);
            }
        }
        if (r.pos != body.size()) fail(ErrorCode::CorruptFile, "trailing bytes after graph");
        if (count > 0) {
            const auto it = idx.slot_of_.find(entry_id);
            if (it == idx.slot_of_.end()) fail(ErrorCode::CorruptFile, "entry point not in index");
            idx.entry_ = it->second;
            idx.levels_[idx.entry_] = static_cast<std::uint8_t>(idx.max_layer_);
        } else if (idx.max_layer_ != 0) {
            fail(ErrorCode::CorruptFile, "graph layers without records");
        }
        for (std::uint64_t s = 0; s < count; ++s) idx.links_[s].resize(idx.levels_[s] + 1u);
        // Advance the level generator past the draws already consumed by these records.
        idx.rng_.discard(count);
        return idx;
    }

    IndexRecord record_at(std::uint32_t s) const {
        std::vector<double> v(data_.begin() + static_cast<std::ptrdiff_t>(s * dim_),
                              data_.begin() + static_cast<std::ptrdiff_t>((s + 1) * dim_));
        return {ids_[s], Embedding(std::move(v), model_id_, norms_[s]), metadata_[s]};
    }

    std::vector<double> prepare_query(const Embedding& query) const {
        if (query.dim() != dim_) {
            fail(ErrorCode::DimensionMismatch,
                 "index dim " + std::to_string(dim_) + ", query dim " + std::to_string(query.dim()));
        }
        const Embedding unit = normalize(query);
        return {unit.values().begin(), unit.values().end()};
    }

    double dot(std::span<const double> q, std::uint32_t s) const {
        const float* v = data_.data() + s * dim_;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) acc += q[d] * static_cast<double>(v[d]);
        return acc;
    }

    double distance(std::span<const double> q, std::uint32_t s) const { return 1.0 - dot(q, s); }

    double distance_between(std::uint32_t a, std::uint32_t b) const {
        const float* va = data_.data() + a * dim_;
        const float* vb = data_.data() + b * dim_;
        double acc = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) acc += static_cast<double>(va[d]) * static_cast<double>(vb[d]);
        return 1.0 - acc;
    }

    static std::vector<SearchResult> top_k(std::vector<SearchResult> results, std::size_t k) {
        const auto better = [](const SearchResult& a, const SearchResult& b) {
            return a.score != b.score ? a.score > b.score : a.item_id < b.item_id;
        };
        if (results.size() > k) {
            std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(k), results.end(), better);
            results.resize(k);
        } else {
            std::sort(results.begin(), results.end(), better);
        }
        for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = i + 1;
        return results;
    }

    std::size_t draw_level() {
        const double level = std::floor(-std::log(open_unit_interval(rng_)) * params_.lambda());
        return static_cast<std::size_t>(std::min(level, 255.0));
    }

    using Candidate = std::pair<double, std::uint32_t>; // (distance, slot)

    void greedy_step(std::span<const double> q, std::uint32_t& ep, double& ep_dist, std::size_t layer) const {
        for (bool improved = true; improved;) {
            improved = false;
            for (std::uint32_t n : links_[ep][layer]) {
                const double d = distance(q, n);
                if (d < ep_dist || (d == ep_dist && n < ep)) {
                    ep_dist = d;
                    ep = n;
                    improved = true;
                }
            }
        }
    }

    /// Best-first search on one layer; returns up to `ef` candidates, nearest first.
    std::vector<Candidate> search_layer(std::span<const double> q, const std::vector<Candidate>& entries,
                                        std::size_t ef, std::size_t layer) const {
        std::vector<std::uint8_t> visited(ids_.size(), 0);
        std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
        std::priority_queue<Candidate> best;
        for (const auto& c : entries) {
            if (visited[c.second]) continue;
            visited[c.second] = 1;
            frontier.push(c);
            best.push(c);
            if (best.size() > ef) best.pop();
        }
        while (!frontier.empty()) {
            const Candidate cur = frontier.top();
            if (best.size() >= ef && cur > best.top()) break;
            frontier.pop();
            for (std::uint32_t n : links_[cur.second][layer]) {
                if (visited[n]) continue;
                visited[n] = 1;
                const Candidate next{distance(q, n), n};
                if (best.size() < ef || next < best.top()) {
                    frontier.push(next);
                    best.push(next);
                    if (best.size() > ef) best.pop();
                }
            }
        }
        std::vector<Candidate> out(best.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = best.top();
            best.pop();
        }
        return out;
    }

    /// Keeps a candidate only if it is closer to the base than to every neighbor kept so far.
    std::vector<std::uint32_t> select_neighbors(const std::vector<Candidate>& sorted, std::size_t limit) const {
        std::vector<std::uint32_t> kept;
        for (const auto& [d, s] : sorted) {
            if (kept.size() >= limit) break;
            bool diverse = true;
            for (std::uint32_t k : kept) {
                if (distance_between(s, k) < d) {
                    diverse = false;
                    break;
                }
            }
            if (diverse) kept.push_back(s);
        }
        // Top up with the nearest pruned candidates so nodes keep their full degree.
        for (const auto& [d, s] : sorted) {
            if (kept.size() >= limit) break;
            if (std::find(kept.begin(), kept.end(), s) == kept.end()) kept.push_back(s);
        }
        return kept;
    }

    std::size_t max_links(std::size_t layer) const { return layer == 0 ? 2 * params_.M : params_.M; }

    void link_node(std::uint32_t slot) {
        const std::size_t level = levels_[slot];
        if (slot == 0) {
            entry_ = 0;
            max_layer_ = level;
            return;
        }
        std::vector<double> q(data_.begin() + static_cast<std::ptrdiff_t>(slot * dim_),
                              data_.begin() + static_cast<std::ptrdiff_t>((slot + 1) * dim_));
        std::uint32_t ep = entry_;
        double ep_dist = distance(q, ep);
        for (std::size_t layer = max_layer_; layer > level; --layer) {
            greedy_step(q, ep, ep_dist, layer);
        }
        std::vector<Candidate> entries{{ep_dist, ep}};
        for (std::size_t layer = std::min(level, max_layer_) + 1; layer-- > 0;) {
            const auto found = search_layer(q, entries, params_.ef_construction, layer);
            links_[slot][layer] = select_neighbors(found, max_links(layer));
            for (std::uint32_t n : links_[slot][layer]) {
                auto& back = links_[n][layer];
                back.push_back(slot);
                if (back.size() > max_links(layer)) {
                    std::vector<Candidate> pool;
                    pool.reserve(back.size());
                    for (std::uint32_t b : back) pool.emplace_back(distance_between(n, b), b);
                    std::sort(pool.begin(), pool.end());
                    back = select_neighbors(pool, max_links(layer));
                }
            }
            entries = found;
        }
        if (level > max_layer_) {
            max_layer_ = level;
            entry_ = slot;
        }
    }

    void move_from(VectorIndex&& o) {
        std::unique_lock lock(o.mutex_);
        params_ = o.params_;
        rng_ = o.rng_;
        dim_ = std::exchange(o.dim_, 0);
        model_id_ = std::move(o.model_id_);
        ids_ = std::move(o.ids_);
        dead_ = std::move(o.dead_);
        dead_count_ = std::exchange(o.dead_count_, 0);
        norms_ = std::move(o.norms_);
        data_ = std::move(o.data_);
        metadata_ = std::move(o.metadata_);
        slot_of_ = std::move(o.slot_of_);
        levels_ = std::move(o.levels_);
        links_ = std::move(o.links_);
        entry_ = std::exchange(o.entry_, 0);
        max_layer_ = std::exchange(o.max_layer_, 0);
    }

    inline static const std::vector<std::uint32_t> kNoLinks{};

    HnswParams params_;
    std::mt19937_64 rng_;
    mutable std::shared_mutex mutex_;

    std::size_t dim_ = 0;
    std::string model_id_;
    std::vector<std::uint64_t> ids_;
    std::vector<std::uint8_t> dead_;
    std::size_t dead_count_ = 0;
    std::vector<float> norms_;
    std::vector<float> data_;
    std::vector<Metadata> metadata_;
    std::unordered_map<std::uint64_t, std::uint32_t> slot_of_;

    std::vector<std::uint8_t> levels_;
    std::vector<std::vector<std::vector<std::uint32_t>>> links_; // [slot][layer] -> neighbor slots
    std::uint32_t entry_ = 0;
    std::size_t max_layer_ = 0;
};

} // namespace semtext
