#include <algorithm>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "semtext/index.hpp"
#include "support.hpp"

using namespace semtext;
using testing_support::random_unit;
using testing_support::TempDir;

namespace {

// Naive scan over the stored vectors: dot with the unit query, ties by id.
std::vector<std::uint64_t> oracle_top(const VectorIndex& index, const std::vector<double>& query, std::size_t k) {
    double n = 0;
    for (double x : query) n += x * x;
    n = std::sqrt(n);
    std::vector<std::pair<double, std::uint64_t>> scored;
    for (const auto& rec : index.records()) {
        double acc = 0;
        for (std::size_t d = 0; d < query.size(); ++d) acc += (query[d] / n) * rec.vector[d];
        scored.emplace_back(acc, rec.item_id);
    }
    std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < k && i < scored.size(); ++i) ids.push_back(scored[i].second);
    return ids;
}

std::vector<std::uint64_t> ids_of(const std::vector<SearchResult>& r) {
    std::vector<std::uint64_t> out;
    for (const auto& x : r) out.push_back(x.item_id);
    return out;
}

VectorIndex random_index(std::size_t n, std::size_t dim, std::uint64_t seed, HnswParams params = {}) {
    std::mt19937_64 rng(seed);
    VectorIndex index(params);
    for (std::size_t i = 0; i < n; ++i) {
        index.add({i * 7 + 3, Embedding(random_unit(rng, dim), "m"), {{"n", std::to_string(i)}}});
    }
    return index;
}

} // namespace

TEST(VectorIndex, AddGetRoundTrip) {
    VectorIndex index;
    const Embedding v({3.0, 0.0, 4.0}, "m");
    index.add({42, v, {{"source_id", "doc"}, {"text", "hello"}}});
    const auto rec = index.get(42);
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->metadata.at("text"), "hello");
    EXPECT_EQ(rec->vector[0], static_cast<double>(0.6f));
    EXPECT_EQ(rec->vector[2], static_cast<double>(0.8f));
    EXPECT_NEAR(rec->vector.norm(), 5.0, 1e-6);
    EXPECT_EQ(index.model_id(), "m");
    EXPECT_FALSE(index.get(7));
}

TEST(VectorIndex, Errors) {
    VectorIndex index;
    index.add({1, Embedding({1.0, 0.0}, "m"), {}});
    auto code_of = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of([&] { index.add({1, Embedding({0.0, 1.0}, "m"), {}}); }), ErrorCode::DuplicateId);
    EXPECT_EQ(code_of([&] { index.add({2, Embedding({0.0, 1.0, 0.0}, "m"), {}}); }), ErrorCode::DimensionMismatch);
    EXPECT_EQ(code_of([&] { index.add({3, Embedding({0.0, 1.0}, "other"), {}}); }), ErrorCode::ModelMismatch);
    EXPECT_EQ(code_of([&] { index.add({4, Embedding({0.0, 0.0}, "m"), {}}); }), ErrorCode::ZeroVector);
    EXPECT_EQ(code_of([&] { index.search_flat(Embedding({0.0, 0.0}), 1); }), ErrorCode::ZeroVector);
    EXPECT_EQ(code_of([&] { index.search_flat(Embedding({1.0, 0.0, 0.0}), 1); }), ErrorCode::DimensionMismatch);
}

TEST(VectorIndex, EmptyAndSmall) {
    VectorIndex index;
    EXPECT_TRUE(index.search_flat(Embedding({1.0, 0.0}), 3).empty());
    EXPECT_TRUE(index.search_hnsw(Embedding({1.0, 0.0}), 3).empty());
    index.add({9, Embedding({1.0, 1.0}, "m"), {}});
    EXPECT_EQ(ids_of(index.search_hnsw(Embedding({-1.0, 0.2}), 3)), std::vector<std::uint64_t>{9});
    EXPECT_EQ(index.search_flat(Embedding({-1.0, 0.2}), 3).size(), 1u);
}

TEST(VectorIndex, ExactMatchRanksFirstWithUnitScore) {
    std::mt19937_64 rng(5);
    VectorIndex index;
    std::vector<std::vector<double>> stored;
    for (std::uint64_t i = 0; i < 50; ++i) {
        stored.push_back(random_unit(rng, 16));
        index.add({i, Embedding(stored.back(), "m"), {}});
    }
    const auto r = index.search_flat(Embedding(stored[17]), 5);
    EXPECT_EQ(r[0].item_id, 17u);
    EXPECT_NEAR(r[0].score, 1.0, 1e-6);
    EXPECT_EQ(r[0].rank, 1u);
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_GE(r[i - 1].score, r[i].score);
}

TEST(VectorIndex, TiesBreakOnAscendingId) {
    VectorIndex index;
    index.add({30, Embedding({1.0, 0.0}, "m"), {}});
    index.add({10, Embedding({2.0, 0.0}, "m"), {}});
    index.add({20, Embedding({0.0, 1.0}, "m"), {}});
    EXPECT_EQ(ids_of(index.search_flat(Embedding({1.0, 0.0}), 3)), (std::vector<std::uint64_t>{10, 30, 20}));
}

TEST(VectorIndex, FlatMatchesNaiveScan) {
    const auto index = random_index(500, 24, 1);
    std::mt19937_64 rng(2);
    for (int q = 0; q < 30; ++q) {
        const auto query = random_unit(rng, 24);
        EXPECT_EQ(ids_of(index.search_flat(Embedding(query), 10)), oracle_top(index, query, 10));
    }
}

TEST(VectorIndex, HnswRecallOnRandomData) {
    const auto index = random_index(2000, 32, 3);
    std::mt19937_64 rng(4);
    std::size_t hits = 0;
    for (int q = 0; q < 50; ++q) {
        const auto query = random_unit(rng, 32);
        const auto truth = oracle_top(index, query, 10);
        for (auto id : ids_of(index.search_hnsw(Embedding(query), 10))) {
            hits += std::count(truth.begin(), truth.end(), id);
        }
    }
    EXPECT_GE(static_cast<double>(hits) / 500.0, 0.95);
}

TEST(VectorIndex, HnswFindsStoredVectors) {
    std::mt19937_64 rng(8);
    VectorIndex index;
    std::vector<std::vector<double>> stored;
    for (std::uint64_t i = 0; i < 1500; ++i) {
        stored.push_back(random_unit(rng, 16));
        index.add({i, Embedding(stored.back(), "m"), {}});
    }
    for (std::uint64_t i = 0; i < 1500; i += 15) {
        EXPECT_EQ(index.search_hnsw(Embedding(stored[i]), 1, 16).at(0).item_id, i);
    }
}

TEST(VectorIndex, HnswIsExactOnTinyIndices) {
    const auto index = random_index(12, 8, 6);
    std::mt19937_64 rng(7);
    for (int q = 0; q < 20; ++q) {
        const Embedding query(random_unit(rng, 8));
        EXPECT_EQ(index.search_hnsw(query, 12, 12), index.search_flat(query, 12));
    }
}

TEST(VectorIndex, GraphRespectsDegreeBounds) {
    HnswParams p;
    p.M = 4;
    p.ef_construction = 32;
    const auto index = random_index(400, 8, 9, p);
    for (const auto& rec : index.records()) {
        EXPECT_LE(index.neighbors(rec.item_id, 0).size(), 8u);
        for (std::size_t l = 1; l <= index.level_of(rec.item_id); ++l) {
            EXPECT_LE(index.neighbors(rec.item_id, l).size(), 4u);
        }
        EXPECT_LE(index.level_of(rec.item_id), index.max_layer());
    }
    EXPECT_EQ(index.level_of(*index.entry_point()), index.max_layer());
}

TEST(VectorIndex, TombstonesAreFiltered) {
    auto index = random_index(100, 8, 10);
    std::mt19937_64 rng(11);
    const Embedding query(random_unit(rng, 8));
    const auto before = index.search_flat(query, 3);
    EXPECT_TRUE(index.remove(before[0].item_id));
    EXPECT_FALSE(index.remove(before[0].item_id));
    EXPECT_EQ(index.size(), 99u);
    const auto after = index.search_flat(query, 2);
    EXPECT_EQ(after[0].item_id, before[1].item_id);
    for (const auto& r : index.search_hnsw(query, 10)) EXPECT_NE(r.item_id, before[0].item_id);
    EXPECT_FALSE(index.get(before[0].item_id));
}

TEST(VectorIndex, RepeatedQueriesAreDeterministic) {
    const auto a = random_index(300, 16, 12);
    const auto b = random_index(300, 16, 12);
    std::mt19937_64 rng(13);
    for (int q = 0; q < 10; ++q) {
        const Embedding query(random_unit(rng, 16));
        EXPECT_EQ(a.search_hnsw(query, 10), a.search_hnsw(query, 10));
        EXPECT_EQ(a.search_hnsw(query, 10), b.search_hnsw(query, 10));
    }
}

TEST(VectorIndex, SaveLoadRoundTrip) {
    TempDir dir;
    auto index = random_index(800, 16, 14);
    index.remove(3);
    index.save(dir / "idx.semk");
    const auto loaded = VectorIndex::load(dir / "idx.semk");
    EXPECT_EQ(loaded.size(), index.size());
    EXPECT_EQ(loaded.max_layer(), index.max_layer());
    EXPECT_EQ(loaded.entry_point(), index.entry_point());
    std::mt19937_64 rng(15);
    for (int q = 0; q < 20; ++q) {
        const Embedding query(random_unit(rng, 16));
        EXPECT_EQ(loaded.search_flat(query, 10), index.search_flat(query, 10));
        EXPECT_EQ(loaded.search_hnsw(query, 10), index.search_hnsw(query, 10));
    }
    for (const auto& rec : index.records()) {
        const auto other = loaded.get(rec.item_id);
        ASSERT_TRUE(other);
        EXPECT_EQ(other->vector, rec.vector);
        EXPECT_EQ(other->metadata, rec.metadata);
        EXPECT_EQ(loaded.neighbors(rec.item_id, 0), index.neighbors(rec.item_id, 0));
    }
}

TEST(VectorIndex, AddAfterLoadMatchesUninterruptedBuild) {
    TempDir dir;
    std::mt19937_64 rng(16);
    std::vector<Embedding> vecs;
    for (int i = 0; i < 300; ++i) vecs.emplace_back(random_unit(rng, 8), "m");
    VectorIndex whole;
    VectorIndex first;
    for (std::uint64_t i = 0; i < 300; ++i) {
        whole.add({i, vecs[i], {}});
        if (i < 150) first.add({i, vecs[i], {}});
    }
    first.save(dir / "half.semk");
    auto resumed = VectorIndex::load(dir / "half.semk");
    for (std::uint64_t i = 150; i < 300; ++i) resumed.add({i, vecs[i], {}});
    for (std::uint64_t i = 0; i < 300; i += 7) EXPECT_EQ(resumed.neighbors(i, 0), whole.neighbors(i, 0));
}

TEST(VectorIndex, CorruptFilesAreRejected) {
    TempDir dir;
    const auto index = random_index(50, 8, 17);
    index.save(dir / "ok.semk");
    std::ifstream in(dir / "ok.semk", std::ios::binary);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto write = [&](const std::string& name, const std::string& content) {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
        return dir / name;
    };
    const auto code_of = [](const std::filesystem::path& p) {
        try {
            VectorIndex::load(p);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code_of(write("trunc.semk", bytes.substr(0, bytes.size() / 2))), ErrorCode::CorruptFile);
    std::string flipped = bytes;
    flipped[100] ^= 0x01;
    EXPECT_EQ(code_of(write("flip.semk", flipped)), ErrorCode::CorruptFile);
    std::string magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(code_of(write("magic.semk", magic)), ErrorCode::CorruptFile);
    std::string version = bytes;
    version[4] = 2;
    EXPECT_EQ(code_of(write("version.semk", version)), ErrorCode::VersionUnsupported);
    EXPECT_EQ(code_of(dir / "missing.semk"), ErrorCode::IoFailure);
}
