#include <algorithm>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "semtext/ingest.hpp"
#include "support.hpp"

using namespace semtext;
using testing_support::TempDir;

namespace {

void write(const std::filesystem::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

AppConfig config_in(const TempDir& dir) {
    AppConfig cfg;
    cfg.index_path = dir / "kb.index";
    return cfg;
}

const char* kThreeDocs =
    R"({"doc_id":"a","text":"Social work students complete field placements.","metadata":{"dept":"ssw","year":2024}})"
    "\n"
    R"({"doc_id":"b","text":"The library is open every weekday."})"
    "\n\n"
    R"({"doc_id":"c","text":"Faculty research covers housing and elder care."})"
    "\n";

class FailingProvider final : public EmbeddingProvider {
public:
    const std::string& model_id() const override { return id_; }
    std::size_t dim() const override { return 256; }
    std::vector<Embedding> embed(std::span<const std::string>) override {
        fail(ErrorCode::ProviderUnavailable, "endpoint down");
    }

private:
    std::string id_ = hash_model_id(256);
};

} // namespace

TEST(Corpus, ParsesAndReportsBadLines) {
    std::istringstream in(
        R"({"doc_id":"a","text":"one"})"
        "\n{not json\n"
        R"({"doc_id":"b","text":"two","metadata":{"n":3,"s":"x"}})"
        "\n"
        R"({"text":"no id"})"
        "\n"
        R"({"doc_id":"c","text":"   "})"
        "\n"
        R"({"doc_id":"a","text":"again"})"
        "\n"
        R"({"doc_id":"d","text":"x","metadata":[1]})"
        "\n");
    const auto corpus = parse_corpus(in);
    ASSERT_EQ(corpus.records.size(), 2u);
    EXPECT_EQ(corpus.records[1].metadata.at("n"), "3");
    EXPECT_EQ(corpus.records[1].metadata.at("s"), "x");
    std::vector<std::size_t> lines;
    for (const auto& s : corpus.skipped) lines.push_back(s.line);
    EXPECT_EQ(lines, (std::vector<std::size_t>{2, 4, 5, 6, 7}));
}

TEST(Percentage, Formatting) {
    EXPECT_EQ(format_percentage(0.6423), "64.23%");
    EXPECT_EQ(format_percentage(0.64235), "64.24%");
    EXPECT_EQ(format_percentage(1.0), "100.00%");
    EXPECT_EQ(format_percentage(0.0), "0.00%");
    EXPECT_EQ(format_percentage(0.99999), "100.00%");
    EXPECT_EQ(format_percentage(-0.5), "-50.00%");
    EXPECT_EQ(format_percentage(0.00004), "0.00%");
    EXPECT_THROW(format_percentage(std::nan("")), Error);
}

TEST(Ingest, EmptyFileGivesEmptyIndex) {
    TempDir dir;
    write(dir / "c.jsonl", "");
    const auto cfg = config_in(dir);
    const auto report = ingest_corpus(dir / "c.jsonl", cfg);
    EXPECT_EQ(report.docs, 0u);
    EXPECT_EQ(report.chunks, 0u);
    EXPECT_TRUE(VectorIndex::load(cfg.index_path).empty());
}

TEST(Ingest, ThreeShortDocs) {
    TempDir dir;
    write(dir / "c.jsonl", kThreeDocs);
    const auto cfg = config_in(dir);
    const auto report = ingest_corpus(dir / "c.jsonl", cfg);
    EXPECT_EQ(report.docs, 3u);
    EXPECT_EQ(report.chunks, 3u);
    const auto index = VectorIndex::load(cfg.index_path);
    ASSERT_EQ(index.size(), 3u);
    EXPECT_EQ(index.model_id(), "hash-v1-256");
    const auto rec = index.get(chunk_item_id("a", 0));
    ASSERT_TRUE(rec);
    EXPECT_EQ(rec->metadata.at("dept"), "ssw");
    EXPECT_EQ(rec->metadata.at("year"), "2024");
    EXPECT_EQ(rec->metadata.at("doc_id"), "a");
    EXPECT_EQ(rec->metadata.at("text"), "Social work students complete field placements.");
}

TEST(Ingest, MalformedLineIsSkipped) {
    TempDir dir;
    std::string corpus;
    for (int i = 0; i < 5; ++i) {
        corpus += i == 2 ? std::string("{\"doc_id\": \"broken\"\n")
                         : R"({"doc_id":"d)" + std::to_string(i) + R"(","text":"document number )" +
                               std::to_string(i) + "\"}\n";
    }
    write(dir / "c.jsonl", corpus);
    const auto report = ingest_corpus(dir / "c.jsonl", config_in(dir));
    EXPECT_EQ(report.docs, 4u);
    ASSERT_EQ(report.skipped.size(), 1u);
    EXPECT_EQ(report.skipped[0].line, 3u);
    EXPECT_EQ(to_json(report)["skipped"][0]["line"], 3);
}

TEST(Ingest, ReingestIsIdempotentAndUpserts) {
    TempDir dir;
    write(dir / "c.jsonl", kThreeDocs);
    const auto cfg = config_in(dir);
    ingest_corpus(dir / "c.jsonl", cfg);
    const auto first = VectorIndex::load(cfg.index_path);
    ingest_corpus(dir / "c.jsonl", cfg);
    const auto second = VectorIndex::load(cfg.index_path);
    ASSERT_EQ(second.size(), first.size());
    for (const auto& r : first.records()) {
        const auto other = second.get(r.item_id);
        ASSERT_TRUE(other);
        EXPECT_TRUE(std::ranges::equal(other->vector.values(), r.vector.values()));
        EXPECT_EQ(other->metadata, r.metadata);
    }

    write(dir / "update.jsonl", R"({"doc_id":"b","text":"The library now opens on weekends too."})" "\n"
                                R"({"doc_id":"e","text":"A brand new document."})" "\n");
    const auto report = ingest_corpus(dir / "update.jsonl", cfg);
    EXPECT_EQ(report.docs, 2u);
    const auto merged = VectorIndex::load(cfg.index_path);
    EXPECT_EQ(merged.size(), 4u);
    EXPECT_EQ(merged.get(chunk_item_id("b", 0))->metadata.at("text"), "The library now opens on weekends too.");
    EXPECT_TRUE(merged.contains(chunk_item_id("a", 0)));
    const auto a_old = first.get(chunk_item_id("a", 0));
    const auto a_new = merged.get(chunk_item_id("a", 0));
    for (std::size_t i = 0; i < a_old->vector.dim(); ++i) {
        EXPECT_NEAR(a_new->vector.values()[i], a_old->vector.values()[i], 1e-6);
    }
}

TEST(Ingest, ProviderFailurePersistsNothing) {
    TempDir dir;
    write(dir / "c.jsonl", kThreeDocs);
    const auto cfg = config_in(dir);
    FailingProvider provider;
    try {
        ingest_corpus(dir / "c.jsonl", cfg, provider);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProviderUnavailable);
    }
    EXPECT_FALSE(std::filesystem::exists(cfg.index_path));

    ingest_corpus(dir / "c.jsonl", cfg);
    const auto before = std::filesystem::file_size(cfg.index_path);
    EXPECT_THROW(ingest_corpus(dir / "c.jsonl", cfg, provider), Error);
    EXPECT_EQ(std::filesystem::file_size(cfg.index_path), before);
    EXPECT_EQ(VectorIndex::load(cfg.index_path).size(), 3u);
}

TEST(Ingest, ModelMismatchIsRefused) {
    TempDir dir;
    write(dir / "c.jsonl", kThreeDocs);
    auto cfg = config_in(dir);
    ingest_corpus(dir / "c.jsonl", cfg);
    HashProvider small(64);
    try {
        ingest_corpus(dir / "c.jsonl", cfg, small);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ModelMismatch);
    }
}

TEST(Ingest, CacheAvoidsSecondEmbedding) {
    TempDir dir;
    write(dir / "c.jsonl", kThreeDocs);
    auto cfg = config_in(dir);
    cfg.cache_dir = dir / "cache";
    ingest_corpus(dir / "c.jsonl", cfg);
    std::filesystem::remove(cfg.index_path);
    FailingProvider provider;
    EXPECT_NO_THROW(ingest_corpus(dir / "c.jsonl", cfg, provider));
    EXPECT_EQ(VectorIndex::load(cfg.index_path).size(), 3u);
}

TEST(Ingest, LongDocumentChunkIds) {
    TempDir dir;
    std::string body;
    for (int i = 0; i < 400; ++i) body += "word" + std::to_string(i % 7) + " ";
    write(dir / "c.jsonl", nlohmann::json{{"doc_id", "long"}, {"text", body}}.dump() + "\n");
    auto cfg = config_in(dir);
    cfg.chunk_policy.max_tokens = 64;
    const auto report = ingest_corpus(dir / "c.jsonl", cfg);
    EXPECT_GT(report.chunks, 1u);
    const auto index = VectorIndex::load(cfg.index_path);
    for (std::size_t i = 0; i < report.chunks; ++i) {
        const auto rec = index.get(chunk_item_id("long", i));
        ASSERT_TRUE(rec) << i;
        EXPECT_EQ(body.substr(std::stoul(rec->metadata.at("char_start")),
                              std::stoul(rec->metadata.at("char_end")) - std::stoul(rec->metadata.at("char_start"))),
                  rec->metadata.at("text"));
    }
}
