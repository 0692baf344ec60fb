#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "semtext/cli.hpp"
#include "support.hpp"

using namespace semtext;
using testing_support::TempDir;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    args.insert(args.begin(), "semtext");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
    TempDir dir;
    std::string config;

    Workspace() {
        std::ofstream corpus(dir / "corpus.jsonl");
        for (int i = 0; i < 8; ++i) {
            corpus << nlohmann::json{{"doc_id", "doc" + std::to_string(i)},
                                     {"text", "document " + std::to_string(i) + " about topic " +
                                                  (i % 2 ? "housing policy" : "field education")},
                                     {"metadata", {{"label", i % 2 ? "housing" : "field"}}}}
                          .dump()
                   << "\n";
        }
        corpus.close();
        std::ofstream(dir / "semtext.toml") << "[index]\npath = \"kb.index\"\n[corpus]\npath = \"corpus.jsonl\"\n";
        config = (dir / "semtext.toml").string();
    }
};

} // namespace

TEST(Cli, NoArgumentsIsUsageError) {
    const auto r = run({});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("search"), std::string::npos);
}

TEST(Cli, BadUsage) {
    EXPECT_EQ(run({"search"}).code, kExitUsage);
    EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(run({"search", "-q", "x", "-n", "0"}).code, kExitUsage);
    EXPECT_EQ(run({"baseline", "fuzzy"}).code, kExitUsage);
    EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(Cli, RuntimeErrorExitsTwo) {
    Workspace w;
    const auto r = run({"search", "-c", w.config, "-q", "anything"});
    EXPECT_EQ(r.code, kExitRuntime);
    EXPECT_NE(r.err.find("NotFound"), std::string::npos);
}

TEST(Cli, IngestSearchAndJson) {
    Workspace w;
    const auto ingest = run({"ingest", "-c", w.config, "--json"});
    ASSERT_EQ(ingest.code, kExitOk) << ingest.err;
    EXPECT_EQ(nlohmann::json::parse(ingest.out)["docs"], 8);

    const auto search = run({"search", "-c", w.config, "-q", "housing policy", "-n", "5", "--json"});
    ASSERT_EQ(search.code, kExitOk) << search.err;
    const auto arr = nlohmann::json::parse(search.out);
    ASSERT_TRUE(arr.is_array());
    EXPECT_EQ(arr.size(), 5u);
    EXPECT_EQ(arr[0]["metadata"]["label"], "housing");

    const auto text = run({"search", "-c", w.config, "-q", "housing policy", "-n", "2"});
    EXPECT_EQ(text.out.rfind("1. ", 0), 0u);

    const auto ask = run({"ask", "-c", w.config, "-q", "what about field education?"});
    EXPECT_EQ(ask.code, kExitOk) << ask.err;
    EXPECT_EQ(ask.out.rfind("MOCK:", 0), 0u);

    const auto cluster = run({"cluster", "-c", w.config, "-k", "2", "--seed", "1", "--json"});
    EXPECT_EQ(cluster.code, kExitOk) << cluster.err;
}

TEST(Cli, TsneIsByteIdentical) {
    Workspace w;
    ASSERT_EQ(run({"ingest", "-c", w.config}).code, kExitOk);
    const auto a = (w.dir / "a.csv").string();
    const auto b = (w.dir / "b.csv").string();
    ASSERT_EQ(run({"tsne", "-c", w.config, "--seed", "7", "--perplexity", "2", "-o", a}).code, kExitOk);
    ASSERT_EQ(run({"tsne", "-c", w.config, "--seed", "7", "--perplexity", "2", "-o", b}).code, kExitOk);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(read_layout(a).size(), 8u);
    const auto json = run({"tsne", "-c", w.config, "--seed", "7", "--json"});
    EXPECT_EQ(nlohmann::json::parse(json.out).size(), 8u);
}

TEST(Cli, Baselines) {
    Workspace w;
    std::ofstream(w.dir / "terms.txt") << "# weapons\nrifle\nfirearm\n";
    const auto dict = run({"baseline", "dictionary", "--terms", (w.dir / "terms.txt").string(), "-t",
                           "He sold a Rifle and a colt", "--json"});
    ASSERT_EQ(dict.code, kExitOk) << dict.err;
    const auto rows = nlohmann::json::parse(dict.out);
    EXPECT_TRUE(rows[0]["flagged"].get<bool>());
    EXPECT_EQ(rows[0]["hits"].size(), 1u);

    const auto tfidf = run({"baseline", "tfidf", "-c", w.config, "-q", "housing", "-n", "3", "--json"});
    ASSERT_EQ(tfidf.code, kExitOk) << tfidf.err;
    EXPECT_EQ(nlohmann::json::parse(tfidf.out).size(), 3u);
    EXPECT_EQ(run({"baseline", "dictionary", "-t", "x"}).code, kExitRuntime);
}
