#include <gtest/gtest.h>
#include <json.hpp>

#include "semtext/rerank.hpp"
#include "support.hpp"

using namespace semtext;

namespace {

std::vector<RerankCandidate> candidates(const std::vector<std::string>& texts) {
    std::vector<RerankCandidate> out;
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({100 + i, texts[i], 0.9 - 0.1 * i, i + 1, 0.0});
    return out;
}

class ConstantScorer final : public RerankScorer {
public:
    std::vector<double> score(std::string_view, std::span<const std::string> c) override {
        return std::vector<double>(c.size(), 0.5);
    }
};

} // namespace

TEST(LexicalOverlap, HandSetArithmetic) {
    // {field, hours, msw} vs {msw, field, hours, policy}: 3 shared of 4
    EXPECT_DOUBLE_EQ(lexical_overlap("field hours MSW", "MSW field hours policy"), 0.75);
    // {field, hours, msw} vs {parking, policy}: nothing shared of 5
    EXPECT_DOUBLE_EQ(lexical_overlap("field hours MSW", "parking policy"), 0.0);
    EXPECT_DOUBLE_EQ(lexical_overlap("a b", "b c d"), 0.25);
}

TEST(Rerank, OverlapPromotesTheRelevantCandidate) {
    LexicalOverlapScorer scorer;
    const auto out = rerank("field hours MSW", candidates({"parking policy", "MSW field hours policy"}), scorer, 2);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].text, "MSW field hours policy");
    EXPECT_EQ(out[0].retrieval_rank, 2u);
    EXPECT_DOUBLE_EQ(out[0].rerank_score, 0.75);
}

TEST(Rerank, SingleCandidateUnchanged) {
    LexicalOverlapScorer scorer;
    const auto in = candidates({"only one"});
    const auto out = rerank("query", in, scorer, 1);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].item_id, in[0].item_id);
    EXPECT_EQ(out[0].retrieval_score, in[0].retrieval_score);
}

TEST(Rerank, EqualScoresKeepRetrievalOrderAndSubset) {
    ConstantScorer scorer;
    const auto in = candidates({"a", "b", "c", "d"});
    const auto out = rerank("q", in, scorer, 3);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(out[i].item_id, in[i].item_id);
    EXPECT_THROW(rerank("q", in, scorer, 5), Error);
    EXPECT_THROW(rerank("q", {}, scorer, 1), Error);
}

TEST(HttpRerank, UsesRemoteScores) {
    testing_support::StubServer stub;
    stub.server.Post("/rerank", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& c : body["candidates"]) scores.push_back(static_cast<double>(c.get<std::string>().size()));
        res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    stub.server.Post("/short", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"scores": [1]})", "application/json");
    });
    stub.start();
    HttpRerankScorer scorer(stub.url("/rerank"), 5000);
    const auto out = rerank("q", candidates({"xx", "xxxx", "x"}), scorer, 3);
    EXPECT_EQ(out[0].text, "xxxx");
    EXPECT_EQ(out[2].text, "x");

    HttpRerankScorer broken(stub.url("/short"), 5000);
    HttpRerankScorer dead("http://127.0.0.1:1/x", 500);
    for (auto* s : {&broken, &dead}) {
        try {
            rerank("q", candidates({"a", "b"}), *s, 2);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::ScorerUnavailable);
        }
    }
}
