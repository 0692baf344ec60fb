#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "semtext/rag.hpp"
#include "support.hpp"

using namespace semtext;
using testing_support::StubServer;

namespace {

const std::vector<std::string> kChunks{
    "Students complete 900 field hours for the MSW degree.",
    "The library opens at 8 am on weekdays.",
    "Parking permits are sold at the campus police office.",
    "Field placements are arranged by the field education office.",
};

VectorIndex make_index(EmbeddingProvider& provider) {
    VectorIndex index;
    const auto vecs = provider.embed(kChunks);
    for (std::size_t i = 0; i < kChunks.size(); ++i) {
        index.add({i + 1, vecs[i], {{"chunk_id", "c" + std::to_string(i)}, {"doc_id", "d"}, {"text", kChunks[i]}}});
    }
    return index;
}

} // namespace

TEST(Prompt, DefaultTemplateLayout) {
    const std::vector<RetrievedChunk> chunks{{1, "c0", "d", 0.9, "alpha"}, {2, "c1", "d", 0.8, "beta"}};
    const auto prompt = assemble_prompt("why?", chunks, kDefaultPromptTemplate);
    EXPECT_NE(prompt.find("[source c0] alpha\n---\n[source c1] beta"), std::string::npos);
    EXPECT_NE(prompt.find("Question: why?"), std::string::npos);
}

TEST(Prompt, NoContextMarker) {
    const auto prompt = assemble_prompt("q", {}, "{question}|{context}");
    EXPECT_EQ(prompt, "q|NO RELEVANT CONTEXT FOUND");
}

TEST(Prompt, PlaceholdersInsideChunksStayLiteral) {
    const std::vector<RetrievedChunk> chunks{{1, "c", "d", 1.0, "see {question}"}};
    EXPECT_EQ(assemble_prompt("{context}", chunks, "{context}/{question}"), "[source c] see {question}/{context}");
}

TEST(Prompt, TemplateValidation) {
    for (const char* bad : {"{context}", "{question}", "{context}{context}{question}", "plain"}) {
        try {
            validate_template(bad);
            FAIL() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::TemplateInvalid);
        }
    }
    EXPECT_NO_THROW(validate_template("{question} then {context}"));
}

TEST(MockLlm, HashesPrompt) {
    EXPECT_EQ(mock_llm("foobar"), "MOCK:85944171f73967e8");
    EXPECT_EQ(MockLlm{}.complete("x"), mock_llm("x"));
}

TEST(Ask, DeterministicAndGrounded) {
    HashProvider provider(256);
    const auto index = make_index(provider);
    RagConfig cfg;
    cfg.min_score = 0.0;
    MockLlm llm;
    const auto a = ask("How many field hours for the MSW degree?", index, provider, llm, cfg);
    const auto b = ask("How many field hours for the MSW degree?", index, provider, llm, cfg);
    EXPECT_EQ(a, b);
    ASSERT_FALSE(a.sources.empty());
    EXPECT_EQ(a.sources.front().chunk_id, "c0");
    EXPECT_EQ(a.answer_text, mock_llm(a.prompt_used));
    for (std::size_t i = 0; i < a.sources.size(); ++i) {
        EXPECT_NE(a.prompt_used.find(a.sources[i].excerpt), std::string::npos);
        if (i > 0) {
            EXPECT_GE(a.sources[i - 1].score, a.sources[i].score);
        }
    }
    EXPECT_LE(a.sources.size(), cfg.top_k);
}

TEST(Ask, ThresholdFiltersEverything) {
    HashProvider provider(256);
    const auto index = make_index(provider);
    RagConfig cfg;
    cfg.min_score = 0.999;
    MockLlm llm;
    const auto a = ask("zebra quantum", index, provider, llm, cfg);
    EXPECT_TRUE(a.sources.empty());
    EXPECT_NE(a.prompt_used.find("NO RELEVANT CONTEXT FOUND"), std::string::npos);
}

TEST(Ask, Errors) {
    HashProvider provider(256);
    const auto index = make_index(provider);
    MockLlm llm;
    RagConfig cfg;
    HashProvider other(64);
    try {
        ask("q", index, other, llm, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ModelMismatch);
    }
    EXPECT_THROW(ask("  ", index, provider, llm, cfg), Error);
    VectorIndex empty;
    try {
        ask("q", empty, provider, llm, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotFound);
    }
    cfg.prompt_template = "no placeholders";
    EXPECT_THROW(ask("q", index, provider, llm, cfg), Error);
}

TEST(HttpLlm, CompletesAndFails) {
    StubServer stub;
    std::string seen;
    stub.server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body).at("messages").at(0).at("content").get<std::string>();
        res.set_content(R"({"choices":[{"message":{"content":"forty"}}]})", "application/json");
    });
    stub.server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    stub.start();
    LlmConfig cfg{LlmKind::Http, stub.url("/chat"), "m", "", 5000, 0};
    HttpLlm llm(cfg);
    EXPECT_EQ(llm.complete("prompt text"), "forty");
    EXPECT_EQ(seen, "prompt text");
    cfg.endpoint_url = stub.url("/down");
    HttpLlm down(cfg);
    try {
        down.complete("x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LlmUnavailable);
    }
}
