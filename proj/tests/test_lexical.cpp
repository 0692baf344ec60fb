#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "semtext/lexical.hpp"
#include "support.hpp"

using namespace semtext;

namespace {

// Dense brute-force tf-idf cosine, written from the formula.
std::vector<std::pair<std::string, double>> brute_force(const std::vector<std::pair<std::string, std::string>>& corpus,
                                                        const std::string& query) {
    auto toks = [](const std::string& s) {
        std::vector<std::string> out;
        std::istringstream in(s);
        for (std::string w; in >> w;) {
            for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            out.push_back(w);
        }
        return out;
    };
    std::map<std::string, int> df;
    for (const auto& d : corpus) {
        auto t = toks(d.second);
        for (const auto& w : std::set<std::string>(t.begin(), t.end())) ++df[w];
    }
    const double n = static_cast<double>(corpus.size());
    auto vec = [&](const std::string& s) {
        std::map<std::string, double> v;
        for (const auto& w : toks(s)) {
            if (df.count(w)) v[w] += std::log((1 + n) / (1 + df[w])) + 1;
        }
        return v;
    };
    auto cos = [](const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (auto& [k, x] : a) {
            na += x * x;
            if (b.count(k)) dot += x * b.at(k);
        }
        for (auto& [k, y] : b) nb += y * y;
        return dot / std::sqrt(na * nb);
    };
    const auto q = vec(query);
    std::vector<std::pair<std::string, double>> out;
    for (const auto& d : corpus) out.emplace_back(d.first, cos(q, vec(d.second)));
    std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; });
    return out;
}

} // namespace

TEST(Dictionary, FlagsWholeWordsCaseInsensitively) {
    const auto dict = make_dictionary("firearms", {"gun", "firearm", "rifle"});
    const auto hit = dictionary_flag(dict, "A rifle was found.");
    EXPECT_TRUE(hit.flagged);
    ASSERT_EQ(hit.hits.size(), 1u);
    EXPECT_EQ(hit.hits[0].term, "rifle");
    EXPECT_EQ(hit.hits[0].offset, 2u);

    EXPECT_FALSE(dictionary_flag(dict, "Colt attends school regularly.").flagged);
    EXPECT_FALSE(dictionary_flag(make_dictionary("g", {"gun"}), "shotgunner").flagged);

    const auto upper = dictionary_flag(dict, "GUN and Firearm; gun.");
    ASSERT_EQ(upper.hits.size(), 3u);
    EXPECT_EQ(upper.hits[0].offset, 0u);
    EXPECT_EQ(upper.hits[1].offset, 8u);
    EXPECT_EQ(upper.hits[2].offset, 17u);
}

TEST(Dictionary, LoadsTermFile) {
    const auto dict = load_dictionary(testing_support::data_dir() / "firearm_terms.txt");
    EXPECT_TRUE(dict.terms.contains("rifle"));
    EXPECT_FALSE(dict.terms.contains("colt"));
}

TEST(Tfidf, WorkedExample) {
    const auto index = build_tfidf({{"d1", "a b"}, {"d2", "a c"}});
    const auto& m = index.model;
    EXPECT_NEAR(m.idf[m.vocabulary.at("a")], 1.0, 1e-12);
    EXPECT_NEAR(m.idf[m.vocabulary.at("b")], 1.405465108, 1e-9);
    EXPECT_NEAR(m.idf[m.vocabulary.at("c")], std::log(1.5) + 1.0, 1e-12);
    const auto& d1 = index.doc_vectors[0];
    ASSERT_EQ(d1.size(), 2u);
    EXPECT_NEAR(d1[0].second, 0.579739, 1e-6);
    EXPECT_NEAR(d1[1].second, 0.814802, 1e-6);
}

TEST(Tfidf, SingleDocumentIdfIsOne) {
    const auto index = build_tfidf({{"only", "x y z x"}});
    for (double w : index.model.idf) EXPECT_EQ(w, 1.0);
    EXPECT_THROW(build_tfidf({}), Error);
}

TEST(Tfidf, OutOfVocabularyQueries) {
    const auto index = build_tfidf({{"d1", "a b"}, {"d2", "a c"}});
    EXPECT_TRUE(tfidf_search(index, "zzz qqq", 5).empty());
    EXPECT_EQ(index.model.vectorize("b zzz"), index.model.vectorize("b"));
}

TEST(Tfidf, ExactDocumentTextRanksFirst) {
    const std::vector<std::pair<std::string, std::string>> corpus{
        {"d1", "housing support for families"}, {"d2", "elder care and support"}, {"d3", "rifle safety course"}};
    const auto index = build_tfidf(corpus);
    const auto r = tfidf_search(index, "elder care and support", 3);
    ASSERT_FALSE(r.empty());
    EXPECT_EQ(r[0].item_id, "d2");
    EXPECT_NEAR(r[0].score, 1.0, 1e-12);
}

TEST(Tfidf, MatchesBruteForceEnumeration) {
    const std::vector<std::pair<std::string, std::string>> corpus{{"x", "a a b"}, {"y", "a c"}, {"z", "b c d"}};
    const auto index = build_tfidf(corpus);
    for (const std::string q : {"a", "b", "a d", "c c b"}) {
        const auto got = tfidf_search(index, q, 3);
        auto want = brute_force(corpus, q);
        ASSERT_EQ(got.size(), want.size()) << q;
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].item_id, want[i].first) << q;
            EXPECT_NEAR(got[i].score, want[i].second, 1e-12) << q;
        }
    }
}

TEST(Tfidf, DistinctSingleWordDocs) {
    const auto index = build_tfidf({{"1", "apple"}, {"2", "pear"}, {"3", "plum"}});
    for (const auto& [id, word] : std::vector<std::pair<std::string, std::string>>{{"1", "apple"}, {"2", "pear"}, {"3", "plum"}}) {
        EXPECT_EQ(tfidf_search(index, word, 1).at(0).item_id, id);
    }
}
