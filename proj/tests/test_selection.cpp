#include <algorithm>
#include <map>

#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "granur/error.hpp"
#include "granur/selection.hpp"

using namespace granur;

namespace {

// One document of 16 single-token finest chunks: level sizes 16, 8, 4, 2, 1.
GranularityIndexSet sixteen() {
    std::string text;
    for (int i = 0; i < 16; ++i) text += (i ? " c" : "c") + std::to_string(i);
    const std::vector<ChunkPyramid> p{build_pyramid(Document{"doc", "", text}, 1, 5)};
    return build_mog_indexset(p);
}

void check_against_oracle(const GranularityIndexSet& set, const LevelHits& hits, const std::vector<double>& w,
                          std::size_t k, LevelRule rule) {
    const auto want = oracle::select(set, hits, w, k, rule);
    const auto matrix = build_relevance_matrix(set, hits);
    if (want.empty()) {
        CHECK(matrix.empty());
        return;
    }
    const auto got = select(set, matrix, w, k, rule);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].chunk_r == want[i].unit);
        CHECK(got[i].g_r == want[i].level);
        CHECK(got[i].snippet_ordinal == want[i].snippet_ordinal);
        CHECK(got[i].fused_score == want[i].fused);
        CHECK(got[i].snippet == set.level(got[i].g_r).chunks[got[i].snippet_ordinal]);
    }
}

}  // namespace

TEST_CASE("a single level-3 hit expands to four rows") {
    const auto set = sixteen();
    LevelHits hits(5);
    hits[2] = {Hit{1, 2.5}};
    const auto m = build_relevance_matrix(set, hits);
    REQUIRE(m.size() == 4);
    for (std::uint32_t u = 4; u < 8; ++u) {
        CHECK(m.row(u).scores == std::vector<double>{0, 0, 2.5, 0, 0});
        CHECK(m.row(u).source[2] == 1u);
    }
    const std::vector<double> w{0.9, 0.9, 0.1, 0.9, 0.9};
    const auto r = select(set, m, w, 1);
    REQUIRE(r.size() == 1);
    CHECK(r[0].chunk_r == 4);
    CHECK(r[0].g_r == 3);
    CHECK(r[0].snippet.members == std::vector<std::uint32_t>{4, 5, 6, 7});
}

TEST_CASE("no hits give an empty matrix") {
    const auto set = sixteen();
    const auto m = build_relevance_matrix(set, LevelHits(5));
    CHECK(m.empty());
    CHECK_THROWS_AS(select(set, m, std::vector<double>(5, 0.5), 3), Error);
    CHECK_THROWS_AS(build_relevance_matrix(set, LevelHits(4)), Error);
    LevelHits bad(5);
    bad[4] = {Hit{1, 1.0}};
    CHECK_THROWS_AS(build_relevance_matrix(set, bad), Error);
}

TEST_CASE("red and blue chunks walkthrough") {
    const auto set = sixteen();
    LevelHits hits(5);
    hits[0] = {Hit{2, 5.0}, Hit{9, 0.5}};  // red finest chunk 2; a weak level-1 hit on blue 9
    hits[1] = {Hit{1, 4.0}};               // red's level-2 container
    hits[2] = {Hit{2, 6.0}};               // blue's level-3 container, finest 8..11
    hits[3] = {Hit{0, 2.0}};               // red's level-4 container
    const std::vector<double> w{0.1, 0.2, 0.9, 0.3, 0.1};

    const auto m = build_relevance_matrix(set, hits);
    CHECK(m.row(2).scores == std::vector<double>{5, 4, 0, 2, 0});
    CHECK(m.row(3).scores == std::vector<double>{0, 4, 0, 2, 0});
    CHECK(m.row(9).scores == std::vector<double>{0.5, 0, 6, 0, 0});
    CHECK(m.row(8).scores == std::vector<double>{0, 0, 6, 0, 0});
    CHECK(m.size() == 12);  // 0..7 via level 4, 8..11 via level 3

    const auto r = select(set, m, w, 3);
    REQUIRE(r.size() == 3);
    CHECK(r[0].chunk_r == 9);
    CHECK(r[0].fused_score == doctest::Approx(0.05 + 5.4));
    CHECK(r[0].g_r == 3);
    CHECK(r[0].snippet.text == "c8 c9 c10 c11");
    CHECK(r[1].chunk_r == 8);
    CHECK(r[2].chunk_r == 10);

    // Red on its own: retrieved at levels 1, 2 and 4, so level 4 wins by weight.
    const auto red = select(set, m, w, 12);
    const auto it = std::find_if(red.begin(), red.end(), [](const SelectionResult& s) { return s.chunk_r == 2; });
    REQUIRE(it != red.end());
    CHECK(it->g_r == 4);
    CHECK(it->snippet.members.size() == 8);

    // The weight-only rule picks level 3 for red even though it was never
    // retrieved there, and returns the home chunk.
    const auto lit = select(set, m, w, 12, LevelRule::weight_only);
    const auto jt = std::find_if(lit.begin(), lit.end(), [](const SelectionResult& s) { return s.chunk_r == 2; });
    REQUIRE(jt != lit.end());
    CHECK(jt->g_r == 3);
    CHECK(jt->snippet.text == "c0 c1 c2 c3");
}

TEST_CASE("select agrees with the exhaustive oracle") {
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
        const auto inst = fixture::selection_instance(seed, 5, 60);
        for (std::size_t k_r : {1, 3, 8}) {
            const auto hits = search_all_levels(inst.set, inst.query, k_r);
            for (auto rule : {LevelRule::containment, LevelRule::weight_only})
                check_against_oracle(inst.set, hits, inst.w, 1 + seed % 4, rule);
        }
    }
}

TEST_CASE("results are a prefix in k and invariant to scaling w") {
    for (std::uint64_t seed = 200; seed < 260; ++seed) {
        const auto inst = fixture::selection_instance(seed, 5, 80);
        const auto m = build_relevance_matrix(inst.set, search_all_levels(inst.set, inst.query, 3));
        if (m.empty()) continue;
        const auto big = select(inst.set, m, inst.w, 10);
        for (std::size_t k = 1; k < 10; ++k) {
            const auto small = select(inst.set, m, inst.w, k);
            REQUIRE(small.size() <= big.size());
            for (std::size_t i = 0; i < small.size(); ++i) CHECK(small[i].chunk_r == big[i].chunk_r);
        }
        auto scaled = inst.w;
        for (auto& x : scaled) x *= 0.37;
        const auto s = select(inst.set, m, scaled, 10);
        REQUIRE(s.size() == big.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s[i].chunk_r == big[i].chunk_r);
            CHECK(s[i].g_r == big[i].g_r);
        }
        // Containment: the snippet covers chunk_r.
        for (const auto& r : big) {
            const auto& mem = r.snippet.members;
            CHECK(std::find(mem.begin(), mem.end(), r.chunk_r) != mem.end());
        }
    }
}

TEST_CASE("select validates w and k") {
    const auto set = sixteen();
    LevelHits hits(5);
    hits[0] = {Hit{0, 1.0}};
    const auto m = build_relevance_matrix(set, hits);
    CHECK_THROWS_AS(select(set, m, std::vector<double>(4, 0.5), 1), Error);
    CHECK_THROWS_AS(select(set, m, std::vector<double>(5, 0.5), 0), Error);
}

TEST_CASE("retrieve composes router, search and selection") {
    const auto inst = fixture::selection_instance(3, 5, 50);
    const HashedTfidfEmbedder emb(16);
    const auto router = RouterModel::initialize({16, 8, 5}, 4);
    const auto via_router = retrieve(inst.set, router, emb, inst.query, {});
    const auto w = forward(router, emb.embed(inst.query));
    CHECK(via_router.size() == retrieve_weighted(inst.set, w, inst.query, {}).size());
    const auto wrong = RouterModel::initialize({16, 8, 4}, 4);
    CHECK_THROWS_AS(retrieve(inst.set, wrong, emb, inst.query, {}), Error);
    CHECK(retrieve_weighted(inst.set, w, "nomatch nowhere", {}).empty());
}

namespace {

SelectionResult scored(const std::string& doc, std::uint32_t ord, double s) {
    SelectionResult r;
    r.unit = Unit{doc, ord};
    r.fused_score = s;
    r.snippet.text = doc + "#" + std::to_string(ord);
    return r;
}

}  // namespace

TEST_CASE("fuse_corpora keeps the global top") {
    const std::vector<CorpusResults> two{{"a", {scored("x", 0, 3.0)}}, {"b", {scored("y", 0, 1.0)}}};
    auto f = fuse_corpora(two, 2);
    REQUIRE(f.size() == 2);
    CHECK(f[0].corpus_id == "a");
    CHECK(fuse_corpora(two, 1).size() == 1);
    CHECK(fuse_corpora(two, 5).size() == 2);
    CHECK_THROWS_AS(fuse_corpora(two, 0), Error);

    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<CorpusResults> per;
        std::vector<CorpusResult> flat;
        for (const char* id : {"pubmed", "statpearls", "textbooks"}) {
            CorpusResults c{id, {}};
            for (int i = 0; i < 3; ++i) {
                c.results.push_back(scored("d" + std::to_string(rng.below(3)), static_cast<std::uint32_t>(rng.below(4)),
                                           static_cast<double>(rng.below(4))));
                flat.push_back(CorpusResult{id, c.results.back()});
            }
            per.push_back(std::move(c));
        }
        std::stable_sort(flat.begin(), flat.end(), [](const CorpusResult& a, const CorpusResult& b) {
            return std::tie(b.result.fused_score, a.corpus_id, a.result.unit.doc_id, a.result.unit.ordinal) <
                   std::tie(a.result.fused_score, b.corpus_id, b.result.unit.doc_id, b.result.unit.ordinal);
        });
        const auto got = fuse_corpora(per, 4);
        REQUIRE(got.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(got[i].corpus_id == flat[i].corpus_id);
            CHECK(got[i].result.snippet.text == flat[i].result.snippet.text);
            CHECK(got[i].result.fused_score == flat[i].result.fused_score);
        }
    }
}

TEST_CASE("assemble_context prefixes sources and cuts at whitespace") {
    auto a = scored("d1", 0, 2.0);
    a.g_r = 3;
    a.snippet.text = "alpha beta gamma";
    auto b = scored("d2", 1, 1.0);
    b.snippet.text = "delta epsilon";
    const std::vector<CorpusResult> rs{{"pubmed", a}, {"books", b}};
    CHECK(assemble_context(rs, 1000) == "[source: pubmed/d1/3] alpha beta gamma\n\n[source: books/d2/1] delta epsilon");
    CHECK(assemble_context(rs, 33) == "[source: pubmed/d1/3] alpha beta");
    CHECK(assemble_context(rs, 38) == "[source: pubmed/d1/3] alpha beta gamma");
    CHECK(assemble_context(rs, 3).size() <= 3);
    CHECK_THROWS_AS(assemble_context(rs, 0), Error);

    auto c = scored("d", 0, 1.0);
    c.snippet.text = "ééééé";
    const auto cut = assemble_context(std::vector<CorpusResult>{{"x", c}}, 22);
    CHECK(cut.size() <= 22);
    CHECK((static_cast<unsigned char>(cut.back()) & 0xC0) != 0xC0);
}
