#include <cmath>
#include <cstring>

#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "granur/error.hpp"
#include "granur/index.hpp"
#include "granur/io.hpp"
#include "granur/text.hpp"

using namespace granur;

namespace {

std::vector<ChunkId> refs_for(std::size_t n) {
    std::vector<ChunkId> refs;
    for (std::size_t i = 0; i < n; ++i) refs.push_back(ChunkId{"d", 1, static_cast<std::uint32_t>(i)});
    return refs;
}

}  // namespace

TEST_CASE("bm25 hand-computed score") {
    const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"a", "c", "c"}, {"d"}};
    const auto index = Bm25Index::build(docs, {}, refs_for(3));
    const double idf = std::log(8.0 / 3.0);
    const double expected = idf * 2.0 * 2.2 / (2.0 + 1.2 * (0.25 + 0.75 * 1.5));
    const auto hits = index.search("c", 5);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].ordinal == 1);
    CHECK(hits[0].score == doctest::Approx(expected).epsilon(1e-12));
    CHECK(index.idf("c") == doctest::Approx(idf).epsilon(1e-12));
    CHECK(index.idf("zzz") > 0.0);
    CHECK(index.search("zzz", 3).empty());
}

TEST_CASE("repeated query terms count once") {
    const std::vector<std::vector<std::string>> docs{{"a", "b"}, {"b", "c"}};
    const auto index = Bm25Index::build(docs, {}, refs_for(2));
    const auto once = index.search("a", 2);
    const auto twice = index.search("a a A", 2);
    CHECK(once == twice);
}

TEST_CASE("ties rank by ascending ordinal") {
    const std::vector<std::vector<std::string>> docs{{"x", "y"}, {"z"}, {"x", "y"}, {"x", "y"}};
    const auto hits = Bm25Index::build(docs, {}, refs_for(4)).search("x", 2);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].ordinal == 0);
    CHECK(hits[1].ordinal == 2);
}

TEST_CASE("search matches the brute-force oracle on random corpora") {
    Rng rng(7);
    const auto vocab = fixture::vocabulary(30);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::vector<std::string>> docs(1 + rng.below(40));
        for (auto& d : docs) d = tokenize(fixture::random_text(rng, vocab, 1 + rng.below(25)));
        const Bm25Params params{0.5 + rng.uniform01(), rng.uniform01()};
        const auto index = Bm25Index::build(docs, params, refs_for(docs.size()));
        const auto query = tokenize(fixture::random_text(rng, vocab, 1 + rng.below(6)));
        const std::size_t k = 1 + rng.below(10);
        const auto got = index.search_tokens(query, k);
        const auto want = oracle::bm25_top(docs, query, k, params.k1, params.b);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].ordinal == want[i].ordinal);
            CHECK(std::abs(got[i].score - want[i].score) <= 1e-9);
            CHECK(std::abs(index.score(query, got[i].ordinal) - want[i].score) <= 1e-9);
        }
    }
}

TEST_CASE("empty corpus is rejected") {
    std::vector<std::vector<std::string>> none;
    CHECK_THROWS_AS(Bm25Index::build(none, {}, {}), Error);
    std::vector<std::vector<std::string>> blank{{}};
    CHECK_THROWS_AS(Bm25Index::build(blank, {}, refs_for(1)), Error);
}

TEST_CASE("index save and load round-trip bit-exactly") {
    Rng rng(3);
    const auto vocab = fixture::vocabulary(50);
    std::vector<std::vector<std::string>> docs(60);
    for (auto& d : docs) d = tokenize(fixture::random_text(rng, vocab, 1 + rng.below(40)));
    const auto index = Bm25Index::build(docs, Bm25Params{0.9, 0.4}, refs_for(docs.size()));
    fixture::TempDir dir("idx");
    index.save(dir.path());
    const auto loaded = Bm25Index::load(dir.path());
    CHECK(loaded == index);
    CHECK(loaded.avg_dl() == index.avg_dl());
    CHECK(loaded.search("w1 w2 w3", 10) == index.search("w1 w2 w3", 10));

    const auto bin = io::read_file(dir / "postings.bin");
    CHECK(bin.substr(0, 8) == "GBM25PL1");
    std::uint32_t n_chunks = 0;
    std::memcpy(&n_chunks, bin.data() + 8, 4);
    CHECK(n_chunks == 60);

    // A truncated postings file must not load.
    io::write_file_atomic(dir / "postings.bin", bin.substr(0, bin.size() - 3));
    CHECK_THROWS_AS(Bm25Index::load(dir.path()), Error);
}

TEST_CASE("search_batch is identical serial and parallel") {
    Rng rng(11);
    const auto vocab = fixture::vocabulary(40);
    std::vector<std::vector<std::string>> docs(200), queries(100);
    for (auto& d : docs) d = tokenize(fixture::random_text(rng, vocab, 5 + rng.below(30)));
    for (auto& q : queries) q = tokenize(fixture::random_text(rng, vocab, 1 + rng.below(5)));
    const auto index = Bm25Index::build(docs, {}, refs_for(docs.size()));
    CHECK(search_batch(index, queries, 5, Exec::serial) == search_batch(index, queries, 5, Exec::parallel));
}

TEST_CASE("mog index set mirrors the pyramids") {
    Rng rng(5);
    const auto vocab = fixture::vocabulary(20);
    const auto docs = fixture::random_docs(rng, 4, 5, 40, vocab);
    const auto pyr = fixture::pyramids(docs, 4, 3);
    const auto set = build_mog_indexset(pyr);
    CHECK(set.kind() == IndexKind::mog);
    CHECK(set.n_gra() == 3);
    std::size_t finest = 0;
    for (const auto& p : pyr) finest += p.finest_count();
    CHECK(set.units().size() == finest);

    for (int g = 1; g <= 3; ++g) {
        const auto& lv = set.level(g);
        CHECK(lv.index.size() == lv.chunks.size());
        CHECK(lv.home.size() == set.units().size());
        for (std::uint32_t u = 0; u < set.units().size(); ++u) {
            const auto& home = lv.chunks[lv.home[u]];
            CHECK(std::find(home.members.begin(), home.members.end(), u) != home.members.end());
            CHECK(home.id.doc_id == set.units()[u].doc_id);
        }
    }
    CHECK(set.prefix(2).n_gra() == 2);
    CHECK(set.prefix(2).level(2) == set.level(2));
    CHECK_THROWS_AS(set.prefix(4), Error);
    CHECK_THROWS_AS(set.level(0), Error);

    fixture::TempDir dir("set");
    set.save(dir / "s");
    CHECK(GranularityIndexSet::load(dir / "s") == set);
    CHECK(std::filesystem::exists(dir / "s" / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "s" / "level_3" / "postings.bin"));
}

TEST_CASE("search_all_levels searches every level independently") {
    Rng rng(9);
    const auto vocab = fixture::vocabulary(15);
    const auto docs = fixture::random_docs(rng, 3, 10, 30, vocab);
    const auto set = build_mog_indexset(fixture::pyramids(docs, 3, 4));
    const auto hits = search_all_levels(set, "w1 w4", 2);
    REQUIRE(hits.size() == 4);
    for (int g = 1; g <= 4; ++g) CHECK(hits[static_cast<std::size_t>(g - 1)] == set.level(g).index.search("w1 w4", 2));
}
