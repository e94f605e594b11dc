#include <limits>
#include <set>

#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"
#include "granur/error.hpp"
#include "granur/graph.hpp"
#include "granur/text.hpp"

using namespace granur;

namespace {

std::vector<SnippetNode> nodes_of(const std::vector<std::string>& texts) {
    std::vector<SnippetNode> nodes;
    for (std::size_t i = 0; i < texts.size(); ++i)
        nodes.push_back(SnippetNode{static_cast<std::uint32_t>(i), "d", texts[i],
                                    static_cast<std::uint32_t>(tokenize(texts[i]).size())});
    return nodes;
}

SnippetGraph graph_of(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n; ++i) texts.push_back("n" + std::to_string(i));
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (auto [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());
    return SnippetGraph(nodes_of(texts), std::move(adj), 3, 0.0);
}

std::vector<std::vector<std::string>> tokens_of(const std::vector<SnippetNode>& nodes) {
    std::vector<std::vector<std::string>> out;
    for (const auto& n : nodes) out.push_back(tokenize(n.text));
    return out;
}

}  // namespace

TEST_CASE("nodes group sentences per document") {
    const std::vector<Document> docs{{"a", "", "S1. S2. S3. S4. S5."}, {"b", "", "T1! T2?"}};
    const auto two = build_nodes(docs, 2);
    REQUIRE(two.size() == 4);
    CHECK(two[0].text == "S1. S2.");
    CHECK(two[2].text == "S5.");
    CHECK(two[2].token_count == 1);
    CHECK(two[3].doc_id == "b");
    for (std::uint32_t i = 0; i < two.size(); ++i) CHECK(two[i].node_id == i);
    CHECK(build_nodes(docs, 1).size() == 7);
    CHECK_THROWS_AS(build_nodes(docs, 3), Error);
    CHECK_THROWS_AS(build_nodes({}, 2), Error);
}

TEST_CASE("an infinite threshold leaves the graph edgeless") {
    const auto g = build_graph(nodes_of({"a b", "a b", "b c"}), 3, std::numeric_limits<double>::infinity());
    CHECK(g.edge_count() == 0);
}

TEST_CASE("two identical nodes share one edge") {
    const auto g = build_graph(nodes_of({"same words here", "same words here"}), 3, 0.0);
    CHECK(g.edge_count() == 1);
    CHECK(g.neighbors(0) == std::vector<std::uint32_t>{1});
}

TEST_CASE("graph build matches the all-pairs oracle") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed);
        const auto vocab = fixture::vocabulary(8 + rng.below(10));
        std::vector<std::string> texts;
        const auto n = 6 + rng.below(15);
        for (std::size_t i = 0; i < n; ++i) texts.push_back(fixture::random_text(rng, vocab, 2 + rng.below(8)));
        const auto nodes = nodes_of(texts);
        const int k = 1 + static_cast<int>(rng.below(4));
        const double t = rng.below(2) ? 0.0 : rng.uniform(0.0, 3.0);
        const auto g = build_graph(nodes, k, t);
        CHECK(g.adjacency() == oracle::knn_graph(tokens_of(nodes), k, t));
        const auto proposals = propose_edges(nodes, k, t);
        for (const auto& p : proposals) CHECK(p.size() <= static_cast<std::size_t>(k));
    }
}

TEST_CASE("graph build is identical serial and parallel") {
    Rng rng(3);
    const auto vocab = fixture::vocabulary(30);
    std::vector<std::string> texts;
    for (int i = 0; i < 300; ++i) texts.push_back(fixture::random_text(rng, vocab, 3 + rng.below(10)));
    const auto nodes = nodes_of(texts);
    CHECK(build_graph(nodes, 3, 0.0, {}, Exec::serial) == build_graph(nodes, 3, 0.0, {}, Exec::parallel));
}

TEST_CASE("hoods are BFS balls") {
    const auto path = graph_of(3, {{0, 1}, {1, 2}});
    CHECK(hood(path, 1, 0).member_nodes == std::vector<std::uint32_t>{1});
    CHECK(hood(path, 1, 1).member_nodes == std::vector<std::uint32_t>{1, 0, 2});
    CHECK(hood(path, 1, 1).text == "n1 n0 n2");

    const auto cycle = graph_of(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    CHECK(hood(cycle, 0, 2).member_nodes == std::vector<std::uint32_t>{0, 1, 3, 2});
    CHECK(hood(cycle, 0, 9).member_nodes.size() == 4);
    CHECK_THROWS_AS(hood(cycle, 4, 1), Error);
    CHECK_THROWS_AS(hood(cycle, 0, -1), Error);
}

TEST_CASE("hoods match the distance oracle and grow monotonically") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng(seed + 100);
        const auto n = 2 + rng.below(20);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
        for (std::size_t e = 0; e < n; ++e) {
            const auto a = static_cast<std::uint32_t>(rng.below(n)), b = static_cast<std::uint32_t>(rng.below(n));
            if (a != b) edges.emplace_back(a, b);
        }
        std::set<std::pair<std::uint32_t, std::uint32_t>> uniq;
        for (auto [a, b] : edges) uniq.insert({std::min(a, b), std::max(a, b)});
        const auto g = graph_of(n, {uniq.begin(), uniq.end()});
        for (std::uint32_t c = 0; c < n; ++c) {
            std::set<std::uint32_t> prev;
            for (int h = 0; h < 5; ++h) {
                const auto members = hood(g, c, h).member_nodes;
                CHECK(members == oracle::ball(g.adjacency(), c, h));
                CHECK(members.front() == c);
                const std::set<std::uint32_t> now(members.begin(), members.end());
                CHECK(now.size() == members.size());
                CHECK(std::includes(now.begin(), now.end(), prev.begin(), prev.end()));
                prev = now;
            }
        }
    }
}

TEST_CASE("graph constructor rejects malformed adjacency") {
    const auto nodes = nodes_of({"a", "b"});
    CHECK_THROWS_AS(SnippetGraph(nodes, {{1}, {}}, 3, 0.0), Error);
    CHECK_THROWS_AS(SnippetGraph(nodes, {{0}, {}}, 3, 0.0), Error);
    CHECK_THROWS_AS(SnippetGraph(nodes, {{1}}, 3, 0.0), Error);
    CHECK_NOTHROW(SnippetGraph(nodes, {{1}, {0}}, 3, 0.0));
}

TEST_CASE("graph files round-trip") {
    Rng rng(5);
    const auto vocab = fixture::vocabulary(10);
    std::vector<std::string> texts;
    for (int i = 0; i < 20; ++i) texts.push_back(fixture::random_text(rng, vocab, 4));
    const auto g = build_graph(nodes_of(texts), 2, 0.0);
    fixture::TempDir dir("graph");
    g.save(dir / "g.jsonl");
    CHECK(SnippetGraph::load(dir / "g.jsonl") == g);

    const auto edgeless = build_graph(nodes_of(texts), 2, std::numeric_limits<double>::infinity());
    edgeless.save(dir / "e.jsonl");
    CHECK(SnippetGraph::load(dir / "e.jsonl") == edgeless);
}

TEST_CASE("graph index set levels are hop neighborhoods") {
    const auto g = graph_of(6, {{0, 1}, {1, 2}, {2, 3}, {4, 5}});
    const auto set = build_graph_indexset(g, 3);
    CHECK(set.kind() == IndexKind::mogg);
    CHECK(set.units().size() == 6);
    for (int lv = 1; lv <= 3; ++lv) {
        REQUIRE(set.level(lv).chunks.size() == 6);
        for (std::uint32_t c = 0; c < 6; ++c) {
            CHECK(set.level(lv).chunks[c].members == oracle::ball(g.adjacency(), c, lv - 1));
            CHECK(set.level(lv).home[c] == c);
        }
    }
    CHECK(set.level(1).chunks[2].text == "n2");
    CHECK(set.level(2).chunks[2].text == "n2 n1 n3");

    const auto one = build_graph_indexset(g, 1);
    CHECK(one.n_gra() == 1);
    const auto flat = build_graph_indexset(graph_of(6, {}), 4);
    for (int lv = 2; lv <= 4; ++lv) {
        for (std::uint32_t c = 0; c < 6; ++c) CHECK(flat.level(lv).chunks[c].text == flat.level(1).chunks[c].text);
        CHECK(flat.level(lv).index.all_postings() == flat.level(1).index.all_postings());
    }
    CHECK_THROWS_AS(build_graph_indexset(g, 0), Error);
}

TEST_CASE("selection runs unchanged on graph index sets") {
    Rng rng(8);
    const auto vocab = fixture::vocabulary(12);
    std::vector<std::string> texts;
    for (int i = 0; i < 25; ++i) texts.push_back(fixture::random_text(rng, vocab, 5));
    const auto set = build_graph_indexset(build_graph(nodes_of(texts), 2, 0.0), 4);
    for (int q = 0; q < 20; ++q) {
        const auto query = fixture::random_text(rng, vocab, 3);
        const auto hits = search_all_levels(set, query, 3);
        std::vector<double> w;
        for (int g = 0; g < 4; ++g) w.push_back(rng.uniform(0.01, 0.99));
        const auto want = oracle::select(set, hits, w, 3, LevelRule::containment);
        const auto got = select(set, build_relevance_matrix(set, hits), w, 3);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].chunk_r == want[i].unit);
            CHECK(got[i].g_r == want[i].level);
            CHECK(got[i].snippet_ordinal == want[i].snippet_ordinal);
        }
    }
}
