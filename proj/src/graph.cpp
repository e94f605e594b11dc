#include "granur/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

#include "granur/error.hpp"
#include "granur/io.hpp"
#include "granur/text.hpp"

namespace granur {

using nlohmann::json;

std::vector<SnippetNode> build_nodes(std::span<const Document> docs, int sentences_per_node) {
    if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents");
    if (sentences_per_node != 1 && sentences_per_node != 2)
        throw Error(ErrorCode::InvalidArgument, "sentences_per_node must be 1 or 2");
    std::vector<SnippetNode> nodes;
    const auto per = static_cast<std::size_t>(sentences_per_node);
    for (const auto& doc : docs) {
        const auto sentences = split_sentences(doc.text);
        if (sentences.empty()) throw Error(ErrorCode::EmptyDocument, "document '" + doc.doc_id + "' has no sentences");
        for (std::size_t i = 0; i < sentences.size(); i += per) {
            const auto last = std::min(sentences.size(), i + per);
            std::vector<std::string> group(sentences.begin() + static_cast<std::ptrdiff_t>(i),
                                           sentences.begin() + static_cast<std::ptrdiff_t>(last));
            SnippetNode node{static_cast<std::uint32_t>(nodes.size()), doc.doc_id, join(group, " "), 0};
            node.token_count = static_cast<std::uint32_t>(tokenize(node.text).size());
            nodes.push_back(std::move(node));
        }
    }
    return nodes;
}

SnippetGraph::SnippetGraph(std::vector<SnippetNode> nodes, std::vector<std::vector<std::uint32_t>> adjacency,
                           int k_graph, double t_graph)
    : nodes_(std::move(nodes)), adjacency_(std::move(adjacency)), k_graph_(k_graph), t_graph_(t_graph) {
    if (adjacency_.size() != nodes_.size())
        throw Error(ErrorCode::InvalidArgument, "adjacency size differs from node count");
    for (std::size_t u = 0; u < nodes_.size(); ++u) {
        if (nodes_[u].node_id != u) throw Error(ErrorCode::InvalidArgument, "node ids must be dense 0..N-1");
        const auto& adj = adjacency_[u];
        for (std::size_t i = 0; i < adj.size(); ++i) {
            const auto v = adj[i];
            if (v >= nodes_.size() || v == u) throw Error(ErrorCode::InvalidArgument, "invalid neighbor");
            if (i && adj[i - 1] >= v) throw Error(ErrorCode::InvalidArgument, "adjacency must be sorted and unique");
            if (!std::binary_search(adjacency_[v].begin(), adjacency_[v].end(), static_cast<std::uint32_t>(u)))
                throw Error(ErrorCode::InvalidArgument, "adjacency is not symmetric");
        }
    }
}

std::size_t SnippetGraph::edge_count() const noexcept {
    std::size_t degree_sum = 0;
    for (const auto& adj : adjacency_) degree_sum += adj.size();
    return degree_sum / 2;
}

void SnippetGraph::save(const std::filesystem::path& path) const {
    json threshold = std::isinf(t_graph_) ? json("inf") : json(t_graph_);
    std::string out = json{{"n_nodes", nodes_.size()}, {"k_graph", k_graph_}, {"t_graph", threshold}}.dump() + "\n";
    for (std::size_t u = 0; u < nodes_.size(); ++u)
        out += json{{"id", u}, {"doc", nodes_[u].doc_id}, {"text", nodes_[u].text}, {"adj", adjacency_[u]}}.dump() + "\n";
    io::write_file_atomic(path, out);
}

SnippetGraph SnippetGraph::load(const std::filesystem::path& path) {
    std::vector<SnippetNode> nodes;
    std::vector<std::vector<std::uint32_t>> adjacency;
    std::size_t n_nodes = 0;
    int k_graph = 0;
    double t_graph = 0.0;
    bool header = true;
    io::for_each_line(path, [&](std::string_view line, std::size_t number) {
        const auto where = path.string() + ":" + std::to_string(number);
        try {
            auto j = json::parse(line);
            if (header) {
                n_nodes = j.at("n_nodes").get<std::size_t>();
                k_graph = j.at("k_graph").get<int>();
                const auto& t = j.at("t_graph");
                t_graph = (t.is_string() && t.get<std::string>() == "inf") || t.is_null()
                              ? std::numeric_limits<double>::infinity()
                              : t.get<double>();
                header = false;
                return;
            }
            if (j.at("id").get<std::size_t>() != nodes.size())
                throw Error(ErrorCode::MalformedFile, where + ": node ids must be dense and ordered");
            SnippetNode node{static_cast<std::uint32_t>(nodes.size()), j.at("doc").get<std::string>(),
                             j.at("text").get<std::string>(), 0};
            node.token_count = static_cast<std::uint32_t>(tokenize(node.text).size());
            nodes.push_back(std::move(node));
            adjacency.push_back(j.at("adj").get<std::vector<std::uint32_t>>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::MalformedFile, where + ": " + e.what());
        }
    });
    if (header || nodes.size() != n_nodes)
        throw Error(ErrorCode::MalformedFile, path.string() + ": node count differs from header");
    try {
        return SnippetGraph(std::move(nodes), std::move(adjacency), k_graph, t_graph);
    } catch (const Error& e) {
        throw Error(ErrorCode::MalformedFile, path.string() + ": " + e.what());
    }
}

std::vector<std::vector<std::uint32_t>> propose_edges(const std::vector<SnippetNode>& nodes, int k_graph,
                                                      double t_graph, Bm25Params params, Exec exec) {
    if (nodes.empty()) throw Error(ErrorCode::EmptyCorpus, "graph needs at least one node");
    if (k_graph < 1) throw Error(ErrorCode::InvalidArgument, "k_graph must be >= 1");
    std::vector<std::vector<std::string>> tokens(nodes.size());
    std::vector<ChunkId> refs;
    refs.reserve(nodes.size());
    for (std::size_t u = 0; u < nodes.size(); ++u) {
        tokens[u] = tokenize(nodes[u].text);
        refs.push_back(ChunkId{nodes[u].doc_id, 1, nodes[u].node_id});
    }
    const auto index = Bm25Index::build(tokens, params, std::move(refs));
    const auto k = static_cast<std::size_t>(k_graph);

    std::vector<std::vector<std::uint32_t>> proposals(nodes.size());
    parallel_for(nodes.size(), exec, [&](std::size_t u) {
        if (tokens[u].empty()) return;
        std::size_t taken = 0;
        // Threshold applies after top-k truncation: a rejected neighbor is not replaced.
        for (const auto& hit : index.search_tokens(tokens[u], k + 1)) {
            if (hit.ordinal == u) continue;
            if (taken++ == k) break;
            if (hit.score >= t_graph) proposals[u].push_back(hit.ordinal);
        }
    });
    return proposals;
}

SnippetGraph build_graph(std::vector<SnippetNode> nodes, int k_graph, double t_graph, Bm25Params params, Exec exec) {
    const auto proposals = propose_edges(nodes, k_graph, t_graph, params, exec);
    std::vector<std::vector<std::uint32_t>> adjacency(nodes.size());
    for (std::size_t u = 0; u < proposals.size(); ++u)
        for (auto v : proposals[u]) {
            adjacency[u].push_back(v);
            adjacency[v].push_back(static_cast<std::uint32_t>(u));
        }
    for (auto& adj : adjacency) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    return SnippetGraph(std::move(nodes), std::move(adjacency), k_graph, t_graph);
}

HoodChunk hood(const SnippetGraph& graph, std::uint32_t center, int hop) {
    if (center >= graph.size()) throw Error(ErrorCode::OutOfRange, "center node " + std::to_string(center) + " out of range");
    if (hop < 0) throw Error(ErrorCode::OutOfRange, "hop must be >= 0");
    HoodChunk h{center, hop, {center}, {}};
    std::vector<char> seen(graph.size(), 0);
    seen[center] = 1;
    std::vector<std::uint32_t> frontier{center};
    for (int depth = 0; depth < hop && !frontier.empty(); ++depth) {
        std::vector<std::uint32_t> next;
        for (auto u : frontier)
            for (auto v : graph.neighbors(u))
                if (!seen[v]) {
                    seen[v] = 1;
                    next.push_back(v);
                }
        std::sort(next.begin(), next.end());
        h.member_nodes.insert(h.member_nodes.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    std::vector<std::string> texts;
    texts.reserve(h.member_nodes.size());
    for (auto m : h.member_nodes) texts.push_back(graph.nodes()[m].text);
    h.text = join(texts, " ");
    return h;
}

GranularityIndexSet build_graph_indexset(const SnippetGraph& graph, int n_gra, Bm25Params params, Exec exec) {
    if (n_gra < 1) throw Error(ErrorCode::InvalidArgument, "n_gra must be >= 1");
    if (graph.size() == 0) throw Error(ErrorCode::EmptyCorpus, "graph has no nodes");
    const auto n = graph.size();
    std::vector<Unit> units;
    units.reserve(n);
    for (const auto& node : graph.nodes()) units.push_back(Unit{node.doc_id, node.node_id});

    std::vector<std::vector<LevelChunk>> levels(static_cast<std::size_t>(n_gra));
    std::vector<std::vector<std::uint32_t>> homes(static_cast<std::size_t>(n_gra));
    for (int g = 1; g <= n_gra; ++g) {
        auto& chunks = levels[static_cast<std::size_t>(g - 1)];
        chunks.resize(n);
        parallel_for(n, exec, [&](std::size_t c) {
            auto h = hood(graph, static_cast<std::uint32_t>(c), g - 1);
            chunks[c] = LevelChunk{ChunkId{graph.nodes()[c].doc_id, g, static_cast<std::uint32_t>(c)},
                                   std::move(h.member_nodes), std::move(h.text)};
        });
        auto& home = homes[static_cast<std::size_t>(g - 1)];
        home.resize(n);
        for (std::size_t u = 0; u < n; ++u) home[u] = static_cast<std::uint32_t>(u);
    }
    return GranularityIndexSet::from_levels(IndexKind::mogg, std::move(units), std::move(levels), std::move(homes),
                                            params, exec);
}

}  // namespace granur
