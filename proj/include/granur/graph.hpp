#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "granur/corpus.hpp"
#include "granur/index.hpp"
#include "granur/parallel.hpp"

namespace granur {

struct SnippetNode {
    std::uint32_t node_id = 0;
    std::string doc_id;
    std::string text;  // one or two sentences
    std::uint32_t token_count = 0;
    friend bool operator==(const SnippetNode&, const SnippetNode&) = default;
};

/// Groups each document's sentences into consecutive windows of
/// sentences_per_node (1 or 2). Node ids are dense and follow document order.
std::vector<SnippetNode> build_nodes(std::span<const Document> docs, int sentences_per_node = 2);

/// Undirected sentence-node graph with sorted adjacency and no self loops.
class SnippetGraph {
public:
    SnippetGraph() = default;
    SnippetGraph(std::vector<SnippetNode> nodes, std::vector<std::vector<std::uint32_t>> adjacency, int k_graph,
                 double t_graph);

    const std::vector<SnippetNode>& nodes() const noexcept { return nodes_; }
    const std::vector<std::uint32_t>& neighbors(std::uint32_t node) const { return adjacency_.at(node); }
    const std::vector<std::vector<std::uint32_t>>& adjacency() const noexcept { return adjacency_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept;
    int k_graph() const noexcept { return k_graph_; }
    double t_graph() const noexcept { return t_graph_; }

    /// JSONL: header {"n_nodes", "k_graph", "t_graph"} then one
    /// {"id", "doc", "text", "adj"} line per node. An infinite threshold is
    /// written as the string "inf".
    void save(const std::filesystem::path& path) const;
    static SnippetGraph load(const std::filesystem::path& path);

    friend bool operator==(const SnippetGraph&, const SnippetGraph&) = default;

private:
    std::vector<SnippetNode> nodes_;
    std::vector<std::vector<std::uint32_t>> adjacency_;
    int k_graph_ = 3;
    double t_graph_ = 0.0;
};

/// Every node queries a BM25 index of all node texts with its own text. Of the
/// top k_graph results other than itself, those scoring >= t_graph become edge
/// proposals; the graph is the symmetric union of all proposals.
/// Exec::parallel spreads the per-node queries over OpenMP workers.
SnippetGraph build_graph(std::vector<SnippetNode> nodes, int k_graph, double t_graph, Bm25Params params = {},
                         Exec exec = Exec::parallel);

/// The k_graph proposals of each node before symmetrization.
std::vector<std::vector<std::uint32_t>> propose_edges(const std::vector<SnippetNode>& nodes, int k_graph,
                                                      double t_graph, Bm25Params params = {},
                                                      Exec exec = Exec::parallel);

struct HoodChunk {
    std::uint32_t center = 0;
    int hop = 0;
    std::vector<std::uint32_t> member_nodes;  // by (BFS depth, node id); center first
    std::string text;                         // space-join of member texts
};

/// BFS ball of radius hop around center; each node appears once.
HoodChunk hood(const SnippetGraph& graph, std::uint32_t center, int hop);

/// Level g indexes the hop g-1 neighborhood of every node. Units are the
/// nodes; a level-g chunk covers exactly its member nodes.
GranularityIndexSet build_graph_indexset(const SnippetGraph& graph, int n_gra, Bm25Params params = {},
                                         Exec exec = Exec::parallel);

}  // namespace granur
