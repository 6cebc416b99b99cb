#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lgrpool/sparse.hpp"

namespace lgrpool {

/// Undirected edge stored with u < v.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Returns the canonical (u < v) form. Self-loops are returned unchanged.
inline Edge canonical(std::size_t a, std::size_t b) {
  return a < b ? Edge{a, b} : Edge{b, a};
}

/// Sorts, removes duplicates and self-loops, and canonicalizes endpoints.
std::vector<Edge> normalize_edge_list(std::vector<Edge> edges);

/// D^-1/2 (A + I) D^-1/2 where D counts the self-loop. Isolated nodes get a
/// diagonal entry of 1.
SparseMatrix build_normalized_adjacency(std::size_t num_nodes,
                                        std::span<const Edge> edges);

struct Graph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;  // canonical, sorted, no duplicates or self-loops
  Matrix features;          // [num_nodes x feature_dim]
  std::size_t label = 0;
  SparseMatrix adj_norm;

  /// Builds a graph and its normalized adjacency. Edges are normalized first.
  static Graph make(std::size_t num_nodes, std::vector<Edge> edges,
                    Matrix features, std::size_t label);
};

/// Relabels nodes: node i of `g` becomes node perm[i] of the result.
Graph permute_graph(const Graph& g, std::span<const std::size_t> perm);

/// Number of connected components of an undirected graph.
std::size_t count_components(std::size_t num_nodes,
                             std::span<const Edge> edges);

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  // Feature layout: the first `node_label_dim` columns one-hot encode the
  // node label, the remaining `attribute_dim` columns are raw attributes.
  // Both zero means the constant-1 fallback column.
  std::size_t node_label_dim = 0;
  std::size_t attribute_dim = 0;

  /// Sub-dataset holding the graphs at `indices`, in order.
  GraphDataset subset(std::span<const std::size_t> indices) const;
  std::size_t size() const { return graphs.size(); }
};

double average_nodes(const GraphDataset& ds);
double average_edges(const GraphDataset& ds);

/// {name, graphs, classes, feature_dim, avg_nodes, avg_edges}
nlohmann::json dataset_summary(const GraphDataset& ds);

}  // namespace lgrpool
