#include "lgrpool/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lgrpool/error.hpp"

namespace lgrpool {

std::vector<Edge> normalize_edge_list(std::vector<Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.u == e.v) continue;
    out.push_back(canonical(e.u, e.v));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SparseMatrix build_normalized_adjacency(std::size_t num_nodes,
                                        std::span<const Edge> edges) {
  std::vector<double> degree(num_nodes, 1.0);  // self-loop
  for (const auto& e : edges) {
    degree[e.u] += 1.0;
    degree[e.v] += 1.0;
  }
  std::vector<double> inv_sqrt(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  }

  std::vector<Triplet> triplets;
  triplets.reserve(num_nodes + 2 * edges.size());
  for (std::size_t i = 0; i < num_nodes; ++i) {
    triplets.push_back({i, i, inv_sqrt[i] * inv_sqrt[i]});
  }
  for (const auto& e : edges) {
    // Same product order for both directions keeps the matrix bit-symmetric.
    const double w = inv_sqrt[e.u] * inv_sqrt[e.v];
    triplets.push_back({e.u, e.v, w});
    triplets.push_back({e.v, e.u, w});
  }
  return SparseMatrix::from_triplets(num_nodes, num_nodes, std::move(triplets));
}

Graph Graph::make(std::size_t num_nodes, std::vector<Edge> edges,
                  Matrix features, std::size_t label) {
  if (static_cast<std::size_t>(features.rows()) != num_nodes) {
    throw ShapeMismatch("graph features have " +
                        std::to_string(features.rows()) + " rows for " +
                        std::to_string(num_nodes) + " nodes");
  }
  for (const auto& e : edges) {
    if (e.u >= num_nodes || e.v >= num_nodes) {
      throw ShapeMismatch("edge (" + std::to_string(e.u) + ", " +
                          std::to_string(e.v) + ") outside a graph of " +
                          std::to_string(num_nodes) + " nodes");
    }
  }
  if (!features.allFinite()) throw NonFinite("graph features are not finite");
  Graph g;
  g.num_nodes = num_nodes;
  g.edges = normalize_edge_list(std::move(edges));
  g.features = std::move(features);
  g.label = label;
  g.adj_norm = build_normalized_adjacency(num_nodes, g.edges);
  return g;
}

Graph permute_graph(const Graph& g, std::span<const std::size_t> perm) {
  Matrix features(g.features.rows(), g.features.cols());
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    features.row(static_cast<Eigen::Index>(perm[i])) =
        g.features.row(static_cast<Eigen::Index>(i));
  }
  std::vector<Edge> edges;
  edges.reserve(g.edges.size());
  for (const auto& e : g.edges) edges.push_back({perm[e.u], perm[e.v]});
  return Graph::make(g.num_nodes, std::move(edges), std::move(features),
                     g.label);
}

std::size_t count_components(std::size_t num_nodes,
                             std::span<const Edge> edges) {
  std::vector<std::size_t> parent(num_nodes);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::size_t components = num_nodes;
  for (const auto& e : edges) {
    auto a = find(e.u);
    auto b = find(e.v);
    if (a != b) {
      parent[std::max(a, b)] = std::min(a, b);
      --components;
    }
  }
  return components;
}

GraphDataset GraphDataset::subset(std::span<const std::size_t> indices) const {
  GraphDataset out;
  out.name = name;
  out.num_classes = num_classes;
  out.feature_dim = feature_dim;
  out.node_label_dim = node_label_dim;
  out.attribute_dim = attribute_dim;
  out.graphs.reserve(indices.size());
  for (auto i : indices) out.graphs.push_back(graphs.at(i));
  return out;
}

double average_nodes(const GraphDataset& ds) {
  if (ds.graphs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : ds.graphs) total += static_cast<double>(g.num_nodes);
  return total / static_cast<double>(ds.graphs.size());
}

double average_edges(const GraphDataset& ds) {
  if (ds.graphs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : ds.graphs) total += static_cast<double>(g.edges.size());
  return total / static_cast<double>(ds.graphs.size());
}

nlohmann::json dataset_summary(const GraphDataset& ds) {
  return {{"name", ds.name},
          {"graphs", ds.graphs.size()},
          {"classes", ds.num_classes},
          {"feature_dim", ds.feature_dim},
          {"avg_nodes", average_nodes(ds)},
          {"avg_edges", average_edges(ds)}};
}

}  // namespace lgrpool
