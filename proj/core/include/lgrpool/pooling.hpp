#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lgrpool/graph.hpp"
#include "lgrpool/tape.hpp"

namespace lgrpool {

struct PoolingOptions {
  double score_threshold = 0.5;
  std::size_t max_layers = 14;
  // Floor on a node's merge gate; only reached by nodes with no surviving
  // edge (singleton supernodes).
  double gate_floor = 1e-6;
  // Per-coarse-edge cap on the squared distance in the spread term.
  double distance_cap = 10.0;
  // Pooling stops once a layer's input has at most this many nodes.
  std::size_t min_nodes = 2;
};

std::string pool_weight_name(std::size_t layer);
std::string pool_attention_name(std::size_t layer);

/// Independent per-layer W_pool [hidden x hidden] and a [2*hidden x 1].
ad::ParameterSet init_pooling_params(std::size_t hidden, std::size_t layers,
                                     std::mt19937_64& rng);

/// Symmetrized edge scores, one row per edge:
///   s_uv = (sigmoid(a . [P_u || P_v]) + sigmoid(a . [P_v || P_u])) / 2
/// with P = Z W_pool. Each edge is evaluated in canonical (u < v) order, so
/// the score does not depend on how the endpoints were listed.
ad::Var score_edges(ad::Var z, std::span<const Edge> edges, ad::Var w_pool,
                    ad::Var a);

struct NormalizedScores {
  // [2m x 1]; row 2e is the pair (u -> v) of edge e, row 2e+1 is (v -> u).
  // Value s_e / c_source when s_e >= threshold, else 0, where c_source counts
  // the surviving edges incident to the source node.
  ad::Var values;
  std::vector<std::size_t> source;         // per directed pair
  std::vector<std::uint8_t> surviving;     // per undirected edge
  std::vector<std::size_t> surviving_degree;  // per node
  std::size_t surviving_edges = 0;
};

/// The indicator and the counts are treated as constants.
NormalizedScores normalize_scores(ad::Var scores, std::span<const Edge> edges,
                                  std::size_t num_nodes, double threshold);

/// Surjection from fine nodes onto supernodes 0..num_supernodes-1.
struct MergeMap {
  std::vector<std::size_t> assignment;
  std::size_t num_supernodes = 0;
};

/// Connected components of the edges flagged in `keep`. Supernodes are
/// numbered by their smallest member.
MergeMap merge_components(std::size_t num_nodes, std::span<const Edge> edges,
                          std::span<const std::uint8_t> keep);

/// outer[inner.assignment[i]] for every i.
MergeMap compose(const MergeMap& inner, const MergeMap& outer);

/// Image of `edges` under the merge, without self-loops or duplicates.
std::vector<Edge> quotient_edges(std::span<const Edge> edges,
                                 const MergeMap& merge);

struct Contraction {
  ad::Var gate;      // [n x 1], max(sum_j S_norm(i, j), gate_floor)
  ad::Var features;  // [num_supernodes x hidden]
  std::vector<Edge> edges;
  MergeMap merge;
  SparseMatrix adj_norm;
};

/// Merges the components of surviving edges. The feature of a supernode is
/// the gate-weighted sum of its members' features.
Contraction contract_graph(std::size_t num_nodes, std::span<const Edge> edges,
                           const NormalizedScores& normalized, ad::Var z,
                           double gate_floor);

struct PoolingLayer {
  std::size_t input_nodes = 0;
  std::size_t input_edges = 0;
  std::vector<double> scores;
  std::vector<double> normalized;
  std::size_t surviving_edges = 0;
  Contraction contraction;
};

struct PoolingTrace {
  std::vector<PoolingLayer> layers;
  MergeMap composed;               // fine node -> final supernode
  std::vector<Edge> final_edges;   // edges among final supernodes
  ad::Var z_cor;                   // final supernode features

  std::size_t depth() const { return layers.size(); }
};

/// Applies score -> normalize -> contract up to options.max_layers times.
/// Stops before a layer whose input has <= min_nodes nodes or in which no
/// edge survives, so every recorded layer merges at least one pair. With
/// depth 0, z_cor is z_input and the composed map is the identity.
PoolingTrace hierarchical_pool(ad::Tape& tape, const Graph& graph,
                               ad::Var z_input, const ad::ParameterSet& params,
                               const PoolingOptions& options,
                               bool requires_grad);

/// sum_i |z_cor[g(i)] - z_pre[i]|^2 - sum_{(p,q)} min(|z_cor[p] - z_cor[q]|^2, cap)
/// where the second sum runs once over every coarse edge.
ad::Var prediction_correction_loss(ad::Var z_cor, ad::Var z_pre,
                                   std::span<const std::size_t> composed_map,
                                   std::span<const Edge> coarse_edges,
                                   double distance_cap);

ad::Var total_loss(ad::Var l_exp, ad::Var l_precor, double gamma);

/// Per-layer node counts, surviving-edge counts and 10-bin score histograms.
nlohmann::json trace_to_json(const PoolingTrace& trace);

}  // namespace lgrpool
