#include "lgrpool/pooling.hpp"

#include <algorithm>
#include <numeric>

#include "init.hpp"
#include "lgrpool/error.hpp"

namespace lgrpool {

std::string pool_weight_name(std::size_t layer) {
  return "pool." + std::to_string(layer) + ".w";
}

std::string pool_attention_name(std::size_t layer) {
  return "pool." + std::to_string(layer) + ".a";
}

ad::ParameterSet init_pooling_params(std::size_t hidden, std::size_t layers,
                                     std::mt19937_64& rng) {
  const auto h = static_cast<Eigen::Index>(hidden);
  ad::ParameterSet p;
  for (std::size_t l = 0; l < layers; ++l) {
    p.add(pool_weight_name(l), detail::glorot_uniform(h, h, rng));
    p.add(pool_attention_name(l), detail::glorot_uniform(2 * h, 1, rng));
  }
  return p;
}

ad::Var score_edges(ad::Var z, std::span<const Edge> edges, ad::Var w_pool,
                    ad::Var a) {
  const auto hidden = z.cols();
  if (w_pool.rows() != hidden || w_pool.cols() != hidden) {
    throw ShapeMismatch("score_edges: W_pool is " + std::to_string(w_pool.rows()) +
                        "x" + std::to_string(w_pool.cols()) + ", features have " +
                        std::to_string(hidden) + " columns");
  }
  if (a.rows() != 2 * hidden || a.cols() != 1) {
    throw ShapeMismatch("score_edges: a is " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + ", expected " +
                        std::to_string(2 * hidden) + "x1");
  }
  std::vector<std::size_t> first(edges.size());
  std::vector<std::size_t> second(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto c = canonical(edges[e].u, edges[e].v);
    first[e] = c.u;
    second[e] = c.v;
  }
  auto projected = ad::matmul(z, w_pool);
  auto pu = ad::gather_rows(projected, first);
  auto pv = ad::gather_rows(projected, second);
  auto forward = ad::sigmoid(ad::matmul(ad::concat_cols(pu, pv), a));
  auto backward = ad::sigmoid(ad::matmul(ad::concat_cols(pv, pu), a));
  return ad::scale(ad::add(forward, backward), 0.5);
}

NormalizedScores normalize_scores(ad::Var scores, std::span<const Edge> edges,
                                  std::size_t num_nodes, double threshold) {
  const auto& s = scores.value();
  if (static_cast<std::size_t>(s.rows()) != edges.size() || s.cols() != 1) {
    throw ShapeMismatch("normalize_scores: " + std::to_string(s.rows()) + "x" +
                        std::to_string(s.cols()) + " scores for " +
                        std::to_string(edges.size()) + " edges");
  }
  NormalizedScores out;
  out.surviving.assign(edges.size(), 0);
  out.surviving_degree.assign(num_nodes, 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (s(static_cast<Eigen::Index>(e), 0) >= threshold) {
      out.surviving[e] = 1;
      ++out.surviving_degree[edges[e].u];
      ++out.surviving_degree[edges[e].v];
      ++out.surviving_edges;
    }
  }

  std::vector<std::size_t> pair_edge(2 * edges.size());
  out.source.resize(2 * edges.size());
  Matrix coefficient = Matrix::Zero(static_cast<Eigen::Index>(2 * edges.size()), 1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto c = canonical(edges[e].u, edges[e].v);
    pair_edge[2 * e] = e;
    pair_edge[2 * e + 1] = e;
    out.source[2 * e] = c.u;
    out.source[2 * e + 1] = c.v;
    if (out.surviving[e]) {
      coefficient(static_cast<Eigen::Index>(2 * e), 0) =
          1.0 / static_cast<double>(out.surviving_degree[c.u]);
      coefficient(static_cast<Eigen::Index>(2 * e + 1), 0) =
          1.0 / static_cast<double>(out.surviving_degree[c.v]);
    }
  }
  auto& tape = *scores.tape;
  out.values = ad::hadamard(ad::gather_rows(scores, pair_edge),
                            tape.constant(std::move(coefficient)));
  return out;
}

MergeMap merge_components(std::size_t num_nodes, std::span<const Edge> edges,
                          std::span<const std::uint8_t> keep) {
  std::vector<std::size_t> parent(num_nodes);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!keep[e]) continue;
    auto a = find(edges[e].u);
    auto b = find(edges[e].v);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  constexpr auto kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> root_id(num_nodes, kUnset);
  MergeMap map;
  map.assignment.resize(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    auto r = find(i);
    if (root_id[r] == kUnset) root_id[r] = map.num_supernodes++;
    map.assignment[i] = root_id[r];
  }
  return map;
}

MergeMap compose(const MergeMap& inner, const MergeMap& outer) {
  MergeMap out;
  out.num_supernodes = outer.num_supernodes;
  out.assignment.reserve(inner.assignment.size());
  for (auto s : inner.assignment) out.assignment.push_back(outer.assignment.at(s));
  return out;
}

std::vector<Edge> quotient_edges(std::span<const Edge> edges,
                                 const MergeMap& merge) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    out.push_back({merge.assignment[e.u], merge.assignment[e.v]});
  }
  return normalize_edge_list(std::move(out));
}

Contraction contract_graph(std::size_t num_nodes, std::span<const Edge> edges,
                           const NormalizedScores& normalized, ad::Var z,
                           double gate_floor) {
  if (static_cast<std::size_t>(z.rows()) != num_nodes) {
    throw ShapeMismatch("contract_graph: " + std::to_string(z.rows()) +
                        " feature rows for " + std::to_string(num_nodes) +
                        " nodes");
  }
  Contraction out;
  auto gate_sum = ad::scatter_add_rows(normalized.values, normalized.source, num_nodes);
  out.gate = ad::clamp_min(gate_sum, gate_floor);
  out.merge = merge_components(num_nodes, edges, normalized.surviving);
  out.features = ad::scatter_add_rows(ad::mul_rows(z, out.gate),
                                      out.merge.assignment,
                                      out.merge.num_supernodes);
  out.edges = quotient_edges(edges, out.merge);
  out.adj_norm = build_normalized_adjacency(out.merge.num_supernodes, out.edges);
  return out;
}

PoolingTrace hierarchical_pool(ad::Tape& tape, const Graph& graph,
                               ad::Var z_input, const ad::ParameterSet& params,
                               const PoolingOptions& options,
                               bool requires_grad) {
  PoolingTrace trace;
  trace.composed.num_supernodes = graph.num_nodes;
  trace.composed.assignment.resize(graph.num_nodes);
  std::iota(trace.composed.assignment.begin(), trace.composed.assignment.end(),
            std::size_t{0});

  std::size_t nodes = graph.num_nodes;
  std::vector<Edge> edges = graph.edges;
  ad::Var z = z_input;
  for (std::size_t layer = 0; layer < options.max_layers; ++layer) {
    if (nodes <= options.min_nodes || edges.empty()) break;
    auto w = tape.parameter(params, pool_weight_name(layer), requires_grad);
    auto a = tape.parameter(params, pool_attention_name(layer), requires_grad);
    auto scores = score_edges(z, edges, w, a);
    auto normalized = normalize_scores(scores, edges, nodes, options.score_threshold);
    if (normalized.surviving_edges == 0) break;

    PoolingLayer record;
    record.input_nodes = nodes;
    record.input_edges = edges.size();
    const auto& sv = scores.value();
    record.scores.assign(sv.data(), sv.data() + sv.size());
    const auto& nv = normalized.values.value();
    record.normalized.assign(nv.data(), nv.data() + nv.size());
    record.surviving_edges = normalized.surviving_edges;
    record.contraction =
        contract_graph(nodes, edges, normalized, z, options.gate_floor);

    trace.composed = compose(trace.composed, record.contraction.merge);
    z = record.contraction.features;
    edges = record.contraction.edges;
    nodes = record.contraction.merge.num_supernodes;
    trace.layers.push_back(std::move(record));
  }
  trace.final_edges = std::move(edges);
  trace.z_cor = z;
  return trace;
}

ad::Var prediction_correction_loss(ad::Var z_cor, ad::Var z_pre,
                                   std::span<const std::size_t> composed_map,
                                   std::span<const Edge> coarse_edges,
                                   double distance_cap) {
  if (z_cor.cols() != z_pre.cols()) {
    throw ShapeMismatch("prediction_correction_loss: widths " +
                        std::to_string(z_cor.cols()) + " and " +
                        std::to_string(z_pre.cols()));
  }
  if (composed_map.size() != static_cast<std::size_t>(z_pre.rows())) {
    throw ShapeMismatch("prediction_correction_loss: map covers " +
                        std::to_string(composed_map.size()) + " of " +
                        std::to_string(z_pre.rows()) + " nodes");
  }
  auto pulled_back = ad::gather_rows(z_cor, composed_map);
  auto alignment = ad::sum(ad::sum_sq_rows(ad::sub(pulled_back, z_pre)));
  if (coarse_edges.empty()) return alignment;

  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
  first.reserve(coarse_edges.size());
  second.reserve(coarse_edges.size());
  for (const auto& e : coarse_edges) {
    first.push_back(e.u);
    second.push_back(e.v);
  }
  auto diff = ad::sub(ad::gather_rows(z_cor, first), ad::gather_rows(z_cor, second));
  auto spread = ad::sum(ad::clamp_max(ad::sum_sq_rows(diff), distance_cap));
  return ad::sub(alignment, spread);
}

ad::Var total_loss(ad::Var l_exp, ad::Var l_precor, double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  return ad::add(l_exp, ad::scale(l_precor, gamma));
}

nlohmann::json trace_to_json(const PoolingTrace& trace) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const auto& layer = trace.layers[l];
    std::vector<std::size_t> histogram(10, 0);
    for (double s : layer.scores) {
      auto bin = static_cast<std::size_t>(std::clamp(s, 0.0, 1.0) * 10.0);
      ++histogram[std::min<std::size_t>(bin, 9)];
    }
    layers.push_back({{"layer", l},
                      {"input_nodes", layer.input_nodes},
                      {"input_edges", layer.input_edges},
                      {"surviving_edges", layer.surviving_edges},
                      {"output_nodes", layer.contraction.merge.num_supernodes},
                      {"output_edges", layer.contraction.edges.size()},
                      {"score_histogram", histogram}});
  }
  return {{"depth", trace.depth()},
          {"input_nodes", trace.composed.assignment.size()},
          {"final_supernodes", trace.composed.num_supernodes},
          {"final_edges", trace.final_edges.size()},
          {"composed_map", trace.composed.assignment},
          {"layers", std::move(layers)}};
}

}  // namespace lgrpool
