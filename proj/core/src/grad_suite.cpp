#include "lgrpool/grad_suite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "lgrpool/error.hpp"
#include "lgrpool/model.hpp"

namespace lgrpool {
namespace {

using ad::ParameterSet;
using ad::Tape;
using ad::Var;

Matrix uniform(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

struct Primitive {
  const char* name;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> inputs;
  std::function<Var(Tape&, Var, Var)> op;
};

std::vector<Primitive> primitives(const SparseMatrix& sparse) {
  static const std::vector<std::size_t> gather = {2, 0, 2, 1, 3};
  static const std::vector<std::size_t> scatter = {1, 0, 1, 2};
  static const std::vector<std::size_t> labels = {0, 2, 1, 2};
  using P = std::pair<Eigen::Index, Eigen::Index>;
  return {
      {"matmul", {P{4, 3}, P{3, 5}}, [](Tape&, Var a, Var b) { return ad::matmul(a, b); }},
      {"spmm", {P{6, 3}}, [&sparse](Tape&, Var a, Var) { return ad::spmm(sparse, a); }},
      {"add", {P{3, 4}, P{3, 4}}, [](Tape&, Var a, Var b) { return ad::add(a, b); }},
      {"sub", {P{3, 4}, P{3, 4}}, [](Tape&, Var a, Var b) { return ad::sub(a, b); }},
      {"scale", {P{3, 4}}, [](Tape&, Var a, Var) { return ad::scale(a, -1.7); }},
      {"hadamard", {P{3, 4}, P{3, 4}}, [](Tape&, Var a, Var b) { return ad::hadamard(a, b); }},
      {"concat_cols", {P{3, 2}, P{3, 4}}, [](Tape&, Var a, Var b) { return ad::concat_cols(a, b); }},
      {"add_row_vector", {P{4, 3}, P{1, 3}}, [](Tape&, Var a, Var b) { return ad::add_row_vector(a, b); }},
      {"mul_rows", {P{4, 3}, P{4, 1}}, [](Tape&, Var a, Var b) { return ad::mul_rows(a, b); }},
      {"sigmoid", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::sigmoid(a); }},
      {"relu", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::relu(a); }},
      {"softmax_rows", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::softmax_rows(a); }},
      {"clamp_min", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::clamp_min(a, 0.25); }},
      {"clamp_max", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::clamp_max(a, 0.25); }},
      {"mean_rows", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::mean_rows(a); }},
      {"sum", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::sum(a); }},
      {"sum_sq_rows", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::sum_sq_rows(a); }},
      {"gather_rows", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::gather_rows(a, gather); }},
      {"scatter_add_rows", {P{4, 3}}, [](Tape&, Var a, Var) { return ad::scatter_add_rows(a, scatter, 3); }},
      {"cross_entropy_rows", {P{4, 3}},
       [](Tape&, Var a, Var) { return ad::cross_entropy_rows(ad::softmax_rows(a), labels); }},
  };
}

GradTarget check_primitive(const Primitive& p, const ad::GradCheckOptions& options,
                           std::mt19937_64& rng) {
  ParameterSet params;
  for (std::size_t i = 0; i < p.inputs.size(); ++i) {
    params.add(i == 0 ? "a" : "b", uniform(rng, p.inputs[i].first, p.inputs[i].second));
  }
  // The output shape is only known after one forward pass.
  Matrix weights;
  {
    Tape probe;
    auto a = probe.parameter(params, 0, false);
    auto b = params.size() > 1 ? probe.parameter(params, 1, false) : a;
    auto out = p.op(probe, a, b);
    weights = uniform(rng, out.rows(), out.cols());
  }
  ParameterSet* sets[] = {&params};
  auto builder = [&](Tape& t) {
    auto a = t.parameter(params, 0);
    auto b = params.size() > 1 ? t.parameter(params, 1) : a;
    return ad::sum(ad::hadamard(p.op(t, a, b), t.constant(weights)));
  };
  return {p.name, ad::grad_check(builder, sets, options)};
}

GradTarget check_total_loss(const ad::GradCheckOptions& options) {
  ForwardOptions fwd;
  fwd.pooling.max_layers = 2;
  const std::size_t hidden = 5;
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    std::mt19937_64 rng(options.seed * 1000 + attempt);
    std::bernoulli_distribution coin(0.5);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = i + 1; j < 6; ++j) {
        if (coin(rng)) edges.push_back({i, j});
      }
    }
    Graph graph = Graph::make(6, edges, uniform(rng, 6, 3), 1);
    ModelParams params = init_model({3, hidden, 2, 2}, options.seed * 1000 + attempt);

    Tape probe;
    auto out = forward_graph(probe, graph, params, fwd);
    if (out.trace->depth() != 2) continue;
    bool near_threshold = false;
    for (const auto& layer : out.trace->layers) {
      for (double s : layer.scores) {
        near_threshold |= std::abs(s - fwd.pooling.score_threshold) < 10 * options.eps;
      }
    }
    if (near_threshold) continue;

    ParameterSet* sets[] = {&params.propagation, &params.pooling};
    auto builder = [&](Tape& t) { return *forward_graph(t, graph, params, fwd).l_tot; };
    return {"total_loss", ad::grad_check(builder, sets, options)};
  }
  throw ConfigError("no 6-node graph with two non-degenerate pooling layers found");
}

}  // namespace

std::vector<GradTarget> run_gradient_suite(const ad::GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::vector<Triplet> triplets;
  std::bernoulli_distribution coin(0.4);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      if (coin(rng)) triplets.push_back({r, c, val(rng)});
    }
  }
  const SparseMatrix sparse = SparseMatrix::from_triplets(5, 6, std::move(triplets));

  std::vector<GradTarget> targets;
  for (const auto& p : primitives(sparse)) targets.push_back(check_primitive(p, options, rng));
  targets.push_back(check_total_loss(options));
  return targets;
}

}  // namespace lgrpool
