#include <random>

#include <benchmark/benchmark.h>

#include "lgrpool/model.hpp"
#include "lgrpool/training.hpp"

using namespace lgrpool;

namespace {

Graph random_graph(std::size_t n, double p, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (coin(rng)) edges.push_back({i, j});
    }
  }
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unit(rng);
  return Graph::make(n, std::move(edges), std::move(x), 0);
}

void BM_Spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto g = random_graph(n, 4.0 / static_cast<double>(n), 1, 1);
  Matrix b = Matrix::Random(static_cast<Eigen::Index>(n), 200);
  for (auto _ : state) benchmark::DoNotOptimize(g.adj_norm.multiply(b));
}
BENCHMARK(BM_Spmm)->Arg(18)->Arg(40)->Arg(284);

void BM_PropagationForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto g = random_graph(n, 4.0 / static_cast<double>(n), 7, 2);
  auto params = init_model({7, 200, 2, 14}, 0);
  for (auto _ : state) {
    ad::Tape tape;
    benchmark::DoNotOptimize(propagation_forward(tape, g, params.propagation, {}, false).y_pred);
  }
}
BENCHMARK(BM_PropagationForward)->Arg(18)->Arg(40);

// One training step's work for a single graph: full forward with pooling and
// the reverse sweep.
void BM_ForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto g = random_graph(n, 4.0 / static_cast<double>(n), 7, 3);
  auto params = init_model({7, 200, 2, 14}, 0);
  ForwardOptions opts;
  for (auto _ : state) {
    ad::Tape tape;
    auto out = forward_graph(tape, g, params, opts);
    tape.backward(*out.l_tot);
    benchmark::DoNotOptimize(tape.size());
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(18)->Arg(40);

}  // namespace
BENCHMARK_MAIN();
