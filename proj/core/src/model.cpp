#include "lgrpool/model.hpp"

#include <random>

namespace lgrpool {

ModelParams init_model(const ModelShape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.propagation =
      init_propagation_params(shape.input_dim, shape.hidden, shape.classes, rng);
  params.pooling = init_pooling_params(shape.hidden, shape.pooling_layers, rng);
  return params;
}

ForwardOptions forward_options(const TrainingConfig& cfg) {
  ForwardOptions opts;
  opts.propagation = cfg.propagation();
  opts.pooling = cfg.pooling();
  opts.gamma = cfg.gamma;
  return opts;
}

GraphForward forward_graph(ad::Tape& tape, const Graph& graph,
                           const ModelParams& params,
                           const ForwardOptions& options) {
  GraphForward out;
  out.propagation = propagation_forward(tape, graph, params.propagation,
                                        options.propagation,
                                        options.propagation_grad);
  out.l_exp = expectation_loss(out.propagation.y_pred, graph.label);
  if (!options.with_pooling) return out;

  out.trace = hierarchical_pool(tape, graph, out.propagation.z_pre,
                                params.pooling, options.pooling,
                                options.pooling_grad);
  out.l_precor = prediction_correction_loss(
      out.trace->z_cor, out.propagation.z_pre, out.trace->composed.assignment,
      out.trace->final_edges, options.pooling.distance_cap);
  out.l_tot = total_loss(out.l_exp, *out.l_precor, options.gamma);
  return out;
}

std::size_t predict(const Graph& graph, const ModelParams& params,
                    const PropagationOptions& options) {
  ad::Tape tape;
  auto out = propagation_forward(tape, graph, params.propagation, options, false);
  const auto& y = out.y_pred.value();
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < y.cols(); ++c) {
    if (y(0, c) > y(0, best)) best = c;
  }
  return static_cast<std::size_t>(best);
}

}  // namespace lgrpool
