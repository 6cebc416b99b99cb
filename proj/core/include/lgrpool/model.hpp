#pragma once

#include <cstdint>
#include <optional>

#include "lgrpool/config.hpp"
#include "lgrpool/pooling.hpp"
#include "lgrpool/propagation.hpp"

namespace lgrpool {

struct ModelParams {
  ad::ParameterSet propagation;  // f_theta and the class head
  ad::ParameterSet pooling;      // W_pool and a for every layer
};

struct ModelShape {
  std::size_t input_dim = 1;
  std::size_t hidden = 200;
  std::size_t classes = 2;
  std::size_t pooling_layers = 14;
};

ModelParams init_model(const ModelShape& shape, std::uint64_t seed);

struct ForwardOptions {
  PropagationOptions propagation;
  PoolingOptions pooling;
  double gamma = 0.2;
  bool with_pooling = true;
  bool propagation_grad = true;
  bool pooling_grad = true;
};

ForwardOptions forward_options(const TrainingConfig& cfg);

struct GraphForward {
  PropagationOutput propagation;
  ad::Var l_exp;
  std::optional<PoolingTrace> trace;
  std::optional<ad::Var> l_precor;
  std::optional<ad::Var> l_tot;
};

/// Propagation, classification and (optionally) pooling plus the combined
/// loss for one graph. The graph and params must outlive the tape.
GraphForward forward_graph(ad::Tape& tape, const Graph& graph,
                           const ModelParams& params,
                           const ForwardOptions& options);

/// argmax of y_pred; ties go to the lowest class index.
std::size_t predict(const Graph& graph, const ModelParams& params,
                    const PropagationOptions& options);

}  // namespace lgrpool
