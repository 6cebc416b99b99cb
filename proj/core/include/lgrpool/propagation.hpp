#pragma once

#include <cstddef>
#include <random>

#include "lgrpool/graph.hpp"
#include "lgrpool/tape.hpp"

namespace lgrpool {

struct PropagationOptions {
  double alpha = 0.3;           // teleport probability, in (0, 1]
  std::size_t iterations = 10;  // power-iteration steps, >= 1
};

namespace propagation_names {
inline constexpr const char* kW1 = "mlp.w1";
inline constexpr const char* kB1 = "mlp.b1";
inline constexpr const char* kW2 = "mlp.w2";
inline constexpr const char* kB2 = "mlp.b2";
inline constexpr const char* kHeadW = "head.w";
inline constexpr const char* kHeadB = "head.b";
}  // namespace propagation_names

/// Glorot-uniform weights, zero biases: mlp [d_in -> hidden -> hidden] and a
/// linear class head [hidden -> classes].
ad::ParameterSet init_propagation_params(std::size_t d_in, std::size_t hidden,
                                         std::size_t classes,
                                         std::mt19937_64& rng);

struct MlpWeights {
  ad::Var w1, b1, w2, b2;
};

struct ClassHead {
  ad::Var w, b;
};

struct PropagationBinding {
  MlpWeights mlp;
  ClassHead head;
};

PropagationBinding bind_propagation(ad::Tape& tape,
                                    const ad::ParameterSet& params,
                                    bool requires_grad);

/// relu(X W1 + b1) W2 + b2, applied to every node independently.
ad::Var mlp_forward(ad::Var x, const MlpWeights& w);

/// k steps of Z <- (1 - alpha) A Z + alpha H starting from Z = H. No softmax.
ad::Var ppr_propagate(const SparseMatrix& adj_norm, ad::Var h, double alpha,
                      std::size_t iterations);

/// alpha (I - (1 - alpha) A)^-1 H by a dense LU solve. Reference only.
/// Throws SingularMatrix if the system cannot be solved.
Matrix ppr_closed_form(const Matrix& adj_norm, const Matrix& h, double alpha);

struct Classification {
  ad::Var probs;   // [n x C], softmax over classes per node
  ad::Var y_pred;  // [1 x C], mean of the node rows of probs
};

Classification classify(ad::Var z_pre, const ClassHead& head);

/// -log(max(y_pred[y_true], 1e-12)). Throws LabelOutOfRange.
ad::Var expectation_loss(ad::Var y_pred, std::size_t y_true);

struct PropagationOutput {
  ad::Var h;
  ad::Var z_pre;
  ad::Var probs;
  ad::Var y_pred;
};

PropagationOutput propagation_forward(ad::Tape& tape, const Graph& graph,
                                      const ad::ParameterSet& params,
                                      const PropagationOptions& options,
                                      bool requires_grad);

}  // namespace lgrpool
