#include "lgrpool/propagation.hpp"

#include <Eigen/LU>

#include "init.hpp"
#include "lgrpool/error.hpp"

namespace lgrpool {

namespace names = propagation_names;

ad::ParameterSet init_propagation_params(std::size_t d_in, std::size_t hidden,
                                         std::size_t classes,
                                         std::mt19937_64& rng) {
  const auto in = static_cast<Eigen::Index>(d_in);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto c = static_cast<Eigen::Index>(classes);
  ad::ParameterSet p;
  p.add(names::kW1, detail::glorot_uniform(in, h, rng));
  p.add(names::kB1, Matrix::Zero(1, h));
  p.add(names::kW2, detail::glorot_uniform(h, h, rng));
  p.add(names::kB2, Matrix::Zero(1, h));
  p.add(names::kHeadW, detail::glorot_uniform(h, c, rng));
  p.add(names::kHeadB, Matrix::Zero(1, c));
  return p;
}

PropagationBinding bind_propagation(ad::Tape& tape,
                                    const ad::ParameterSet& params,
                                    bool requires_grad) {
  auto bind = [&](const char* name) {
    return tape.parameter(params, name, requires_grad);
  };
  return {{bind(names::kW1), bind(names::kB1), bind(names::kW2), bind(names::kB2)},
          {bind(names::kHeadW), bind(names::kHeadB)}};
}

ad::Var mlp_forward(ad::Var x, const MlpWeights& w) {
  auto hidden = ad::relu(ad::add_row_vector(ad::matmul(x, w.w1), w.b1));
  return ad::add_row_vector(ad::matmul(hidden, w.w2), w.b2);
}

ad::Var ppr_propagate(const SparseMatrix& adj_norm, ad::Var h, double alpha,
                      std::size_t iterations) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw ConfigError("alpha must lie in (0, 1]");
  }
  if (iterations == 0) throw ConfigError("propagation needs k >= 1");
  auto teleport = ad::scale(h, alpha);
  auto z = h;
  for (std::size_t step = 0; step < iterations; ++step) {
    z = ad::add(ad::scale(ad::spmm(adj_norm, z), 1.0 - alpha), teleport);
  }
  return z;
}

Matrix ppr_closed_form(const Matrix& adj_norm, const Matrix& h, double alpha) {
  if (adj_norm.rows() != adj_norm.cols() || adj_norm.rows() != h.rows()) {
    throw ShapeMismatch("ppr_closed_form: adjacency " +
                        std::to_string(adj_norm.rows()) + "x" +
                        std::to_string(adj_norm.cols()) + ", features " +
                        std::to_string(h.rows()) + "x" + std::to_string(h.cols()));
  }
  const auto n = adj_norm.rows();
  Matrix system = Matrix::Identity(n, n) - (1.0 - alpha) * adj_norm;
  Eigen::FullPivLU<Matrix> lu(system);
  if (!lu.isInvertible()) {
    throw SingularMatrix("I - (1 - alpha) A is singular");
  }
  return alpha * lu.solve(h);
}

Classification classify(ad::Var z_pre, const ClassHead& head) {
  auto logits = ad::add_row_vector(ad::matmul(z_pre, head.w), head.b);
  auto probs = ad::softmax_rows(logits);
  return {probs, ad::mean_rows(probs)};
}

ad::Var expectation_loss(ad::Var y_pred, std::size_t y_true) {
  const std::size_t label[] = {y_true};
  return ad::cross_entropy_rows(y_pred, label);
}

PropagationOutput propagation_forward(ad::Tape& tape, const Graph& graph,
                                      const ad::ParameterSet& params,
                                      const PropagationOptions& options,
                                      bool requires_grad) {
  auto bound = bind_propagation(tape, params, requires_grad);
  auto x = tape.constant(graph.features);
  auto h = mlp_forward(x, bound.mlp);
  auto z_pre = ppr_propagate(graph.adj_norm, h, options.alpha, options.iterations);
  auto cls = classify(z_pre, bound.head);
  return {h, z_pre, cls.probs, cls.y_pred};
}

}  // namespace lgrpool
