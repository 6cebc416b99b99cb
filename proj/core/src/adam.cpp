#include "lgrpool/adam.hpp"

#include <cmath>

#include "lgrpool/error.hpp"

namespace lgrpool {

AdamState AdamState::for_params(const ad::ParameterSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ad::ParameterSet& params, const ad::ParameterSet& grads,
               AdamState& state, double lr, const AdamOptions& options) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeMismatch("adam_step: parameter, gradient and moment sets differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const std::initializer_list<const Matrix*> companions{
        &grads[i], &state.first_moment[i], &state.second_moment[i]};
    for (const Matrix* other : companions) {
      if (other->rows() != p.rows() || other->cols() != p.cols()) {
        throw ShapeMismatch("adam_step: " + params.name(i) + " is " +
                            std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                            " but a companion array is " +
                            std::to_string(other->rows()) + "x" +
                            std::to_string(other->cols()));
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    m = options.beta1 * m + (1.0 - options.beta1) * g;
    v = options.beta2 * v + (1.0 - options.beta2) * g.cwiseProduct(g);
    params[i].array() -= lr * (m.array() / correction1) /
                         ((v.array() / correction2).sqrt() + options.eps);
  }
}

double lr_schedule(std::size_t epoch, double lr0, double decay,
                   std::size_t every) {
  return lr0 * std::pow(decay, static_cast<double>(epoch / every));
}

}  // namespace lgrpool
