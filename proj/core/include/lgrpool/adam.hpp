#pragma once

#include <cstddef>
#include <cstdint>

#include "lgrpool/tape.hpp"

namespace lgrpool {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ad::ParameterSet first_moment;
  ad::ParameterSet second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ad::ParameterSet& params);
};

/// One bias-corrected Adam update. Throws ShapeMismatch if grads or state do
/// not mirror params.
void adam_step(ad::ParameterSet& params, const ad::ParameterSet& grads,
               AdamState& state, double lr, const AdamOptions& options = {});

/// lr0 * decay^floor(epoch / every)
double lr_schedule(std::size_t epoch, double lr0, double decay = 0.95,
                   std::size_t every = 10);

}  // namespace lgrpool
