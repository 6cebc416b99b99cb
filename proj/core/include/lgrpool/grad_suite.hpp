#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lgrpool/grad_check.hpp"

namespace lgrpool {

struct GradTarget {
  std::string name;
  ad::GradCheckResult result;
};

/// Gradient check of every tape primitive on random inputs in [-2, 2], then
/// of the full total loss (propagation + two pooling layers) on a fixed
/// 6-node graph whose edge scores all keep at least 10 * eps away from the
/// merge threshold.
std::vector<GradTarget> run_gradient_suite(const ad::GradCheckOptions& options);

}  // namespace lgrpool
