#pragma once

#include <cmath>
#include <random>

#include "lgrpool/sparse.hpp"

namespace lgrpool::detail {

inline Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out,
                             std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(fan_in, fan_out);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
  return m;
}

}  // namespace lgrpool::detail
