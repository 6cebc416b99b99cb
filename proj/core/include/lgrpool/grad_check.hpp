#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lgrpool/tape.hpp"

namespace lgrpool::ad {

struct GradCheckOptions {
  double eps = 1e-6;  // must lie in [1e-7, 1e-3]
  double sample_fraction = 0.05;
  std::size_t min_samples = 20;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  // Worst error seen in each parameter array that had sampled coordinates.
  std::vector<std::pair<std::string, double>> per_parameter;
};

/// Compares backward() gradients with central differences.
///
/// `builder` records a scalar loss on a fresh tape, reading parameters from
/// `params` (bound via Tape::parameter). The checker perturbs those sets in
/// place and restores them before returning. A random sample of
/// max(min_samples, sample_fraction * total) coordinates is checked (all of
/// them if there are fewer); the error of a coordinate is
/// |analytic - numeric| / max(1, |numeric|).
///
/// Throws NonDeterministic if two evaluations at the same point disagree.
GradCheckResult grad_check(const std::function<Var(Tape&)>& builder,
                           std::span<ParameterSet* const> params,
                           const GradCheckOptions& options = {});

}  // namespace lgrpool::ad
