#include "lgrpool/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "lgrpool/error.hpp"

namespace lgrpool::ad {
namespace {

struct Coordinate {
  std::size_t set;
  std::size_t param;
  Eigen::Index flat;
};

double evaluate(const std::function<Var(Tape&)>& builder) {
  Tape tape;
  return builder(tape).scalar();
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(Tape&)>& builder,
                           std::span<ParameterSet* const> params,
                           const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3)) {
    throw ConfigError("grad_check eps must lie in [1e-7, 1e-3], got " +
                      std::to_string(options.eps));
  }

  std::vector<ParameterSet> analytic;
  double base = 0.0;
  {
    Tape tape;
    Var loss = builder(tape);
    base = loss.scalar();
    tape.backward(loss);
    for (auto* set : params) {
      analytic.push_back(set->zeros_like());
      tape.accumulate_parameter_grads(*set, analytic.back());
    }
  }
  if (double again = evaluate(builder); again != base) {
    throw NonDeterministic("loss evaluated to " + std::to_string(base) +
                           " and then " + std::to_string(again) +
                           " at identical parameters");
  }

  std::vector<Coordinate> all;
  for (std::size_t s = 0; s < params.size(); ++s) {
    const auto& set = *params[s];
    for (std::size_t p = 0; p < set.size(); ++p) {
      for (Eigen::Index i = 0; i < set[p].size(); ++i) all.push_back({s, p, i});
    }
  }
  const auto wanted = std::max<std::size_t>(
      options.min_samples,
      static_cast<std::size_t>(std::ceil(options.sample_fraction *
                                         static_cast<double>(all.size()))));
  std::vector<Coordinate> sample;
  if (wanted >= all.size()) {
    sample = all;
  } else {
    std::mt19937_64 rng(options.seed);
    std::sample(all.begin(), all.end(), std::back_inserter(sample), wanted, rng);
  }

  GradCheckResult result;
  std::map<std::pair<std::size_t, std::size_t>, double> worst;
  for (const auto& c : sample) {
    double& x = (*params[c.set])[c.param].data()[c.flat];
    const double original = x;
    double plus = 0.0;
    double minus = 0.0;
    try {
      x = original + options.eps;
      plus = evaluate(builder);
      x = original - options.eps;
      minus = evaluate(builder);
    } catch (...) {
      x = original;
      throw;
    }
    x = original;
    const double numeric = (plus - minus) / (2.0 * options.eps);
    const double exact = analytic[c.set][c.param].data()[c.flat];
    const double err =
        std::abs(exact - numeric) / std::max(1.0, std::abs(numeric));
    result.max_relative_error = std::max(result.max_relative_error, err);
    auto& w = worst[{c.set, c.param}];
    w = std::max(w, err);
  }
  result.coordinates_checked = sample.size();
  for (const auto& [key, err] : worst) {
    result.per_parameter.emplace_back(params[key.first]->name(key.second), err);
  }
  return result;
}

}  // namespace lgrpool::ad
