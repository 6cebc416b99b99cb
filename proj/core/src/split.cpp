#include "lgrpool/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lgrpool/error.hpp"

namespace lgrpool {
namespace {

constexpr int kMaxReshuffles = 100;

bool covers_all_classes(const GraphDataset& ds,
                        std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> present_all(ds.num_classes, 0);
  for (const auto& g : ds.graphs) present_all[g.label] = 1;
  std::vector<std::uint8_t> present(ds.num_classes, 0);
  for (auto i : indices) present[ds.graphs[i].label] = 1;
  return present == present_all;
}

}  // namespace

DatasetSplit split_dataset(const GraphDataset& ds, const SplitSpec& spec) {
  if (!(spec.train > 0.0) || !(spec.val > 0.0) || !(spec.test > 0.0)) {
    throw EmptySplit("split fractions must all be positive");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.val));
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.test));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) {
    throw EmptySplit("dataset of " + std::to_string(n) +
                     " graphs is too small for the requested split");
  }
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  for (int attempt = 0; attempt <= kMaxReshuffles; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed + static_cast<std::uint64_t>(attempt));
    std::shuffle(order.begin(), order.end(), rng);
    std::span<const std::size_t> train_part(order.data(), n_train);
    if (!covers_all_classes(ds, train_part)) continue;

    DatasetSplit split;
    split.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                             order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                              order.end());
    split.train = ds.subset(split.train_indices);
    split.val = ds.subset(split.val_indices);
    split.test = ds.subset(split.test_indices);
    return split;
  }
  throw EmptySplit("no shuffle put every class in the training part after " +
                   std::to_string(kMaxReshuffles) + " retries");
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t num_graphs,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<std::size_t> order(num_graphs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < num_graphs; start += batch_size) {
    auto stop = std::min(num_graphs, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

std::vector<std::vector<const Graph*>> iterate_batches(const GraphDataset& ds,
                                                       std::size_t batch_size,
                                                       std::uint64_t seed,
                                                       std::uint64_t epoch) {
  std::vector<std::vector<const Graph*>> out;
  for (const auto& batch : batch_indices(ds.size(), batch_size, seed, epoch)) {
    auto& b = out.emplace_back();
    b.reserve(batch.size());
    for (auto i : batch) b.push_back(&ds.graphs[i]);
  }
  return out;
}

}  // namespace lgrpool
