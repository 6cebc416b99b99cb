#pragma once

#include <cstdint>
#include <vector>

#include "lgrpool/graph.hpp"

namespace lgrpool {

struct SplitSpec {
  std::uint64_t seed = 0;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> val_indices;
  std::vector<std::size_t> test_indices;
  GraphDataset train;
  GraphDataset val;
  GraphDataset test;
};

/// Shuffled holdout split. Val and test sizes are round(n * fraction), train
/// takes the rest. If the training part misses a class, the shuffle is
/// redrawn with seed+1, seed+2, ... (at most 100 retries).
///
/// Throws EmptySplit when a fraction is not positive, the fractions do not
/// sum to one, or any part would be empty.
DatasetSplit split_dataset(const GraphDataset& ds, const SplitSpec& spec);

/// Graph indices of each mini-batch for one epoch. The order depends only on
/// (seed, epoch); the last batch may be short.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t num_graphs,
                                                    std::size_t batch_size,
                                                    std::uint64_t seed,
                                                    std::uint64_t epoch);

std::vector<std::vector<const Graph*>> iterate_batches(const GraphDataset& ds,
                                                       std::size_t batch_size,
                                                       std::uint64_t seed,
                                                       std::uint64_t epoch);

}  // namespace lgrpool
