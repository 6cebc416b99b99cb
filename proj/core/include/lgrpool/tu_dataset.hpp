#pragma once

#include <filesystem>
#include <string>

#include "lgrpool/graph.hpp"

namespace lgrpool {

/// Reads a dataset in the TU text layout:
///
///   NAME_A.txt                 "i, j" per line, 1-indexed global node ids
///   NAME_graph_indicator.txt   1-indexed graph id for every node
///   NAME_graph_labels.txt      one label per graph
///   NAME_node_labels.txt       optional, one integer label per node
///   NAME_node_attributes.txt   optional, comma-separated floats per node
///
/// Node labels become one-hot features (over the distinct values seen),
/// attributes are appended; with neither file each node gets a constant 1.
/// Graph labels are remapped to 0..C-1 in ascending order of their value.
///
/// Throws ParseError naming the offending file, line, or graph id.
GraphDataset parse_tu_dataset(const std::filesystem::path& dir,
                              const std::string& name);

/// Writes `ds` back in the TU layout under `dir` (created if missing).
/// parse_tu_dataset on the result reproduces the same graphs.
void write_tu_dataset(const GraphDataset& ds,
                      const std::filesystem::path& dir);

}  // namespace lgrpool
