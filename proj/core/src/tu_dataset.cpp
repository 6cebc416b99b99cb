#include "lgrpool/tu_dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <string_view>

#include "lgrpool/error.hpp"

namespace lgrpool {
namespace {

namespace fs = std::filesystem;

struct Line {
  std::size_t number;  // 1-based
  std::string text;
};

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

// Non-blank lines with their original line numbers.
std::vector<Line> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (trim(text).empty()) continue;
    lines.push_back({number, std::move(text)});
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::string where(const fs::path& file, std::size_t line) {
  return file.filename().string() + " line " + std::to_string(line);
}

long long parse_int(std::string_view field, const fs::path& file,
                    std::size_t line) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(where(file, line) + ": expected an integer, got '" +
                     std::string(field) + "'");
  }
  return v;
}

double parse_double(std::string_view field, const fs::path& file,
                    std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError(where(file, line) + ": expected a number, got '" +
                     std::string(field) + "'");
  }
  return v;
}

fs::path required(const fs::path& dir, const std::string& name,
                  const char* suffix) {
  auto p = dir / (name + suffix);
  if (!fs::exists(p)) throw ParseError("missing file " + p.string());
  return p;
}

}  // namespace

GraphDataset parse_tu_dataset(const fs::path& dir, const std::string& name) {
  if (!fs::is_directory(dir)) {
    throw ParseError("dataset directory not found: " + dir.string());
  }
  const auto a_path = required(dir, name, "_A.txt");
  const auto ind_path = required(dir, name, "_graph_indicator.txt");
  const auto lab_path = required(dir, name, "_graph_labels.txt");
  const auto node_lab_path = dir / (name + "_node_labels.txt");
  const auto attr_path = dir / (name + "_node_attributes.txt");

  // Graph labels, remapped to 0..C-1 by ascending value.
  const auto label_lines = read_lines(lab_path);
  if (label_lines.empty()) throw ParseError(lab_path.string() + " is empty");
  std::vector<long long> raw_labels;
  raw_labels.reserve(label_lines.size());
  for (const auto& l : label_lines) {
    raw_labels.push_back(parse_int(split_fields(l.text).front(), lab_path, l.number));
  }
  std::map<long long, std::size_t> label_index;
  for (auto v : raw_labels) label_index.emplace(v, 0);
  {
    std::size_t next = 0;
    for (auto& [value, index] : label_index) index = next++;
  }
  const std::size_t num_graphs = raw_labels.size();

  // Node -> graph, and the node's position inside its graph.
  const auto ind_lines = read_lines(ind_path);
  const std::size_t total_nodes = ind_lines.size();
  std::vector<std::size_t> node_graph(total_nodes);
  std::vector<std::size_t> node_local(total_nodes);
  std::vector<std::size_t> graph_sizes(num_graphs, 0);
  for (std::size_t i = 0; i < total_nodes; ++i) {
    const auto& l = ind_lines[i];
    auto gid = parse_int(split_fields(l.text).front(), ind_path, l.number);
    if (gid < 1 || static_cast<std::size_t>(gid) > num_graphs) {
      throw ParseError(where(ind_path, l.number) + ": graph id " +
                       std::to_string(gid) + " out of range 1.." +
                       std::to_string(num_graphs));
    }
    auto g = static_cast<std::size_t>(gid - 1);
    node_graph[i] = g;
    node_local[i] = graph_sizes[g]++;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (graph_sizes[g] == 0) {
      throw ParseError("graph " + std::to_string(g + 1) + " has no nodes");
    }
  }

  std::vector<std::vector<Edge>> graph_edges(num_graphs);
  for (const auto& l : read_lines(a_path)) {
    auto fields = split_fields(l.text);
    if (fields.size() != 2) {
      throw ParseError(where(a_path, l.number) + ": expected 'i, j'");
    }
    auto a = parse_int(fields[0], a_path, l.number);
    auto b = parse_int(fields[1], a_path, l.number);
    for (auto id : {a, b}) {
      if (id < 1 || static_cast<std::size_t>(id) > total_nodes) {
        throw ParseError(where(a_path, l.number) + ": node id " +
                         std::to_string(id) + " out of range 1.." +
                         std::to_string(total_nodes));
      }
    }
    auto ia = static_cast<std::size_t>(a - 1);
    auto ib = static_cast<std::size_t>(b - 1);
    if (node_graph[ia] != node_graph[ib]) {
      throw ParseError(where(a_path, l.number) + ": edge joins graphs " +
                       std::to_string(node_graph[ia] + 1) + " and " +
                       std::to_string(node_graph[ib] + 1));
    }
    graph_edges[node_graph[ia]].push_back({node_local[ia], node_local[ib]});
  }

  // Node labels -> one-hot over the distinct values present.
  std::vector<long long> node_labels;
  std::map<long long, std::size_t> node_label_index;
  if (fs::exists(node_lab_path)) {
    const auto lines = read_lines(node_lab_path);
    if (lines.size() != total_nodes) {
      throw ParseError(node_lab_path.filename().string() + ": " +
                       std::to_string(lines.size()) + " labels for " +
                       std::to_string(total_nodes) + " nodes");
    }
    node_labels.reserve(total_nodes);
    for (const auto& l : lines) {
      node_labels.push_back(
          parse_int(split_fields(l.text).front(), node_lab_path, l.number));
    }
    for (auto v : node_labels) node_label_index.emplace(v, 0);
    std::size_t next = 0;
    for (auto& [value, index] : node_label_index) index = next++;
  }

  std::vector<std::vector<double>> attributes;
  std::size_t attribute_dim = 0;
  if (fs::exists(attr_path)) {
    const auto lines = read_lines(attr_path);
    if (lines.size() != total_nodes) {
      throw ParseError(attr_path.filename().string() + ": " +
                       std::to_string(lines.size()) + " rows for " +
                       std::to_string(total_nodes) + " nodes");
    }
    attributes.reserve(total_nodes);
    for (const auto& l : lines) {
      std::vector<double> row;
      for (auto f : split_fields(l.text)) {
        row.push_back(parse_double(f, attr_path, l.number));
      }
      if (attributes.empty()) {
        attribute_dim = row.size();
      } else if (row.size() != attribute_dim) {
        throw ParseError(where(attr_path, l.number) + ": expected " +
                         std::to_string(attribute_dim) + " attributes");
      }
      attributes.push_back(std::move(row));
    }
  }

  GraphDataset ds;
  ds.name = name;
  ds.num_classes = label_index.size();
  ds.node_label_dim = node_label_index.size();
  ds.attribute_dim = attribute_dim;
  ds.feature_dim = ds.node_label_dim + ds.attribute_dim;
  const bool constant_feature = ds.feature_dim == 0;
  if (constant_feature) ds.feature_dim = 1;

  std::vector<Matrix> features(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    features[g] = Matrix::Zero(static_cast<Eigen::Index>(graph_sizes[g]),
                               static_cast<Eigen::Index>(ds.feature_dim));
  }
  for (std::size_t i = 0; i < total_nodes; ++i) {
    auto row = features[node_graph[i]].row(static_cast<Eigen::Index>(node_local[i]));
    if (constant_feature) {
      row(0) = 1.0;
      continue;
    }
    if (!node_labels.empty()) {
      row(static_cast<Eigen::Index>(node_label_index.at(node_labels[i]))) = 1.0;
    }
    for (std::size_t c = 0; c < attribute_dim; ++c) {
      row(static_cast<Eigen::Index>(ds.node_label_dim + c)) = attributes[i][c];
    }
  }

  ds.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (!features[g].allFinite()) {
      throw ParseError("graph " + std::to_string(g + 1) +
                       " has non-finite node attributes");
    }
    ds.graphs.push_back(Graph::make(graph_sizes[g], std::move(graph_edges[g]),
                                    std::move(features[g]),
                                    label_index.at(raw_labels[g])));
  }
  return ds;
}

void write_tu_dataset(const GraphDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const char* suffix) {
    std::ofstream out(dir / (ds.name + suffix));
    if (!out) throw ParseError("cannot write " + (dir / (ds.name + suffix)).string());
    return out;
  };
  auto a = open("_A.txt");
  auto ind = open("_graph_indicator.txt");
  auto lab = open("_graph_labels.txt");
  std::ofstream node_lab;
  std::ofstream attr;
  if (ds.node_label_dim > 0) node_lab = open("_node_labels.txt");
  if (ds.attribute_dim > 0) attr = open("_node_attributes.txt");

  char buf[64];
  std::size_t offset = 1;
  for (std::size_t g = 0; g < ds.graphs.size(); ++g) {
    const auto& graph = ds.graphs[g];
    lab << graph.label << '\n';
    for (std::size_t i = 0; i < graph.num_nodes; ++i) {
      ind << (g + 1) << '\n';
      const auto row = graph.features.row(static_cast<Eigen::Index>(i));
      if (ds.node_label_dim > 0) {
        Eigen::Index hot = 0;
        row.head(static_cast<Eigen::Index>(ds.node_label_dim)).maxCoeff(&hot);
        node_lab << hot << '\n';
      }
      if (ds.attribute_dim > 0) {
        for (std::size_t c = 0; c < ds.attribute_dim; ++c) {
          std::snprintf(buf, sizeof buf, "%.17g",
                        row(static_cast<Eigen::Index>(ds.node_label_dim + c)));
          attr << (c ? ", " : "") << buf;
        }
        attr << '\n';
      }
    }
    for (const auto& e : graph.edges) {
      a << (offset + e.u) << ", " << (offset + e.v) << '\n';
      a << (offset + e.v) << ", " << (offset + e.u) << '\n';
    }
    offset += graph.num_nodes;
  }
}

}  // namespace lgrpool
