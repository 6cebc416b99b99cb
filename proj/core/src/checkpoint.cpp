#include "lgrpool/checkpoint.hpp"

#include <fstream>

#include "lgrpool/error.hpp"

namespace lgrpool {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw ParseError("checkpoint array " + name + " is not a non-empty list of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError("checkpoint array " + name + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ParseError("checkpoint array " + name + " has a non-number");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

// Objects keep insertion order in the file via an explicit name list.
json params_to_json(const ad::ParameterSet& set) {
  json names = json::array();
  json values = json::object();
  for (std::size_t i = 0; i < set.size(); ++i) {
    names.push_back(set.name(i));
    values[set.name(i)] = matrix_to_json(set[i]);
  }
  return {{"order", std::move(names)}, {"arrays", std::move(values)}};
}

ad::ParameterSet params_from_json(const json& j) {
  ad::ParameterSet set;
  try {
    for (const auto& name : j.at("order")) {
      auto n = name.get<std::string>();
      set.add(n, matrix_from_json(j.at("arrays").at(n), n));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint parameters: ") + e.what());
  }
  return set;
}

json adam_to_json(const AdamState& s) {
  return {{"step", s.step},
          {"first_moment", params_to_json(s.first_moment)},
          {"second_moment", params_to_json(s.second_moment)}};
}

AdamState adam_from_json(const json& j) {
  AdamState s;
  try {
    s.step = j.at("step").get<std::uint64_t>();
    s.first_moment = params_from_json(j.at("first_moment"));
    s.second_moment = params_from_json(j.at("second_moment"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed optimizer state: ") + e.what());
  }
  return s;
}

}  // namespace

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt) {
  return {{"format_version", kCheckpointFormatVersion},
          {"config", config_to_json(ckpt.config)},
          {"parameters",
           {{"propagation", params_to_json(ckpt.params.propagation)},
            {"pooling", params_to_json(ckpt.params.pooling)}}},
          {"optimizer",
           {{"propagation", adam_to_json(ckpt.propagation_opt)},
            {"pooling", adam_to_json(ckpt.pooling_opt)}}}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const auto version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw ParseError("unsupported checkpoint format_version " +
                       std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.config = config_from_json(j.at("config"));
    ckpt.params.propagation = params_from_json(j.at("parameters").at("propagation"));
    ckpt.params.pooling = params_from_json(j.at("parameters").at("pooling"));
    ckpt.propagation_opt = adam_from_json(j.at("optimizer").at("propagation"));
    ckpt.pooling_opt = adam_from_json(j.at("optimizer").at("pooling"));
    return ckpt;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint " + path.string() + " is not JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace lgrpool
