#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lgrpool/config.hpp"

namespace lgrpool::cli {

// SHA-1 of "blob <size>\0<content>", as git hashes file contents.
std::string git_blob_hash(std::string_view content);

// One "<hash>  <file>" line per regular file of the dataset directory.
std::string dataset_digest(const std::filesystem::path& dir);

struct RunManifest {
  std::string command;
  TrainingConfig config;
  std::string dataset_name;
  std::filesystem::path dataset_path;
  std::vector<std::uint64_t> seeds;
  std::vector<double> gammas;  // ablation only
  std::filesystem::path output_dir;

  // Hash over everything above except the output directory, plus the
  // dataset file contents.
  std::string content_hash() const;
  nlohmann::json to_json() const;
};

// Creates `out` and writes manifest.json there. If the directory already
// holds a manifest with a different content hash and `force` is not set,
// throws ConfigError instead of overwriting another run.
void claim_output_dir(const RunManifest& manifest, bool force);

}  // namespace lgrpool::cli
