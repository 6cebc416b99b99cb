#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "lgrpool/config.hpp"
#include "lgrpool/training.hpp"

namespace lgrpool {

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  TrainingConfig config;
  ModelParams params;
  AdamState propagation_opt;
  AdamState pooling_opt;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ParseError on a wrong format_version or malformed arrays.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lgrpool
