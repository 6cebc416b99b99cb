#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lgrpool/pooling.hpp"
#include "lgrpool/propagation.hpp"
#include "lgrpool/split.hpp"

namespace lgrpool {

struct TrainingConfig {
  std::size_t batch_size = 32;
  std::size_t num_pooling_layers = 14;
  std::size_t k = 10;
  double alpha = 0.3;
  std::size_t epochs = 100;  // per phase and EM round
  std::size_t hidden = 200;
  double lr = 1e-3;
  double lr_decay = 0.95;
  std::size_t lr_decay_every = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double gamma = 0.2;
  double s_thre = 0.5;
  double gate_floor = 1e-6;
  double distance_cap = 10.0;
  std::size_t em_rounds_max = 10;
  double em_tolerance = 1e-3;
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  PropagationOptions propagation() const { return {alpha, k}; }
  PoolingOptions pooling() const;
  SplitSpec split(std::uint64_t split_seed) const;
};

/// Defaults with the per-phase budget used for quick local runs:
/// 20 epochs per phase, 5 EM rounds.
TrainingConfig desk_profile();

/// Sets one field from its textual value. Throws ConfigError for unknown keys
/// or unparsable values.
void set_config_value(TrainingConfig& cfg, std::string_view key,
                      std::string_view value);

/// Flat `key = value` text; `#` starts a comment. Unlisted keys keep the
/// values already in `base`. Throws ConfigError naming the line on unknown
/// keys or unparsable values, and when the result fails validate().
TrainingConfig parse_config(std::string_view text,
                            TrainingConfig base = TrainingConfig{});
TrainingConfig load_config(const std::filesystem::path& path,
                           TrainingConfig base = TrainingConfig{});

/// Inverse of parse_config: every field, one per line.
std::string format_config(const TrainingConfig& cfg);
nlohmann::json config_to_json(const TrainingConfig& cfg);
TrainingConfig config_from_json(const nlohmann::json& j);

}  // namespace lgrpool
