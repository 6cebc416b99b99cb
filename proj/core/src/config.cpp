#include "lgrpool/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "lgrpool/error.hpp"

namespace lgrpool {
namespace {

using Field = std::variant<std::size_t TrainingConfig::*, double TrainingConfig::*>;

struct FieldEntry {
  const char* key;
  Field field;
};

const std::array<FieldEntry, 22>& fields() {
  static const std::array<FieldEntry, 22> table{{
      {"batch_size", &TrainingConfig::batch_size},
      {"num_pooling_layers", &TrainingConfig::num_pooling_layers},
      {"k", &TrainingConfig::k},
      {"alpha", &TrainingConfig::alpha},
      {"epochs", &TrainingConfig::epochs},
      {"hidden", &TrainingConfig::hidden},
      {"lr", &TrainingConfig::lr},
      {"lr_decay", &TrainingConfig::lr_decay},
      {"lr_decay_every", &TrainingConfig::lr_decay_every},
      {"beta1", &TrainingConfig::beta1},
      {"beta2", &TrainingConfig::beta2},
      {"adam_eps", &TrainingConfig::adam_eps},
      {"gamma", &TrainingConfig::gamma},
      {"s_thre", &TrainingConfig::s_thre},
      {"gate_floor", &TrainingConfig::gate_floor},
      {"distance_cap", &TrainingConfig::distance_cap},
      {"em_rounds_max", &TrainingConfig::em_rounds_max},
      {"em_tolerance", &TrainingConfig::em_tolerance},
      {"split_train", &TrainingConfig::split_train},
      {"split_val", &TrainingConfig::split_val},
      {"split_test", &TrainingConfig::split_test},
      {"seed", &TrainingConfig::seed},
  }};
  return table;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void TrainingConfig::validate() const {
  require(batch_size >= 1, "batch_size must be >= 1");
  require(num_pooling_layers >= 1, "num_pooling_layers must be >= 1");
  require(k >= 1, "k must be >= 1");
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  require(epochs >= 1, "epochs must be >= 1");
  require(hidden >= 1, "hidden must be >= 1");
  require(lr >= 0.0 && std::isfinite(lr), "lr must be finite and >= 0");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay must lie in (0, 1]");
  require(lr_decay_every >= 1, "lr_decay_every must be >= 1");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(gamma >= 0.0 && std::isfinite(gamma), "gamma must be finite and >= 0");
  require(s_thre > 0.0 && s_thre < 1.0, "s_thre must lie in (0, 1)");
  require(gate_floor > 0.0, "gate_floor must be > 0");
  require(distance_cap > 0.0, "distance_cap must be > 0");
  require(em_rounds_max >= 1, "em_rounds_max must be >= 1");
  require(em_tolerance >= 0.0, "em_tolerance must be >= 0");
  require(split_train > 0.0 && split_val > 0.0 && split_test > 0.0,
          "split fractions must be positive");
  require(std::abs(split_train + split_val + split_test - 1.0) <= 1e-9,
          "split fractions must sum to 1");
}

PoolingOptions TrainingConfig::pooling() const {
  PoolingOptions p;
  p.score_threshold = s_thre;
  p.max_layers = num_pooling_layers;
  p.gate_floor = gate_floor;
  p.distance_cap = distance_cap;
  return p;
}

SplitSpec TrainingConfig::split(std::uint64_t split_seed) const {
  return {split_seed, split_train, split_val, split_test};
}

TrainingConfig desk_profile() {
  TrainingConfig cfg;
  cfg.epochs = 20;
  cfg.em_rounds_max = 5;
  return cfg;
}

void set_config_value(TrainingConfig& cfg, std::string_view key,
                      std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const auto& entry : fields()) {
    if (key != entry.key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          T parsed{};
          auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
          if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
            throw ConfigError("bad value '" + std::string(value) + "' for " +
                              std::string(key));
          }
          cfg.*member = parsed;
        },
        entry.field);
    return;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainingConfig parse_config(std::string_view text, TrainingConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    try {
      set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainingConfig load_config(const std::filesystem::path& path,
                           TrainingConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string format_config(const TrainingConfig& cfg) {
  std::string out;
  for (const auto& entry : fields()) {
    out += entry.key;
    out += " = ";
    std::visit(
        [&](auto member) {
          const auto& v = cfg.*member;
          if constexpr (std::is_same_v<std::remove_cvref_t<decltype(v)>, double>) {
            out += format_double(v);
          } else {
            out += std::to_string(v);
          }
        },
        entry.field);
    out += '\n';
  }
  return out;
}

nlohmann::json config_to_json(const TrainingConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& entry : fields()) {
    std::visit(
        [&](auto member) {
          const auto& v = cfg.*member;
          if constexpr (std::is_same_v<std::remove_cvref_t<decltype(v)>, double>) {
            // JSON has no infinity; keep such values as text.
            if (std::isfinite(v)) {
              j[entry.key] = v;
            } else {
              j[entry.key] = format_double(v);
            }
          } else {
            j[entry.key] = v;
          }
        },
        entry.field);
  }
  return j;
}

TrainingConfig config_from_json(const nlohmann::json& j) {
  TrainingConfig cfg;
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      set_config_value(cfg, key, value.get<std::string>());
    } else if (value.is_number_unsigned() || value.is_number_integer()) {
      set_config_value(cfg, key, std::to_string(value.get<long long>()));
    } else if (value.is_number_float()) {
      set_config_value(cfg, key, format_double(value.get<double>()));
    } else {
      throw ConfigError("config key " + key + " has a non-numeric value");
    }
  }
  return cfg;
}

}  // namespace lgrpool
