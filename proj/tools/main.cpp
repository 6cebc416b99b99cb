#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lgrpool/checkpoint.hpp"
#include "lgrpool/config.hpp"
#include "lgrpool/error.hpp"
#include "lgrpool/grad_suite.hpp"
#include "lgrpool/model.hpp"
#include "lgrpool/training.hpp"
#include "lgrpool/tu_dataset.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace lgrpool;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitGradFailure = 3;
constexpr double kGradTolerance = 1e-4;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view token, const char* what) {
  token = trim(token);
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size() || token.empty()) {
    throw ConfigError(std::string("malformed ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_commas(std::string_view text) {
  std::vector<std::string_view> parts;
  while (true) {
    auto comma = text.find(',');
    parts.push_back(text.substr(0, comma));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return parts;
}

// "A..B" (inclusive), "a,b,c" or a single seed.
std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  if (auto dots = text.find(".."); dots != std::string_view::npos) {
    auto lo = parse_number<std::uint64_t>(text.substr(0, dots), "seed");
    auto hi = parse_number<std::uint64_t>(text.substr(dots + 2), "seed");
    if (hi < lo) throw ConfigError("empty seed range " + std::string(text));
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  for (auto part : split_commas(text)) seeds.push_back(parse_number<std::uint64_t>(part, "seed"));
  return seeds;
}

std::vector<double> parse_gammas(std::string_view text) {
  std::vector<double> gammas;
  for (auto part : split_commas(text)) {
    double g = parse_number<double>(part, "gamma");
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("gamma must be finite and >= 0");
    gammas.push_back(g);
  }
  return gammas;
}

struct DatasetRef {
  fs::path path;
  std::string name;
};

// Relative paths that do not exist are looked up under $LGRPOOL_DATA.
DatasetRef resolve_dataset(const std::string& arg) {
  if (arg.empty()) throw ConfigError("--dataset is required");
  fs::path p = fs::path(arg).lexically_normal();
  if (!p.is_absolute() && !fs::exists(p)) {
    if (const char* root = std::getenv("LGRPOOL_DATA"); root && *root) {
      p = (fs::path(root) / p).lexically_normal();
    }
  }
  std::string name = p.filename().string();
  if (name.empty()) name = p.parent_path().filename().string();
  return {p, name};
}

GraphDataset load_dataset(const DatasetRef& ref) {
  return parse_tu_dataset(ref.path, ref.name);
}

struct CommonOptions {
  std::string dataset;
  std::string config;
  std::vector<std::string> overrides;
  std::string seeds = "0";
  std::string out;
  std::size_t jobs = 1;
  bool force = false;
};

TrainingConfig build_config(const CommonOptions& o) {
  TrainingConfig cfg = o.config.empty() ? TrainingConfig{} : load_config(o.config);
  for (const auto& kv : o.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, trim(std::string_view(kv).substr(0, eq)),
                     trim(std::string_view(kv).substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

fs::path seed_dir(const fs::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

json summary_json(const std::string& dataset, const std::vector<std::uint64_t>& seeds,
                  const std::vector<double>& accs) {
  json per_seed = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    per_seed.push_back({{"seed", seeds[i]}, {"test_acc", accs[i]}});
  }
  return {{"dataset", dataset},
          {"mean_acc", mean(accs)},
          {"std_acc", sample_stddev(accs)},
          {"per_seed", per_seed}};
}

fs::path default_out(const std::string& command, const DatasetRef& ref) {
  return fs::path("runs") / (ref.name + "-" + command);
}

int cmd_train(const CommonOptions& o, bool eval_only) {
  const auto ref = resolve_dataset(o.dataset);
  const auto cfg = build_config(o);
  const auto seeds = parse_seeds(o.seeds);
  const fs::path out = o.out.empty() ? default_out("train", ref) : fs::path(o.out);
  const auto ds = load_dataset(ref);

  if (eval_only) {
    std::vector<double> accs;
    for (auto seed : seeds) {
      auto ckpt = load_checkpoint(seed_dir(out, seed) / "checkpoint.json");
      auto split = split_dataset(ds, ckpt.config.split(seed));
      accs.push_back(evaluate(ckpt.params, split.test, ckpt.config));
    }
    std::cout << summary_json(ref.name, seeds, accs).dump(2) << "\n";
    return 0;
  }

  cli::RunManifest manifest{"train", cfg, ref.name, ref.path, seeds, {}, out};
  cli::claim_output_dir(manifest, o.force);

  auto runs = run_seeds(ds, cfg, seeds, o.jobs);
  std::vector<double> accs;
  for (const auto& run : runs) {
    const auto dir = seed_dir(out, run.seed);
    fs::create_directories(dir);
    TrainingConfig seed_cfg = cfg;
    seed_cfg.seed = run.seed;
    save_checkpoint(dir / "checkpoint.json",
                    {seed_cfg, run.result.best, run.result.final_state.propagation_opt,
                     run.result.final_state.pooling_opt});
    std::ostringstream csv;
    write_metrics_csv(csv, run.result.metrics);
    write_text(dir / "metrics.csv", csv.str());
    accs.push_back(run.test_accuracy);
    std::cerr << "seed " << run.seed << ": test_acc " << run.test_accuracy << ", "
              << run.result.metrics.precor_errors.size() << " EM rounds, "
              << run.result.metrics.wall_seconds << " s\n";
  }
  const auto summary = summary_json(ref.name, seeds, accs);
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint,
             std::optional<std::uint64_t> seed) {
  const auto ref = resolve_dataset(o.dataset);
  const auto ds = load_dataset(ref);
  auto ckpt = load_checkpoint(checkpoint);
  const auto s = seed.value_or(ckpt.config.seed);
  auto split = split_dataset(ds, ckpt.config.split(s));
  json j = {{"dataset", ref.name},
            {"seed", s},
            {"train_acc", evaluate(ckpt.params, split.train, ckpt.config)},
            {"val_acc", evaluate(ckpt.params, split.val, ckpt.config)},
            {"test_acc", evaluate(ckpt.params, split.test, ckpt.config)}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(double eps, std::uint64_t seed, bool inject_fault) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ConfigError("--eps must lie in [1e-7, 1e-3]");
  }
  ad::testing::set_sigmoid_fault(inject_fault);
  const auto targets = run_gradient_suite({.eps = eps, .seed = seed});
  ad::testing::set_sigmoid_fault(false);

  std::vector<std::string> failures;
  for (const auto& t : targets) {
    const bool ok = t.result.max_relative_error <= kGradTolerance;
    std::cout << (ok ? "ok   " : "FAIL ") << t.name << " max_rel_err "
              << t.result.max_relative_error << "\n";
    if (!ok) {
      for (const auto& [block, err] : t.result.per_parameter) {
        if (err > kGradTolerance) failures.push_back(t.name + ":" + block);
      }
    }
  }
  if (failures.empty()) return 0;
  std::cerr << "gradient check failed for:";
  for (const auto& f : failures) std::cerr << ' ' << f;
  std::cerr << "\n";
  return kExitGradFailure;
}

int cmd_ablate(const CommonOptions& o, const std::string& gamma_list) {
  const auto ref = resolve_dataset(o.dataset);
  const auto cfg = build_config(o);
  const auto seeds = parse_seeds(o.seeds);
  const auto gammas = parse_gammas(gamma_list);
  const fs::path out = o.out.empty() ? default_out("ablate", ref) : fs::path(o.out);
  const auto ds = load_dataset(ref);

  cli::RunManifest manifest{"ablate", cfg, ref.name, ref.path, seeds, gammas, out};
  cli::claim_output_dir(manifest, o.force);
  auto rows = ablate_gamma(ds, gammas, cfg, seeds, o.jobs);
  std::ostringstream csv;
  write_ablation_csv(csv, rows);
  write_text(out / "gamma_ablation.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_inspect(const CommonOptions& o, std::optional<std::size_t> graph_index, bool trace) {
  const auto ref = resolve_dataset(o.dataset);
  const auto ds = load_dataset(ref);
  const auto summary = dataset_summary(ds);
  if (!trace) {
    std::cout << summary.dump(2) << "\n";
    return 0;
  }
  const auto cfg = build_config(o);
  const std::size_t index = graph_index.value_or(0);
  if (index >= ds.size()) {
    throw ConfigError("--graph " + std::to_string(index) + " out of range (dataset has " +
                      std::to_string(ds.size()) + " graphs)");
  }
  auto params = init_model({ds.feature_dim, cfg.hidden, ds.num_classes, cfg.num_pooling_layers},
                           cfg.seed);
  auto opts = forward_options(cfg);
  opts.propagation_grad = false;
  opts.pooling_grad = false;
  ad::Tape tape;
  auto out = forward_graph(tape, ds.graphs[index], params, opts);
  json j = {{"dataset", summary},
            {"graph", index},
            {"label", ds.graphs[index].label},
            {"l_exp", out.l_exp.scalar()},
            {"l_precor", out.l_precor->scalar()},
            {"trace", trace_to_json(*out.trace)}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool training) {
  cmd->add_option("--dataset", o.dataset,
                  "TU dataset directory (NAME/NAME_A.txt, ...); relative paths fall back "
                  "to $LGRPOOL_DATA");
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--set", o.overrides, "override a config key, key=value (repeatable)");
  if (training) {
    cmd->add_option("--seeds", o.seeds, "seeds as A..B (inclusive) or a,b,c")->capture_default_str();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--jobs", o.jobs, "seeds trained concurrently")->capture_default_str();
    cmd->add_flag("--force", o.force, "overwrite an output directory from a different run");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical graph pooling trained with alternating EM phases"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* train = app.add_subcommand("train", "train over seeds and write checkpoints and metrics");
  add_common(train, common, true);
  bool eval_only = false;
  train->add_flag("--eval-only", eval_only,
                  "recompute the summary from the checkpoints under --out");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on the splits of a seed");
  add_common(eval, common, false);
  std::string checkpoint;
  std::optional<std::uint64_t> eval_seed;
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json")->required();
  eval->add_option("--seed", eval_seed, "split seed (default: the checkpoint's)");

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of all gradients");
  double eps = 1e-6;
  std::uint64_t grad_seed = 0;
  bool inject_fault = false;
  gradcheck->add_option("--eps", eps, "central-difference step")->capture_default_str();
  gradcheck->add_option("--seed", grad_seed, "input seed")->capture_default_str();
  gradcheck->add_flag("--inject-sigmoid-fault", inject_fault,
                      "use a wrong sigmoid derivative (checker self-test)")
      ->group("");

  auto* ablate = app.add_subcommand("ablate", "gamma sweep over seeds");
  add_common(ablate, common, true);
  std::string gamma_list = "0.1,0.15,0.2,0.25,0.3";
  ablate->add_option("--gamma", gamma_list, "comma-separated gamma values")->capture_default_str();

  auto* inspect = app.add_subcommand("inspect", "dataset statistics and pooling traces");
  add_common(inspect, common, false);
  std::optional<std::size_t> graph_index;
  bool trace = false;
  inspect->add_option("--graph", graph_index, "graph index for --trace");
  inspect->add_flag("--trace", trace, "dump the pooling trace with untrained parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }

  try {
    if (*train) return cmd_train(common, eval_only);
    if (*eval) return cmd_eval(common, checkpoint, eval_seed);
    if (*gradcheck) return cmd_gradcheck(eps, grad_seed, inject_fault);
    if (*ablate) return cmd_ablate(common, gamma_list);
    if (*inspect) return cmd_inspect(common, graph_index, trace);
  } catch (const NonFinite& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
