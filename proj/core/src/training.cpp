#include "lgrpool/training.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include "lgrpool/error.hpp"

namespace lgrpool {
namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Shuffle key for one epoch of one phase of one EM round.
std::uint64_t epoch_key(std::size_t round, Phase phase, std::size_t epoch) {
  return (static_cast<std::uint64_t>(round) << 33) |
         (static_cast<std::uint64_t>(phase == Phase::kMaximization) << 32) |
         static_cast<std::uint64_t>(epoch);
}

[[noreturn]] void rethrow_diverged(const NonFinite& e, const char* phase,
                                   std::size_t round, std::size_t epoch) {
  throw NonFinite(std::string(phase) + " phase diverged in EM round " +
                  std::to_string(round) + ", epoch " + std::to_string(epoch) +
                  ": " + e.what());
}

double maybe_evaluate(const ModelParams& params, const GraphDataset& ds,
                      const TrainingConfig& cfg) {
  return ds.graphs.empty() ? 0.0 : evaluate(params, ds, cfg);
}

}  // namespace

TrainingState init_training(const GraphDataset& train,
                            const TrainingConfig& cfg) {
  cfg.validate();
  ModelShape shape{train.feature_dim, cfg.hidden, train.num_classes,
                   cfg.num_pooling_layers};
  TrainingState state;
  state.params = init_model(shape, cfg.seed);
  state.propagation_opt = AdamState::for_params(state.params.propagation);
  state.pooling_opt = AdamState::for_params(state.params.pooling);
  return state;
}

void expectation_phase(TrainingState& state, const GraphDataset& train,
                       const GraphDataset& val, const TrainingConfig& cfg,
                       std::size_t em_round, RunMetrics* metrics) {
  ForwardOptions opts = forward_options(cfg);
  opts.with_pooling = false;
  opts.pooling_grad = false;
  const AdamOptions adam{cfg.beta1, cfg.beta2, cfg.adam_eps};
  auto& params = state.params.propagation;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg.lr, cfg.lr_decay, cfg.lr_decay_every);
    double l_exp_total = 0.0;
    try {
      for (const auto& batch :
           batch_indices(train.size(), cfg.batch_size, cfg.seed,
                         epoch_key(em_round, Phase::kExpectation, epoch))) {
        auto grads = params.zeros_like();
        const double weight = 1.0 / static_cast<double>(batch.size());
        for (auto i : batch) {
          ad::Tape tape;
          auto out = forward_graph(tape, train.graphs[i], state.params, opts);
          l_exp_total += out.l_exp.scalar();
          tape.backward(out.l_exp);
          tape.accumulate_parameter_grads(params, grads, weight);
        }
        adam_step(params, grads, state.propagation_opt, lr, adam);
        if (!params.all_finite()) throw NonFinite("propagation parameters");
      }
    } catch (const NonFinite& e) {
      rethrow_diverged(e, "expectation", em_round, epoch);
    }
    if (metrics) {
      EpochRecord rec;
      rec.epoch = epoch;
      rec.phase = Phase::kExpectation;
      rec.em_round = em_round;
      rec.l_exp = l_exp_total / static_cast<double>(train.size());
      rec.l_tot = rec.l_exp;
      rec.val_acc = maybe_evaluate(state.params, val, cfg);
      metrics->epochs.push_back(rec);
    }
  }
}

double maximization_phase(TrainingState& state, const GraphDataset& train,
                          const GraphDataset& val, const TrainingConfig& cfg,
                          std::size_t em_round, RunMetrics* metrics) {
  ForwardOptions opts = forward_options(cfg);
  opts.propagation_grad = false;
  const AdamOptions adam{cfg.beta1, cfg.beta2, cfg.adam_eps};
  auto& params = state.params.pooling;
  // Propagation is frozen, so validation accuracy cannot move in this phase.
  const double val_acc = metrics ? maybe_evaluate(state.params, val, cfg) : 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg.lr, cfg.lr_decay, cfg.lr_decay_every);
    double l_exp_total = 0.0;
    double l_precor_total = 0.0;
    double l_tot_total = 0.0;
    try {
      for (const auto& batch :
           batch_indices(train.size(), cfg.batch_size, cfg.seed,
                         epoch_key(em_round, Phase::kMaximization, epoch))) {
        auto grads = params.zeros_like();
        const double weight = 1.0 / static_cast<double>(batch.size());
        for (auto i : batch) {
          ad::Tape tape;
          auto out = forward_graph(tape, train.graphs[i], state.params, opts);
          l_exp_total += out.l_exp.scalar();
          l_precor_total += out.l_precor->scalar();
          l_tot_total += out.l_tot->scalar();
          tape.backward(*out.l_tot);
          tape.accumulate_parameter_grads(params, grads, weight);
        }
        adam_step(params, grads, state.pooling_opt, lr, adam);
        if (!params.all_finite()) throw NonFinite("pooling parameters");
      }
    } catch (const NonFinite& e) {
      rethrow_diverged(e, "maximization", em_round, epoch);
    }
    if (metrics) {
      const auto n = static_cast<double>(train.size());
      EpochRecord rec;
      rec.epoch = epoch;
      rec.phase = Phase::kMaximization;
      rec.em_round = em_round;
      rec.l_exp = l_exp_total / n;
      rec.l_precor = l_precor_total / n;
      rec.l_tot = l_tot_total / n;
      rec.val_acc = val_acc;
      metrics->epochs.push_back(rec);
    }
  }
  return mean_precor_error(state.params, train, cfg);
}

double mean_precor_error(const ModelParams& params, const GraphDataset& ds,
                         const TrainingConfig& cfg) {
  if (ds.graphs.empty()) throw EmptySplit("mean_precor_error on an empty dataset");
  ForwardOptions opts = forward_options(cfg);
  opts.propagation_grad = false;
  opts.pooling_grad = false;
  double total = 0.0;
  for (const auto& g : ds.graphs) {
    ad::Tape tape;
    auto out = forward_graph(tape, g, params, opts);
    total += std::abs(out.l_precor->scalar());
  }
  return total / static_cast<double>(ds.size());
}

TrainResult em_train(const GraphDataset& train, const GraphDataset& val,
                     const TrainingConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (train.graphs.empty()) throw EmptySplit("empty training set");
  TrainResult result;
  result.final_state = init_training(train, cfg);
  auto& state = result.final_state;
  auto& metrics = result.metrics;

  metrics.initial_precor_error = mean_precor_error(state.params, train, cfg);
  double previous = metrics.initial_precor_error;
  double best_acc = -1.0;
  for (std::size_t round = 1; round <= cfg.em_rounds_max; ++round) {
    expectation_phase(state, train, val, cfg, round, &metrics);
    const double error = maximization_phase(state, train, val, cfg, round, &metrics);
    metrics.precor_errors.push_back(error);

    const double acc = maybe_evaluate(state.params, val, cfg);
    metrics.round_val_acc.push_back(acc);
    if (acc > best_acc) {
      best_acc = acc;
      result.best = state.params;
      metrics.best_round = round;
    }
    const double change = std::abs(error - previous) / std::max(1.0, previous);
    previous = error;
    if (change < cfg.em_tolerance) break;
  }
  metrics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double evaluate(const ModelParams& params, const GraphDataset& test,
                const TrainingConfig& cfg) {
  if (test.graphs.empty()) throw EmptySplit("cannot evaluate on an empty set");
  const auto opts = cfg.propagation();
  std::size_t correct = 0;
  for (const auto& g : test.graphs) {
    if (predict(g, params, opts) == g.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

SeedRun run_seed(const GraphDataset& ds, const TrainingConfig& cfg,
                 std::uint64_t seed) {
  TrainingConfig c = cfg;
  c.seed = seed;
  auto split = split_dataset(ds, c.split(seed));
  SeedRun run;
  run.seed = seed;
  run.result = em_train(split.train, split.val, c);
  run.test_accuracy = evaluate(run.result.best, split.test, c);
  run.result.metrics.test_accuracy = run.test_accuracy;
  return run;
}

std::vector<SeedRun> run_seeds(const GraphDataset& ds,
                               const TrainingConfig& cfg,
                               std::span<const std::uint64_t> seeds,
                               std::size_t jobs) {
  std::vector<SeedRun> runs(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < seeds.size(); i = next++) {
      try {
        runs[i] = run_seed(ds, cfg, seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::max<std::size_t>(1, std::min(jobs, seeds.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

std::vector<AblationRow> ablate_gamma(const GraphDataset& ds,
                                      std::span<const double> gammas,
                                      const TrainingConfig& cfg,
                                      std::span<const std::uint64_t> seeds,
                                      std::size_t jobs) {
  if (gammas.empty()) throw ConfigError("gamma list is empty");
  if (seeds.empty()) throw ConfigError("seed list is empty");
  std::vector<AblationRow> rows;
  for (double gamma : gammas) {
    TrainingConfig c = cfg;
    c.gamma = gamma;
    AblationRow row;
    row.gamma = gamma;
    for (const auto& run : run_seeds(ds, c, seeds, jobs)) {
      row.per_seed.push_back(run.test_accuracy);
    }
    row.mean_accuracy = mean(row.per_seed);
    row.std_accuracy = sample_stddev(row.per_seed);
    rows.push_back(std::move(row));
  }
  return rows;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double total = 0.0;
  for (double x : xs) total += x;
  return total / static_cast<double>(xs.size());
}

double sample_stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

void write_metrics_csv(std::ostream& out, const RunMetrics& metrics) {
  out << "epoch,phase,em_round,l_exp,l_precor,l_tot,val_acc\n";
  for (const auto& r : metrics.epochs) {
    out << r.epoch << ',' << (r.phase == Phase::kExpectation ? 'E' : 'M') << ','
        << r.em_round << ',' << fmt(r.l_exp) << ','
        << (r.l_precor ? fmt(*r.l_precor) : std::string{}) << ',' << fmt(r.l_tot)
        << ',' << fmt(r.val_acc) << '\n';
  }
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows) {
  out << "gamma,mean_acc,std_acc\n";
  for (const auto& r : rows) {
    out << fmt(r.gamma) << ',' << fmt(r.mean_accuracy) << ','
        << fmt(r.std_accuracy) << '\n';
  }
}

}  // namespace lgrpool
