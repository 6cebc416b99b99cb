#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "lgrpool/adam.hpp"
#include "lgrpool/config.hpp"
#include "lgrpool/graph.hpp"
#include "lgrpool/model.hpp"
#include "lgrpool/split.hpp"

namespace lgrpool {

enum class Phase { kExpectation, kMaximization };

struct EpochRecord {
  std::size_t epoch = 0;  // within the phase
  Phase phase = Phase::kExpectation;
  std::size_t em_round = 0;  // 1-based
  double l_exp = 0.0;
  std::optional<double> l_precor;  // only computed in the maximization phase
  double l_tot = 0.0;              // the objective the phase optimizes
  double val_acc = 0.0;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  // Dataset-mean |L_precor| before the first round, then after every
  // maximization phase.
  double initial_precor_error = 0.0;
  std::vector<double> precor_errors;
  std::vector<double> round_val_acc;
  std::size_t best_round = 0;
  std::optional<double> test_accuracy;
  double wall_seconds = 0.0;
};

struct TrainingState {
  ModelParams params;
  AdamState propagation_opt;
  AdamState pooling_opt;
};

TrainingState init_training(const GraphDataset& train,
                            const TrainingConfig& cfg);

/// cfg.epochs epochs of mini-batch Adam on L_exp, updating only the
/// propagation parameters. `val` (may be empty) is scored after each epoch.
/// Throws NonFinite with the round and epoch on divergence.
void expectation_phase(TrainingState& state, const GraphDataset& train,
                       const GraphDataset& val, const TrainingConfig& cfg,
                       std::size_t em_round, RunMetrics* metrics = nullptr);

/// cfg.epochs epochs of mini-batch Adam on L_exp + gamma * L_precor, updating
/// only the pooling parameters. Returns the dataset-mean |L_precor| after the
/// phase.
double maximization_phase(TrainingState& state, const GraphDataset& train,
                          const GraphDataset& val, const TrainingConfig& cfg,
                          std::size_t em_round, RunMetrics* metrics = nullptr);

/// Mean over graphs of |L_precor| with the current parameters.
double mean_precor_error(const ModelParams& params, const GraphDataset& ds,
                         const TrainingConfig& cfg);

struct TrainResult {
  ModelParams best;  // parameters of the round with the best val accuracy
  TrainingState final_state;
  RunMetrics metrics;
};

/// Alternates expectation and maximization phases until the relative change
/// of the pre-cor error drops below cfg.em_tolerance or cfg.em_rounds_max
/// rounds have run. The first round compares against the error before
/// training.
TrainResult em_train(const GraphDataset& train, const GraphDataset& val,
                     const TrainingConfig& cfg);

/// Fraction of graphs whose argmax prediction matches the label. Throws
/// EmptySplit on an empty dataset.
double evaluate(const ModelParams& params, const GraphDataset& test,
                const TrainingConfig& cfg);

struct AblationRow {
  double gamma = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation, 0 for one seed
  std::vector<double> per_seed;
};

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
  double test_accuracy = 0.0;
};

/// Split with `seed`, train with cfg.seed = seed, score the test part.
SeedRun run_seed(const GraphDataset& ds, const TrainingConfig& cfg,
                 std::uint64_t seed);

/// Runs seeds on up to `jobs` threads; results are in `seeds` order.
std::vector<SeedRun> run_seeds(const GraphDataset& ds,
                               const TrainingConfig& cfg,
                               std::span<const std::uint64_t> seeds,
                               std::size_t jobs = 1);

std::vector<AblationRow> ablate_gamma(const GraphDataset& ds,
                                      std::span<const double> gammas,
                                      const TrainingConfig& cfg,
                                      std::span<const std::uint64_t> seeds,
                                      std::size_t jobs = 1);

double mean(std::span<const double> xs);
double sample_stddev(std::span<const double> xs);

/// Header `epoch,phase,em_round,l_exp,l_precor,l_tot,val_acc`; phase is E or
/// M, l_precor is empty for expectation rows.
void write_metrics_csv(std::ostream& out, const RunMetrics& metrics);

/// Header `gamma,mean_acc,std_acc`.
void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows);

}  // namespace lgrpool
