#pragma once

#include "ctlsched/checkpoint.hpp"
#include "ctlsched/config.hpp"
#include "ctlsched/learning.hpp"
#include "ctlsched/sim.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

namespace ctlsched {

/// "iter,objective,lagrangian,lambda_1..n,time_ch_1..n,sat_rate_1..n"
void write_metrics_csv(std::ostream& out, const std::vector<IterationLog>& log, int channels);

/// Ensemble for a run: drawn from the "ensemble" stream of the run seed.
std::vector<PlantModel> run_ensemble(const RunConfig& config);

struct TrainOutput {
  TrainState state;
  std::vector<PlantModel> ensemble;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

/// Trains from scratch and writes checkpoint.ckpt and metrics.csv into
/// config.output_dir. On divergence the metrics so far are written, the last
/// periodic checkpoint is left untouched, and TrainingDiverged propagates.
TrainOutput cmd_train(const RunConfig& config);

struct EvalOutput {
  ComparisonTable table;
  /// Policy behaviour on fresh i.i.d. training-distribution samples with
  /// sampled actions; comparable to the logged training satisfaction rates.
  Vector iid_sat_rate;
  Vector iid_mean_time;
};

/// Rolls out the checkpointed policy for every evaluation seed and writes
/// eval.csv, eval_summary.json and trajectory_learned.csv (first seed).
EvalOutput cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint);

/// Paired comparison of round robin, priority ranking and (when a
/// checkpoint is given) the learned policy; writes comparison.csv and one
/// trajectory_<name>.csv per scheduler for the first seed.
ComparisonTable cmd_compare(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint);

/// Loads a checkpoint and checks that its architecture and ensemble fit the
/// run configuration.
Checkpoint load_compatible_checkpoint(const RunConfig& config, const std::filesystem::path& path);

}  // namespace ctlsched
