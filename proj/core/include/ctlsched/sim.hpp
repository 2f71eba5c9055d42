#pragma once

#include "ctlsched/phy.hpp"
#include "ctlsched/plant.hpp"
#include "ctlsched/policy.hpp"
#include "ctlsched/rng.hpp"
#include "ctlsched/schedule.hpp"

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ctlsched {

/// Any per-cycle scheduling rule. `rng` is a stream reserved for the
/// scheduler's own randomness (sampled policy execution).
using Scheduler = std::function<Schedule(long cycle, std::span<const PlantState> states,
                                         const ChannelMatrix& channels, Rng& rng)>;

struct NamedScheduler {
  std::string name;
  Scheduler schedule;
};

struct RolloutConfig {
  long horizon = 2000;
  double init_lo = -10.0;
  double init_hi = 10.0;
  double stability_threshold = 100.0;
  double eval_window = 0.25;
  int num_seeds = 10;
  bool quantize_rates = true;
  bool sampled_execution = false;
  double divergence_limit = 1e12;

  void validate() const;
};

struct RolloutSummary {
  int stable_count = 0;
  double mean_cost = 0.0;       // mean of x^T P x over the eval window and all systems
  double violation_rate = 0.0;  // fraction of (cycle, channel) plans over t_max
};

struct RolloutResult {
  int systems = 0;
  int state_dim = 0;
  long horizon = 0;
  Matrix initial;                // m x p
  Matrix states;                 // (m*p) x horizon; column k holds x^{k+1}
  std::vector<Schedule> schedules;
  IndexMatrix received;          // horizon x m
  Matrix planned_time;           // horizon x n
  Matrix realized_time;          // horizon x n
  std::vector<bool> diverged;
  std::vector<double> lyap_window_cost;  // per system, mean over the eval window
  RolloutSummary summary;
  std::uint64_t fading_checksum = 0;
  std::uint64_t noise_checksum = 0;

  /// State of system i after cycle k.
  Vector state(long k, int i) const { return states.col(k).segment(i * state_dim, state_dim); }
};

/// Closed-loop simulation. Fading, plant noise, packet outcomes, initial
/// states and scheduler randomness come from separate streams keyed by
/// `seed`, so different schedulers see identical channel and noise sequences.
RolloutResult rollout(const Scheduler& scheduler, std::span<const PlantModel> ensemble, const PhyModel& phy,
                      const LatencyConstraint& lat, const RolloutConfig& config, std::uint64_t seed);

int stability_count(const RolloutResult& result, const RolloutConfig& config);

Scheduler make_round_robin(const PhyModel& phy, const LatencyConstraint& lat, const BaselineParams& params);
Scheduler make_priority_ranking(std::span<const PlantModel> ensemble, const PhyModel& phy,
                                const LatencyConstraint& lat, const BaselineParams& params);
/// Learned policy; deterministic (mean) execution unless `sampled`.
Scheduler make_policy_scheduler(PolicyParams params, bool sampled);

struct ComparisonRow {
  std::string scheduler;
  int seed = 0;
  RolloutSummary summary;
  std::uint64_t fading_checksum = 0;
  std::uint64_t noise_checksum = 0;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  /// Rows for one scheduler, in seed order.
  std::vector<ComparisonRow> rows_for(const std::string& name) const;
  /// Mean over seeds of each summary metric.
  RolloutSummary aggregate(const std::string& name) const;
};

/// Paired comparison: evaluation seed s uses the same streams for every
/// scheduler. Throws if the recorded fading/noise checksums ever differ.
ComparisonTable compare(std::span<const NamedScheduler> schedulers, std::span<const PlantModel> ensemble,
                        const PhyModel& phy, const LatencyConstraint& lat, const RolloutConfig& config,
                        std::uint64_t seed);

/// "cycle,system,state_norm,received,channel_time_1..n"
void write_trajectory_csv(std::ostream& out, const RolloutResult& result);
/// "scheduler,seed,stable_count,mean_cost,violation_rate"
void write_comparison_csv(std::ostream& out, const ComparisonTable& table);

}  // namespace ctlsched
