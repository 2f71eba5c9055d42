#pragma once

#include "ctlsched/phy.hpp"
#include "ctlsched/plant.hpp"
#include "ctlsched/policy.hpp"
#include "ctlsched/rng.hpp"
#include "ctlsched/schedule.hpp"

#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ctlsched {

struct DualVars {
  Vector lambda;  // one nonnegative multiplier per channel
};

struct StateBox {
  double lo = -10.0;
  double hi = 10.0;
};

struct TrainConfig {
  long iterations = 50000;
  int batch_size = 32;
  double primal_step = 1e-5;
  double dual_step = 1.0;
  bool variance_baseline = true;
  /// Weight on the previous value in the running mean used as control variate.
  double baseline_decay = 0.99;
  long log_every = 1;
  long checkpoint_every = 0;  // 0 disables intermediate checkpoints
  StateBox state_box;

  void validate() const;
};

/// One row of the training log.
struct IterationLog {
  long iter = 0;
  double objective = 0.0;   // batch mean of f
  double lagrangian = 0.0;  // batch mean of f - lambda^T g
  Vector lambda;            // after the dual update
  Vector channel_time;      // batch mean per channel
  Vector sat_rate;          // fraction of the batch meeting t_max per channel
};

struct TrainState {
  PolicyParams policy;
  DualVars dual;
  long iteration = 0;
  double baseline = 0.0;
  bool baseline_ready = false;
  std::vector<IterationLog> log;
};

/// One sampled state together with the policy's sampled action.
struct TrainSample {
  ChannelMatrix channels;
  std::vector<PlantState> states;
  PolicyInput input;
  GsoMatrix gso;
  Schedule schedule;
};

/// Fresh i.i.d. draw: exponential fading and uniform states in the box.
std::pair<ChannelMatrix, std::vector<PlantState>> sample_states(Rng& rng, int m, int n, int p,
                                                                const StateBox& box, double fading_mean);

/// f = sum_i J_i with J_i evaluated at the combined PDR of the schedule.
double schedule_objective(std::span<const PlantModel> ensemble, const PhyModel& phy,
                          const ChannelMatrix& channels, std::span<const PlantState> states,
                          const Schedule& schedule);

/// Batch mean of f - lambda^T g.
double lagrangian_estimate(std::span<const double> objectives, std::span<const Vector> constraints,
                           const Vector& lambda);

double lagrangian_estimate(std::span<const PlantModel> ensemble, const PhyModel& phy,
                           const LatencyConstraint& lat, const DualVars& dual,
                           std::span<const TrainSample> batch);

struct GradientEstimate {
  Vector primal;  // over theta
  Vector dual;    // batch mean of g
  double mean_weight = 0.0;  // batch mean of f - lambda^T g (before the baseline)
};

/// Score-function reduction: primal = mean_b (f_b - lambda^T g_b - baseline)
/// * score_b, dual = mean_b g_b. Summation follows batch order.
GradientEstimate reduce_score_function(std::span<const double> objectives,
                                       std::span<const Vector> constraints, std::span<const Vector> scores,
                                       const Vector& lambda, double baseline);

/// Full estimator on a sampled batch; `baseline` is the control variate value
/// (pass 0 to disable).
GradientEstimate estimate_gradients(const PolicyParams& params, const DualVars& dual,
                                    std::span<const PlantModel> ensemble, const PhyModel& phy,
                                    const LatencyConstraint& lat, std::span<const TrainSample> batch,
                                    double baseline);

Vector primal_update(const Vector& theta, const Vector& grad, double alpha);

/// lambda' = max(0, lambda - beta g).
DualVars dual_update(const DualVars& dual, const Vector& g_estimate, double beta);

/// Draws a batch under the current policy. Sample b of iteration t uses its
/// own stream so results do not depend on evaluation order.
std::vector<TrainSample> sample_batch(const PolicyParams& params, int batch_size,
                                      std::span<const PlantModel> ensemble, const PhyModel& phy,
                                      const StateBox& box, std::uint64_t seed, long iteration);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(long iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

struct TrainHooks {
  std::function<void(const IterationLog&)> on_log;
  std::function<void(const TrainState&)> on_checkpoint;
};

TrainState initial_train_state(const PolicyArch& arch, int channels, std::uint64_t seed);

/// Runs config.iterations primal-dual steps starting from `state`. Throws
/// TrainingDiverged (leaving `state` at the last finite iterate) when an
/// update would produce non-finite parameters or multipliers.
void train(TrainState& state, std::span<const PlantModel> ensemble, const PhyModel& phy,
           const LatencyConstraint& lat, const TrainConfig& config, std::uint64_t seed,
           const TrainHooks& hooks = {});

}  // namespace ctlsched
