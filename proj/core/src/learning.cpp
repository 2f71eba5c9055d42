#include "ctlsched/learning.hpp"

#include <cmath>
#include <string>

namespace ctlsched {

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train.iterations: must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(primal_step > 0.0)) throw ConfigError("train.primal_step: must be positive");
  if (!(dual_step > 0.0)) throw ConfigError("train.dual_step: must be positive");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw ConfigError("train.baseline_decay: must lie in [0, 1)");
  if (log_every < 1) throw ConfigError("train.log_every: must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every: must be >= 0");
  if (!(state_box.lo < state_box.hi)) throw ConfigError("train.state_box: lo must be below hi");
}

std::pair<ChannelMatrix, std::vector<PlantState>> sample_states(Rng& rng, int m, int n, int p,
                                                                const StateBox& box, double fading_mean) {
  require(box.lo < box.hi, "sample_states: empty state box");
  ChannelMatrix channels = sample_fading(rng, m, n, fading_mean);
  std::vector<PlantState> states(static_cast<std::size_t>(m));
  for (auto& s : states) {
    s.x.resize(p);
    for (int d = 0; d < p; ++d) s.x(d) = rng.uniform(box.lo, box.hi);
  }
  return {std::move(channels), std::move(states)};
}

double schedule_objective(std::span<const PlantModel> ensemble, const PhyModel& phy,
                          const ChannelMatrix& channels, std::span<const PlantState> states,
                          const Schedule& schedule) {
  const auto m = channels.systems();
  require(static_cast<Eigen::Index>(ensemble.size()) == m && static_cast<Eigen::Index>(states.size()) == m,
          "schedule_objective: ensemble/states must have one entry per system");
  require(schedule.systems() == m && schedule.channels() == channels.channels(),
          "schedule_objective: schedule dimension mismatch");
  double f = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double q = combined_pdr(phy, channels.h.row(i).transpose(), schedule.assign.col(i), schedule.rates(i));
    f += expected_cost(ensemble[static_cast<std::size_t>(i)], states[static_cast<std::size_t>(i)], q);
  }
  return f;
}

double lagrangian_estimate(std::span<const double> objectives, std::span<const Vector> constraints,
                           const Vector& lambda) {
  require(!objectives.empty() && objectives.size() == constraints.size(),
          "lagrangian_estimate: batch size mismatch");
  double total = 0.0;
  for (std::size_t b = 0; b < objectives.size(); ++b) {
    require(constraints[b].size() == lambda.size(), "lagrangian_estimate: constraint length mismatch");
    total += objectives[b] - lambda.dot(constraints[b]);
  }
  return total / static_cast<double>(objectives.size());
}

double lagrangian_estimate(std::span<const PlantModel> ensemble, const PhyModel& phy,
                           const LatencyConstraint& lat, const DualVars& dual,
                           std::span<const TrainSample> batch) {
  std::vector<double> f;
  std::vector<Vector> g;
  for (const auto& s : batch) {
    f.push_back(schedule_objective(ensemble, phy, s.channels, s.states, s.schedule));
    g.push_back(constraint_values(s.schedule, phy, lat).g);
  }
  return lagrangian_estimate(f, g, dual.lambda);
}

GradientEstimate reduce_score_function(std::span<const double> objectives,
                                       std::span<const Vector> constraints, std::span<const Vector> scores,
                                       const Vector& lambda, double baseline) {
  const std::size_t batch = objectives.size();
  require(batch >= 1, "reduce_score_function: empty batch");
  require(constraints.size() == batch && scores.size() == batch, "reduce_score_function: batch size mismatch");
  GradientEstimate est{Vector::Zero(scores[0].size()), Vector::Zero(lambda.size()), 0.0};
  for (std::size_t b = 0; b < batch; ++b) {
    require(constraints[b].size() == lambda.size(), "reduce_score_function: constraint length mismatch");
    require(scores[b].size() == est.primal.size(), "reduce_score_function: score length mismatch");
    const double weight = objectives[b] - lambda.dot(constraints[b]);
    est.mean_weight += weight;
    est.primal += (weight - baseline) * scores[b];
    est.dual += constraints[b];
  }
  const double inv = 1.0 / static_cast<double>(batch);
  est.primal *= inv;
  est.dual *= inv;
  est.mean_weight *= inv;
  return est;
}

GradientEstimate estimate_gradients(const PolicyParams& params, const DualVars& dual,
                                    std::span<const PlantModel> ensemble, const PhyModel& phy,
                                    const LatencyConstraint& lat, std::span<const TrainSample> batch,
                                    double baseline) {
  std::vector<double> f;
  std::vector<Vector> g, scores;
  f.reserve(batch.size());
  g.reserve(batch.size());
  scores.reserve(batch.size());
  const bool graph = params.arch.kind == ArchKind::gnn;
  for (const auto& s : batch) {
    f.push_back(schedule_objective(ensemble, phy, s.channels, s.states, s.schedule));
    g.push_back(constraint_values(s.schedule, phy, lat).g);
    scores.push_back(grad_log_prob(params, graph ? &s.gso : nullptr, s.input, s.schedule));
  }
  return reduce_score_function(f, g, scores, dual.lambda, baseline);
}

Vector primal_update(const Vector& theta, const Vector& grad, double alpha) {
  require(theta.size() == grad.size(), "primal_update: shape mismatch");
  return theta - alpha * grad;
}

DualVars dual_update(const DualVars& dual, const Vector& g_estimate, double beta) {
  require(dual.lambda.size() == g_estimate.size(), "dual_update: shape mismatch");
  return DualVars{(dual.lambda - beta * g_estimate).cwiseMax(0.0)};
}

std::vector<TrainSample> sample_batch(const PolicyParams& params, int batch_size,
                                      std::span<const PlantModel> ensemble, const PhyModel& phy,
                                      const StateBox& box, std::uint64_t seed, long iteration) {
  const auto& arch = params.arch;
  require(static_cast<int>(ensemble.size()) == arch.systems, "sample_batch: ensemble size mismatch");
  std::vector<TrainSample> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    Rng rng = Rng::stream(seed, "train", {static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(b)});
    auto [channels, states] = sample_states(rng, arch.systems, arch.channels, arch.state_dim, box, phy.fading_mean);
    TrainSample s{std::move(channels), std::move(states), {}, {}, {}};
    s.input = make_policy_input(s.channels, s.states);
    if (arch.kind == ArchKind::gnn) s.gso = build_gso(s.channels, arch.normalize_gso);
    const PolicyOutput out = policy_forward(params, arch.kind == ArchKind::gnn ? &s.gso : nullptr, s.input);
    s.schedule = sample_action(out, rng);
    batch.push_back(std::move(s));
  }
  return batch;
}

TrainState initial_train_state(const PolicyArch& arch, int channels, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "policy-init");
  TrainState state;
  state.policy = init_params(arch, rng);
  state.dual.lambda = Vector::Zero(channels);
  return state;
}

void train(TrainState& state, std::span<const PlantModel> ensemble, const PhyModel& phy,
           const LatencyConstraint& lat, const TrainConfig& config, std::uint64_t seed,
           const TrainHooks& hooks) {
  config.validate();
  const int n = state.policy.arch.channels;
  require(state.dual.lambda.size() == n, "train: lambda must have one entry per channel");

  IterationLog acc;
  long acc_count = 0;
  auto reset_acc = [&] {
    acc = IterationLog{};
    acc.channel_time = Vector::Zero(n);
    acc.sat_rate = Vector::Zero(n);
    acc_count = 0;
  };
  reset_acc();

  for (long t = state.iteration; t < config.iterations; ++t) {
    const auto batch = sample_batch(state.policy, config.batch_size, ensemble, phy, config.state_box, seed, t);
    for (const auto& s : batch) {
      if (!s.schedule.raw_rates.allFinite()) {
        throw TrainingDiverged(t, "training diverged at iteration " + std::to_string(t) +
                                      ": policy produced non-finite rates");
      }
    }

    std::vector<double> f;
    std::vector<Vector> g, scores;
    Vector time_sum = Vector::Zero(n), sat_sum = Vector::Zero(n);
    const bool graph = state.policy.arch.kind == ArchKind::gnn;
    for (const auto& s : batch) {
      f.push_back(schedule_objective(ensemble, phy, s.channels, s.states, s.schedule));
      g.push_back(constraint_values(s.schedule, phy, lat).g);
      scores.push_back(grad_log_prob(state.policy, graph ? &s.gso : nullptr, s.input, s.schedule));
      for (int j = 0; j < n; ++j) {
        const double tj = channel_time(s.schedule, phy, j);
        time_sum(j) += tj;
        sat_sum(j) += tj <= lat.t_max ? 1.0 : 0.0;
      }
    }
    const double baseline = config.variance_baseline && state.baseline_ready ? state.baseline : 0.0;
    const GradientEstimate est = reduce_score_function(f, g, scores, state.dual.lambda, baseline);

    Vector theta = primal_update(state.policy.theta, est.primal, config.primal_step);
    DualVars dual = dual_update(state.dual, est.dual, config.dual_step);
    if (!theta.allFinite() || !dual.lambda.allFinite()) {
      throw TrainingDiverged(t, "training diverged at iteration " + std::to_string(t) +
                                    ": non-finite parameters after update");
    }

    double objective = 0.0;
    for (double v : f) objective += v;
    objective /= static_cast<double>(f.size());

    state.policy.theta = std::move(theta);
    state.dual = std::move(dual);
    if (config.variance_baseline) {
      state.baseline = state.baseline_ready
                           ? config.baseline_decay * state.baseline + (1.0 - config.baseline_decay) * est.mean_weight
                           : est.mean_weight;
      state.baseline_ready = true;
    }
    state.iteration = t + 1;

    const double inv_b = 1.0 / static_cast<double>(batch.size());
    acc.objective += objective;
    acc.lagrangian += est.mean_weight;
    acc.channel_time += time_sum * inv_b;
    acc.sat_rate += sat_sum * inv_b;
    ++acc_count;

    if (state.iteration % config.log_every == 0 || state.iteration == config.iterations) {
      const double inv = 1.0 / static_cast<double>(acc_count);
      IterationLog row{state.iteration, acc.objective * inv, acc.lagrangian * inv, state.dual.lambda,
                       acc.channel_time * inv, acc.sat_rate * inv};
      state.log.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
      reset_acc();
    }
    if (config.checkpoint_every > 0 && state.iteration % config.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(state);
    }
  }
}

}  // namespace ctlsched
