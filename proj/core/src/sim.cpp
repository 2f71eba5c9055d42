#include "ctlsched/sim.hpp"

#include "ctlsched/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ctlsched {

namespace {

void absorb(std::uint64_t& h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  h = mix64(h ^ bits);
}

long window_length(const RolloutConfig& config, long horizon) {
  const long w = static_cast<long>(std::llround(config.eval_window * static_cast<double>(horizon)));
  return std::clamp(w, 1L, std::max(1L, horizon));
}

}  // namespace

void RolloutConfig::validate() const {
  if (horizon < 1) throw ConfigError("rollout.horizon: must be >= 1");
  if (!(init_lo <= init_hi)) throw ConfigError("rollout.initial_state_box: lo must not exceed hi");
  if (!(stability_threshold > 0.0)) throw ConfigError("rollout.stability_threshold: must be positive");
  if (!(eval_window > 0.0 && eval_window <= 1.0)) throw ConfigError("rollout.eval_window: must lie in (0, 1]");
  if (num_seeds < 1) throw ConfigError("rollout.num_seeds: must be >= 1");
  if (!(divergence_limit > 0.0)) throw ConfigError("rollout.divergence_limit: must be positive");
}

RolloutResult rollout(const Scheduler& scheduler, std::span<const PlantModel> ensemble, const PhyModel& phy,
                      const LatencyConstraint& lat, const RolloutConfig& config, std::uint64_t seed) {
  config.validate();
  require(!ensemble.empty(), "rollout: empty ensemble");
  const int m = static_cast<int>(ensemble.size());
  const int p = static_cast<int>(ensemble[0].dim());
  const int n = phy.channels;

  Rng fading_rng = Rng::stream(seed, "rollout-fading");
  Rng noise_rng = Rng::stream(seed, "rollout-noise");
  Rng tx_rng = Rng::stream(seed, "rollout-tx");
  Rng init_rng = Rng::stream(seed, "rollout-init");
  Rng policy_rng = Rng::stream(seed, "rollout-policy");

  RolloutResult r;
  r.systems = m;
  r.state_dim = p;
  r.horizon = config.horizon;
  r.initial.resize(m, p);
  r.states.resize(static_cast<Eigen::Index>(m) * p, config.horizon);
  r.schedules.reserve(static_cast<std::size_t>(config.horizon));
  r.received = IndexMatrix::Zero(config.horizon, m);
  r.planned_time.resize(config.horizon, n);
  r.realized_time.resize(config.horizon, n);
  r.diverged.assign(static_cast<std::size_t>(m), false);

  std::vector<PlantState> states(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    require(ensemble[static_cast<std::size_t>(i)].dim() == p, "rollout: plants must share a state dimension");
    states[static_cast<std::size_t>(i)].x.resize(p);
    for (int d = 0; d < p; ++d) {
      const double v = init_rng.uniform(config.init_lo, config.init_hi);
      states[static_cast<std::size_t>(i)].x(d) = v;
      r.initial(i, d) = v;
    }
  }

  long violations = 0;
  for (long k = 0; k < config.horizon; ++k) {
    const ChannelMatrix channels = sample_fading(fading_rng, m, n, phy.fading_mean);
    for (Eigen::Index c = 0; c < channels.h.size(); ++c) absorb(r.fading_checksum, channels.h.data()[c]);

    Schedule s = scheduler(k, states, channels, policy_rng);
    require(s.channels() == n && s.systems() == m && s.rates.size() == m,
            "rollout: scheduler returned a schedule of the wrong shape");
    if (config.quantize_rates) {
      for (int i = 0; i < m; ++i) s.rates(i) = mcs_floor(s.rates(i), phy.mcs_table);
    }

    const TransmissionOutcome outcome = simulate_transmissions(s, channels, phy, lat, tx_rng);
    r.planned_time.row(k) = outcome.planned_time.transpose();
    r.realized_time.row(k) = outcome.realized_time.transpose();
    for (int j = 0; j < n; ++j)
      if (outcome.planned_time(j) > lat.t_max) ++violations;

    for (int i = 0; i < m; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const Vector w = sample_noise(ensemble[idx], noise_rng);
      for (Eigen::Index d = 0; d < w.size(); ++d) absorb(r.noise_checksum, w(d));
      r.received(k, i) = outcome.success[idx] ? 1 : 0;
      if (!r.diverged[idx]) {
        PlantState next = step_plant(ensemble[idx], states[idx], outcome.success[idx], w);
        if (!next.x.allFinite() || next.x.cwiseAbs().maxCoeff() > config.divergence_limit) {
          r.diverged[idx] = true;
          for (Eigen::Index d = 0; d < next.x.size(); ++d) {
            const double v = next.x(d);
            next.x(d) = std::isnan(v) ? config.divergence_limit
                                      : std::clamp(v, -config.divergence_limit, config.divergence_limit);
          }
        }
        states[idx] = std::move(next);
      }
      r.states.col(k).segment(static_cast<Eigen::Index>(i) * p, p) = states[idx].x;
    }
    r.schedules.push_back(std::move(s));
  }

  const long window = window_length(config, config.horizon);
  const long start = config.horizon - window;
  r.lyap_window_cost.assign(static_cast<std::size_t>(m), 0.0);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    double sum = 0.0;
    for (long k = start; k < config.horizon; ++k)
      sum += lyapunov(PlantState{r.state(k, i)}, ensemble[static_cast<std::size_t>(i)].lyap());
    r.lyap_window_cost[static_cast<std::size_t>(i)] = sum / static_cast<double>(window);
    total += sum;
  }
  r.summary.mean_cost = total / static_cast<double>(window * m);
  r.summary.violation_rate = static_cast<double>(violations) / static_cast<double>(config.horizon * n);
  r.summary.stable_count = stability_count(r, config);
  return r;
}

int stability_count(const RolloutResult& result, const RolloutConfig& config) {
  const long window = window_length(config, result.horizon);
  const long start = result.horizon - window;
  int stable = 0;
  for (int i = 0; i < result.systems; ++i) {
    if (result.diverged[static_cast<std::size_t>(i)]) continue;
    double peak = 0.0;
    for (long k = start; k < result.horizon; ++k) peak = std::max(peak, result.state(k, i).cwiseAbs().maxCoeff());
    if (peak < config.stability_threshold) ++stable;
  }
  return stable;
}

Scheduler make_round_robin(const PhyModel& phy, const LatencyConstraint& lat, const BaselineParams& params) {
  return [phy, lat, params](long cycle, std::span<const PlantState> states, const ChannelMatrix& channels, Rng&) {
    return round_robin(cycle, states, channels, phy, lat, params);
  };
}

Scheduler make_priority_ranking(std::span<const PlantModel> ensemble, const PhyModel& phy,
                                const LatencyConstraint& lat, const BaselineParams& params) {
  std::vector<Matrix> lyap;
  for (const auto& model : ensemble) lyap.push_back(model.lyap());
  return [lyap, phy, lat, params](long, std::span<const PlantState> states, const ChannelMatrix& channels, Rng&) {
    return priority_ranking(states, lyap, channels, phy, lat, params);
  };
}

Scheduler make_policy_scheduler(PolicyParams params, bool sampled) {
  return [params = std::move(params), sampled](long, std::span<const PlantState> states,
                                               const ChannelMatrix& channels, Rng& rng) {
    const PolicyInput input = make_policy_input(channels, states);
    PolicyOutput out;
    if (params.arch.kind == ArchKind::gnn) {
      const GsoMatrix gso = build_gso(channels, params.arch.normalize_gso);
      out = policy_forward(params, &gso, input);
    } else {
      out = policy_forward(params, nullptr, input);
    }
    return sampled ? sample_action(out, rng) : mean_action(out);
  };
}

std::vector<ComparisonRow> ComparisonTable::rows_for(const std::string& name) const {
  std::vector<ComparisonRow> out;
  for (const auto& row : rows)
    if (row.scheduler == name) out.push_back(row);
  return out;
}

RolloutSummary ComparisonTable::aggregate(const std::string& name) const {
  const auto mine = rows_for(name);
  RolloutSummary s;
  if (mine.empty()) return s;
  double stable = 0.0;
  for (const auto& row : mine) {
    stable += row.summary.stable_count;
    s.mean_cost += row.summary.mean_cost;
    s.violation_rate += row.summary.violation_rate;
  }
  const double inv = 1.0 / static_cast<double>(mine.size());
  s.stable_count = static_cast<int>(std::lround(stable * inv));
  s.mean_cost *= inv;
  s.violation_rate *= inv;
  return s;
}

ComparisonTable compare(std::span<const NamedScheduler> schedulers, std::span<const PlantModel> ensemble,
                        const PhyModel& phy, const LatencyConstraint& lat, const RolloutConfig& config,
                        std::uint64_t seed) {
  require(!schedulers.empty(), "compare: no schedulers");
  ComparisonTable table;
  for (int s = 0; s < config.num_seeds; ++s) {
    const std::uint64_t eval_seed = Rng::stream(seed, "eval", {static_cast<std::uint64_t>(s)}).engine()();
    std::uint64_t fading = 0, noise = 0;
    for (std::size_t k = 0; k < schedulers.size(); ++k) {
      const RolloutResult r = rollout(schedulers[k].schedule, ensemble, phy, lat, config, eval_seed);
      if (k == 0) {
        fading = r.fading_checksum;
        noise = r.noise_checksum;
      } else if (r.fading_checksum != fading || r.noise_checksum != noise) {
        throw std::logic_error("compare: schedulers saw different fading/noise sequences");
      }
      table.rows.push_back(ComparisonRow{schedulers[k].name, s, r.summary, r.fading_checksum, r.noise_checksum});
    }
  }
  return table;
}

void write_trajectory_csv(std::ostream& out, const RolloutResult& result) {
  const auto n = result.realized_time.cols();
  out << "cycle,system,state_norm,received";
  for (Eigen::Index j = 0; j < n; ++j) out << ",channel_time_" << (j + 1);
  out << '\n';
  for (long k = 0; k < result.horizon; ++k) {
    for (int i = 0; i < result.systems; ++i) {
      out << k << ',' << i << ',' << format_double(result.state(k, i).norm()) << ',' << result.received(k, i);
      for (Eigen::Index j = 0; j < n; ++j) out << ',' << format_double(result.realized_time(k, j));
      out << '\n';
    }
  }
}

void write_comparison_csv(std::ostream& out, const ComparisonTable& table) {
  out << "scheduler,seed,stable_count,mean_cost,violation_rate\n";
  for (const auto& row : table.rows) {
    out << row.scheduler << ',' << row.seed << ',' << row.summary.stable_count << ','
        << format_double(row.summary.mean_cost) << ',' << format_double(row.summary.violation_rate) << '\n';
  }
}

}  // namespace ctlsched
