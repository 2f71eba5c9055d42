#include "ctlsched/schedule.hpp"

#include <algorithm>
#include <numeric>

namespace ctlsched {

void LatencyConstraint::validate() const {
  if (!(t_max > 0.0)) throw ConfigError("latency.t_max: must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("latency.delta: must lie in (0, 1)");
}

void BaselineParams::validate() const {
  if (!(target_pdr > 0.0 && target_pdr < 1.0)) throw ConfigError("baseline.target_pdr: must lie in (0, 1)");
}

ConstraintValue constraint_values(const Schedule& schedule, const PhyModel& phy,
                                  const LatencyConstraint& lat) {
  ConstraintValue out{Vector(schedule.channels())};
  for (Eigen::Index j = 0; j < schedule.channels(); ++j) {
    const double met = channel_time(schedule, phy, j) <= lat.t_max ? 1.0 : 0.0;
    out.g(j) = met - (1.0 - lat.delta);
  }
  return out;
}

double baseline_rate(double h, const PhyModel& phy, const BaselineParams& params) {
  require(h >= 0.0, "baseline_rate: fading gain must be nonnegative");
  for (auto it = phy.mcs_table.rbegin(); it != phy.mcs_table.rend(); ++it) {
    if (pdr(phy, h, *it) >= params.target_pdr) return *it;
  }
  return phy.mcs_table.front();
}

Schedule greedy_assign(std::span<const int> order, const ChannelMatrix& channels, const PhyModel& phy,
                       const LatencyConstraint& lat, const BaselineParams& params) {
  const auto m = channels.systems();
  const auto n = channels.channels();
  Schedule s = Schedule::empty(n, m, phy.mcs_table.front());
  Vector used = Vector::Zero(n);

  std::vector<int> by_gain(static_cast<std::size_t>(n));
  for (int i : order) {
    require(i >= 0 && i < m, "greedy_assign: system index out of range");
    std::iota(by_gain.begin(), by_gain.end(), 0);
    std::stable_sort(by_gain.begin(), by_gain.end(),
                     [&](int a, int b) { return channels.h(i, a) > channels.h(i, b); });
    for (int j : by_gain) {
      const double rate = baseline_rate(channels.h(i, j), phy, params);
      const double t = tx_time(rate, phy.packet_bits);
      if (used(j) + t <= lat.t_max) {
        s.assign(j, i) = 1;
        s.rates(i) = rate;
        used(j) += t;
        break;
      }
    }
  }
  return s;
}

Schedule round_robin(long cycle_index, std::span<const PlantState> /*states*/,
                     const ChannelMatrix& channels, const PhyModel& phy, const LatencyConstraint& lat,
                     const BaselineParams& params) {
  const auto m = static_cast<long>(channels.systems());
  require(m >= 1, "round_robin: need at least one system");
  const long start = ((cycle_index % m) + m) % m;
  std::vector<int> order(static_cast<std::size_t>(m));
  for (long k = 0; k < m; ++k) order[static_cast<std::size_t>(k)] = static_cast<int>((start + k) % m);
  return greedy_assign(order, channels, phy, lat, params);
}

Schedule priority_ranking(std::span<const PlantState> states, std::span<const Matrix> lyap,
                          const ChannelMatrix& channels, const PhyModel& phy,
                          const LatencyConstraint& lat, const BaselineParams& params) {
  const auto m = channels.systems();
  require(m >= 1, "priority_ranking: need at least one system");
  require(static_cast<Eigen::Index>(states.size()) == m && static_cast<Eigen::Index>(lyap.size()) == m,
          "priority_ranking: states/lyap must have one entry per system");
  std::vector<double> cost(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) cost[i] = lyapunov(states[i], lyap[i]);
  std::vector<int> order(states.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return cost[a] > cost[b]; });
  return greedy_assign(order, channels, phy, lat, params);
}

TransmissionOutcome simulate_transmissions(const Schedule& schedule, const ChannelMatrix& channels,
                                           const PhyModel& phy, const LatencyConstraint& lat, Rng& rng) {
  const auto m = channels.systems();
  const auto n = channels.channels();
  require(schedule.systems() == m && schedule.channels() == n,
          "simulate_transmissions: schedule/channel dimension mismatch");
  TransmissionOutcome out;
  out.success.assign(static_cast<std::size_t>(m), false);
  out.planned_time = Vector::Zero(n);
  out.realized_time = Vector::Zero(n);

  Matrix draws(n, m);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) draws(j, i) = rng.uniform01();

  for (Eigen::Index j = 0; j < n; ++j) {
    bool closed = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (schedule.assign(j, i) == 0) continue;
      const double t = tx_time(schedule.rates(i), phy.packet_bits);
      out.planned_time(j) += t;
      if (closed || out.realized_time(j) + t > lat.t_max) {
        closed = true;
        ++out.truncated;
        continue;
      }
      out.realized_time(j) += t;
      if (draws(j, i) < pdr(phy, channels.h(i, j), schedule.rates(i))) {
        out.success[static_cast<std::size_t>(i)] = true;
      }
    }
  }
  return out;
}

nlohmann::json schedule_to_json(const Schedule& schedule) {
  nlohmann::json assign = nlohmann::json::array();
  for (Eigen::Index j = 0; j < schedule.channels(); ++j)
    for (Eigen::Index i = 0; i < schedule.systems(); ++i) assign.push_back(schedule.assign(j, i));
  std::vector<double> rates(schedule.rates.data(), schedule.rates.data() + schedule.rates.size());
  return nlohmann::json{
      {"assign", {{"rows", schedule.channels()}, {"cols", schedule.systems()}, {"data", assign}}},
      {"rates", rates}};
}

Schedule schedule_from_json(const nlohmann::json& j) {
  const auto rows = j.at("assign").at("rows").get<Eigen::Index>();
  const auto cols = j.at("assign").at("cols").get<Eigen::Index>();
  const auto& data = j.at("assign").at("data");
  require(static_cast<Eigen::Index>(data.size()) == rows * cols, "schedule_from_json: assign size mismatch");
  Schedule s{IndexMatrix(rows, cols), Vector(cols), Vector()};
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const int v = data.at(static_cast<std::size_t>(r * cols + c)).get<int>();
      require(v == 0 || v == 1, "schedule_from_json: assign entries must be 0/1");
      s.assign(r, c) = v;
    }
  const auto rates = j.at("rates").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(rates.size()) == cols, "schedule_from_json: rates size mismatch");
  for (Eigen::Index c = 0; c < cols; ++c) s.rates(c) = rates[static_cast<std::size_t>(c)];
  return s;
}

}  // namespace ctlsched
