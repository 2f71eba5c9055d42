#pragma once

#include "ctlsched/phy.hpp"
#include "ctlsched/plant.hpp"
#include "ctlsched/rng.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace ctlsched {

struct LatencyConstraint {
  double t_max = 5e-4;  // seconds
  double delta = 0.05;  // tolerated violation probability

  void validate() const;
};

/// Per-channel g_j = 1[time_j <= t_max] - (1 - delta); in [delta - 1, delta].
struct ConstraintValue {
  Vector g;
};

struct BaselineParams {
  double target_pdr = 0.95;

  void validate() const;
};

ConstraintValue constraint_values(const Schedule& schedule, const PhyModel& phy,
                                  const LatencyConstraint& lat);

/// Highest MCS rate whose link PDR still meets the target; the lowest rate
/// when none does.
double baseline_rate(double h, const PhyModel& phy, const BaselineParams& params);

/// Greedy fill in the given priority order: each system takes its
/// strongest channel that still has room for one more packet at the
/// baseline rate. At most one channel per system.
Schedule greedy_assign(std::span<const int> order, const ChannelMatrix& channels, const PhyModel& phy,
                       const LatencyConstraint& lat, const BaselineParams& params);

/// Control-agnostic rotation: priority starts at system (cycle mod m).
Schedule round_robin(long cycle_index, std::span<const PlantState> states,
                     const ChannelMatrix& channels, const PhyModel& phy, const LatencyConstraint& lat,
                     const BaselineParams& params);

/// Largest Lyapunov value first; ties go to the lower index.
Schedule priority_ranking(std::span<const PlantState> states, std::span<const Matrix> lyap,
                          const ChannelMatrix& channels, const PhyModel& phy,
                          const LatencyConstraint& lat, const BaselineParams& params);

struct TransmissionOutcome {
  std::vector<bool> success;  // per system
  Vector planned_time;        // per channel, before truncation
  Vector realized_time;       // per channel, completed transmissions only
  int truncated = 0;          // transmissions cut by the deadline
};

/// Runs every channel's transmissions back to back in ascending system order.
/// Once a packet would finish after t_max the channel closes and it and all
/// later packets on that channel fail. Exactly m*n uniforms are drawn per
/// call regardless of the schedule, so paired runs stay aligned.
TransmissionOutcome simulate_transmissions(const Schedule& schedule, const ChannelMatrix& channels,
                                           const PhyModel& phy, const LatencyConstraint& lat, Rng& rng);

nlohmann::json schedule_to_json(const Schedule& schedule);
Schedule schedule_from_json(const nlohmann::json& j);

}  // namespace ctlsched
