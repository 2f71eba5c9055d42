#pragma once

#include "ctlsched/learning.hpp"
#include "ctlsched/phy.hpp"
#include "ctlsched/plant.hpp"
#include "ctlsched/policy.hpp"
#include "ctlsched/schedule.hpp"
#include "ctlsched/sim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ctlsched {

struct PolicySettings {
  ArchKind kind = ArchKind::gnn;
  std::vector<int> hidden = {10, 20, 50, 50, 20};
  int taps = 5;
  Activation activation = Activation::relu;
  bool normalize_gso = true;
  double rate_std = 0.5;
  std::optional<double> channel_scale;  // default 1 / fading_mean
  std::optional<double> state_scale;    // default 1 / max |state box bound|
};

/// Everything a run needs. Defaults reproduce the reference setup: nine
/// scalar plants, two channels, 0.5 ms budget, 100-byte packets.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  EnsembleConfig ensemble;
  PhyModel phy;
  std::string per_curve_file;  // empty selects the analytic PDR model
  LatencyConstraint latency;
  BaselineParams baseline;
  PolicySettings policy;
  TrainConfig train;
  RolloutConfig rollout;

  void validate() const;
};

/// Strict JSON reader: unknown keys, wrong types and invariant violations
/// raise ConfigError naming the key. Relative PER-curve paths resolve
/// against `base_dir`.
RunConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig parse_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const RunConfig& config);

PolicyArch policy_arch(const RunConfig& config);

}  // namespace ctlsched
