#pragma once

#include "ctlsched/learning.hpp"
#include "ctlsched/plant.hpp"
#include "ctlsched/policy.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace ctlsched {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary layout:
///   8 bytes   magic "CTLSCKPT"
///   u32 LE    format version
///   u64 LE    header length H
///   H bytes   JSON header (arch, seed, iteration, counts, config, ensemble)
///   f64 LE    num_params policy parameters in declared layer order,
///             followed by num_lambda dual multipliers
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  nlohmann::json config;  // RunConfig snapshot
  std::uint64_t seed = 0;
  long iteration = 0;
  PolicyParams policy;
  DualVars dual;
  double baseline = 0.0;
  bool baseline_ready = false;
  std::vector<PlantModel> ensemble;
};

Checkpoint make_checkpoint(const TrainState& state, const std::vector<PlantModel>& ensemble,
                           const nlohmann::json& config, std::uint64_t seed);

/// Restores the resumable part of a TrainState (logs are not stored).
TrainState train_state_from(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws CheckpointError on bad magic, version mismatch, or a file whose
/// length disagrees with its header.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json plant_to_json(const PlantModel& model);
PlantModel plant_from_json(const nlohmann::json& j);

}  // namespace ctlsched
