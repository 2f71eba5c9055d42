#pragma once

#include "ctlsched/phy.hpp"
#include "ctlsched/plant.hpp"
#include "ctlsched/rng.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace ctlsched {

enum class ArchKind { mlp, gnn };
enum class Activation { identity, relu, sigmoid };

std::string to_string(ArchKind kind);
std::string to_string(Activation act);
ArchKind arch_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

/// Architecture descriptor shared by both parameterizations.
///
/// MLP: widths are [m*n + m*p, hidden..., m*n + m], no biases, hidden
/// activation between layers and identity before the output heads.
///
/// GNN: per-node features [n + p, hidden..., n + 1]; each layer is a
/// polynomial graph filter with `taps` coefficients per feature pair.
///
/// Raw inputs are multiplied by fixed channel/state scales before the first
/// layer.
struct PolicyArch {
  ArchKind kind = ArchKind::gnn;
  int systems = 9;
  int channels = 2;
  int state_dim = 1;
  std::vector<int> hidden = {10, 20, 50, 50, 20};
  int taps = 5;
  Activation activation = Activation::relu;
  bool normalize_gso = true;
  double channel_scale = 1.0;
  double state_scale = 1.0;
  double rate_min = 1.6;
  double rate_max = 13.0;
  double rate_std = 0.5;

  /// Layer widths including input and output (per node for the GNN).
  std::vector<int> widths() const;
  /// Total number of trainable scalars.
  Eigen::Index num_params() const;
  void validate() const;

  bool operator==(const PolicyArch&) const = default;
};

nlohmann::json arch_to_json(const PolicyArch& arch);
PolicyArch arch_from_json(const nlohmann::json& j);

/// w0 = [vec(H); vec(X)]: H (m x n) stacked column by column, then each
/// system's p state entries in system order.
struct PolicyInput {
  Vector w0;
};

PolicyInput make_policy_input(const ChannelMatrix& channels, std::span<const PlantState> states);

/// Graph shift operator S = H H^T, optionally divided by its top eigenvalue.
struct GsoMatrix {
  Matrix s;
};

GsoMatrix build_gso(const ChannelMatrix& channels, bool normalize = true);

/// Flat parameter vector plus the architecture it belongs to. Layout: layers
/// in order; MLP layer l is a column-major (out x in) matrix; GNN layer l is
/// `taps` column-major (F_in x F_out) blocks, tap 0 first.
struct PolicyParams {
  PolicyArch arch;
  Vector theta;
};

/// Glorot-uniform draw on [-a, a], a = sqrt(6 / (fan_in + fan_out)); for GNN
/// layers fan_in counts all taps.
PolicyParams init_params(const PolicyArch& arch, Rng& rng);

/// Distribution parameters over schedules.
struct PolicyOutput {
  Matrix assign_prob;  // n x m, clamped to [kProbClamp, 1 - kProbClamp]
  Vector rate_mean;    // m, inside [rate_min, rate_max]
  double rate_std = 0.5;
  double rate_min = 1.6;
  double rate_max = 13.0;
};

inline constexpr double kProbClamp = 1e-6;

/// Network outputs before the heads: n*m assignment logits (column-major
/// n x m) followed by m rate logits.
Vector policy_logits(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input);

PolicyOutput apply_heads(const PolicyArch& arch, const Vector& logits);

PolicyOutput mlp_forward(const PolicyParams& params, const PolicyInput& input);
PolicyOutput gnn_forward(const PolicyParams& params, const GsoMatrix& gso, const PolicyInput& input);

/// Dispatches on params.arch.kind; `gso` is required for the GNN.
PolicyOutput policy_forward(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input);

/// Bernoulli assignments and Gaussian rates (clamped into range; the raw
/// draw is kept in Schedule::raw_rates).
Schedule sample_action(const PolicyOutput& output, Rng& rng);

/// Deterministic execution: assign iff prob >= 0.5, rate = mean.
Schedule mean_action(const PolicyOutput& output);

double log_prob(const PolicyOutput& output, const Schedule& schedule);

/// d log_prob / d logits.
Vector log_prob_logit_grad(const PolicyArch& arch, const Vector& logits, const Schedule& schedule);

/// Exact reverse-mode gradient of log_prob with respect to theta.
Vector grad_log_prob(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input,
                     const Schedule& schedule);

/// Vector-Jacobian product of policy_logits with respect to theta.
Vector backprop_logits(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input,
                       const Vector& dlogits);

}  // namespace ctlsched
