#pragma once

#include "ctlsched/common.hpp"
#include "ctlsched/rng.hpp"

#include <optional>
#include <vector>

namespace ctlsched {

/// One wireless control loop modelled as a switched linear system:
/// x+ = a_closed x + w when the uplink packet arrives, a_open x + w otherwise.
class PlantModel {
 public:
  /// Validates the invariants (P symmetric positive definite, W symmetric PSD,
  /// spectral radius of the closed loop strictly below the open loop).
  PlantModel(Matrix a_closed, Matrix a_open, Matrix noise_cov, Matrix lyap);

  const Matrix& a_closed() const { return a_closed_; }
  const Matrix& a_open() const { return a_open_; }
  const Matrix& noise_cov() const { return noise_cov_; }
  const Matrix& lyap() const { return lyap_; }
  /// Any F with F F^T = W; used to draw Gaussian disturbances.
  const Matrix& noise_factor() const { return noise_factor_; }
  Eigen::Index dim() const { return a_closed_.rows(); }

 private:
  Matrix a_closed_;
  Matrix a_open_;
  Matrix noise_cov_;
  Matrix lyap_;
  Matrix noise_factor_;
};

struct PlantState {
  Vector x;
};

enum class LyapChoice { identity, user };

struct EnsembleConfig {
  int m = 9;
  int p = 1;
  double closed_lo = 0.85;
  double closed_hi = 0.95;
  double open_lo = 1.01;
  double open_hi = 1.2;
  double noise_var = 1.0;
  LyapChoice lyap_choice = LyapChoice::identity;
  std::optional<Matrix> lyap;  // used when lyap_choice == user

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

double spectral_radius(const Matrix& a);

PlantState step_plant(const PlantModel& model, const PlantState& state, bool received,
                      const Vector& noise);

/// x^T P x.
double lyapunov(const PlantState& state, const Matrix& lyap);

/// One-step expected Lyapunov cost when the packet gets through with
/// probability `pdr`; affine in pdr.
double expected_cost(const PlantModel& model, const PlantState& state, double pdr);

/// Draws W^{1/2} z with z standard normal.
Vector sample_noise(const PlantModel& model, Rng& rng);

std::vector<PlantModel> sample_ensemble(const EnsembleConfig& config, Rng& rng);

}  // namespace ctlsched
