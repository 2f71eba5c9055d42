#include "ctlsched/plant.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace ctlsched {

namespace {

constexpr double kSymTol = 1e-10;

bool is_symmetric(const Matrix& a) {
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= kSymTol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

}  // namespace

double spectral_radius(const Matrix& a) {
  if (a.size() == 1) return std::abs(a(0, 0));
  Eigen::EigenSolver<Matrix> solver(a, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

PlantModel::PlantModel(Matrix a_closed, Matrix a_open, Matrix noise_cov, Matrix lyap)
    : a_closed_(std::move(a_closed)),
      a_open_(std::move(a_open)),
      noise_cov_(std::move(noise_cov)),
      lyap_(std::move(lyap)) {
  const auto p = a_closed_.rows();
  require(p >= 1 && a_closed_.cols() == p, "PlantModel: a_closed must be square");
  require(a_open_.rows() == p && a_open_.cols() == p, "PlantModel: a_open dimension mismatch");
  require(noise_cov_.rows() == p && noise_cov_.cols() == p, "PlantModel: noise_cov dimension mismatch");
  require(lyap_.rows() == p && lyap_.cols() == p, "PlantModel: lyap dimension mismatch");
  require(a_closed_.allFinite() && a_open_.allFinite() && noise_cov_.allFinite() && lyap_.allFinite(),
          "PlantModel: non-finite entries");

  require(is_symmetric(lyap_), "PlantModel: lyap must be symmetric");
  Eigen::LLT<Matrix> llt(lyap_);
  require(llt.info() == Eigen::Success, "PlantModel: lyap must be positive definite");

  require(is_symmetric(noise_cov_), "PlantModel: noise_cov must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(noise_cov_);
  require(eig.eigenvalues().minCoeff() >= -1e-12, "PlantModel: noise_cov must be positive semidefinite");
  noise_factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  require(spectral_radius(a_closed_) < spectral_radius(a_open_),
          "PlantModel: closed-loop spectral radius must be below open-loop");
}

void EnsembleConfig::validate() const {
  if (m < 1) throw ConfigError("ensemble.m: must be >= 1");
  if (p < 1) throw ConfigError("ensemble.p: must be >= 1");
  if (!(closed_lo <= closed_hi)) throw ConfigError("ensemble.closed_gain_range: lo must not exceed hi");
  if (!(open_lo <= open_hi)) throw ConfigError("ensemble.open_gain_range: lo must not exceed hi");
  if (!(closed_lo >= 0.0)) throw ConfigError("ensemble.closed_gain_range: gains must be nonnegative");
  if (!(closed_hi < open_lo))
    throw ConfigError("ensemble.closed_gain_range: hi must be below open_gain_range lo");
  if (!(noise_var >= 0.0)) throw ConfigError("ensemble.noise_var: must be >= 0");
  if (lyap_choice == LyapChoice::user) {
    if (!lyap) throw ConfigError("ensemble.lyap: required when lyap_choice is user");
    if (lyap->rows() != p || lyap->cols() != p) throw ConfigError("ensemble.lyap: must be p x p");
  }
}

PlantState step_plant(const PlantModel& model, const PlantState& state, bool received,
                      const Vector& noise) {
  require(state.x.size() == model.dim(), "step_plant: state dimension mismatch");
  require(noise.size() == model.dim(), "step_plant: noise dimension mismatch");
  const Matrix& gain = received ? model.a_closed() : model.a_open();
  return PlantState{gain * state.x + noise};
}

double lyapunov(const PlantState& state, const Matrix& lyap) {
  require(lyap.rows() == state.x.size() && lyap.cols() == state.x.size(),
          "lyapunov: dimension mismatch");
  return state.x.dot(lyap * state.x);
}

double expected_cost(const PlantModel& model, const PlantState& state, double pdr) {
  require(state.x.size() == model.dim(), "expected_cost: state dimension mismatch");
  require(pdr >= 0.0 && pdr <= 1.0, "expected_cost: pdr must lie in [0, 1]");
  const Vector closed = model.a_closed() * state.x;
  const Vector open = model.a_open() * state.x;
  const Matrix& P = model.lyap();
  return pdr * closed.dot(P * closed) + (1.0 - pdr) * open.dot(P * open) +
         (P * model.noise_cov()).trace();
}

Vector sample_noise(const PlantModel& model, Rng& rng) {
  Vector z(model.dim());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  return model.noise_factor() * z;
}

std::vector<PlantModel> sample_ensemble(const EnsembleConfig& config, Rng& rng) {
  config.validate();
  std::vector<PlantModel> models;
  models.reserve(static_cast<std::size_t>(config.m));
  const Matrix lyap = config.lyap_choice == LyapChoice::user ? *config.lyap
                                                             : Matrix::Identity(config.p, config.p);
  const Matrix noise = config.noise_var * Matrix::Identity(config.p, config.p);
  for (int i = 0; i < config.m; ++i) {
    Vector closed(config.p), open(config.p);
    for (int d = 0; d < config.p; ++d) closed(d) = rng.uniform(config.closed_lo, config.closed_hi);
    for (int d = 0; d < config.p; ++d) open(d) = rng.uniform(config.open_lo, config.open_hi);
    // uniform01 < 1 keeps draws inside [lo, hi); degenerate ranges return lo exactly
    models.emplace_back(Matrix(closed.asDiagonal()), Matrix(open.asDiagonal()), noise, lyap);
  }
  return models;
}

}  // namespace ctlsched
