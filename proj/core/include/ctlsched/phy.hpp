#pragma once

#include "ctlsched/common.hpp"
#include "ctlsched/rng.hpp"

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace ctlsched {

/// Fading gains, rows = systems, columns = channels (linear power gain).
struct ChannelMatrix {
  Matrix h;

  Eigen::Index systems() const { return h.rows(); }
  Eigen::Index channels() const { return h.cols(); }
};

/// q(h, mu) = exp(-eta0 (2^{mu/mu0} - 1) / h).
struct AnalyticPdr {
  double eta0 = 1.0;
  double mu0 = 13.0;
};

/// Packet-error-rate curves indexed by rate, each a function of linear SNR.
/// Lookup floors the rate onto the tabulated rates and interpolates linearly
/// in SNR, holding the end values outside the tabulated SNR span.
class PerCurveTable {
 public:
  struct Curve {
    double rate;
    std::vector<double> snr;
    std::vector<double> per;
  };

  explicit PerCurveTable(std::vector<Curve> curves);

  /// CSV with header "rate,snr,per", rows sorted by (rate, snr).
  static PerCurveTable load_csv(const std::filesystem::path& path);

  double pdr(double h, double rate) const;
  const std::vector<Curve>& curves() const { return curves_; }

 private:
  std::vector<Curve> curves_;
};

using PdrModel = std::variant<AnalyticPdr, PerCurveTable>;

struct PhyModel {
  int channels = 2;
  int packet_bits = 800;
  double rate_min = 1.6;  // Mb/s
  double rate_max = 13.0;
  std::vector<double> mcs_table = {1.6, 3.3, 4.9, 6.5, 9.8, 13.0};
  PdrModel pdr_model = AnalyticPdr{};
  double fading_mean = 6.0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Binary channel assignment (n x m, entry (j, i) = system i uses channel j)
/// and per-system data rates in Mb/s.
struct Schedule {
  IndexMatrix assign;
  Vector rates;
  /// Pre-clamp rate draws when the schedule was sampled from a policy; empty
  /// otherwise. Only the policy score function reads these.
  Vector raw_rates;

  Eigen::Index channels() const { return assign.rows(); }
  Eigen::Index systems() const { return assign.cols(); }

  static Schedule empty(Eigen::Index channels, Eigen::Index systems, double rate);
};

ChannelMatrix sample_fading(Rng& rng, int m, int n, double fading_mean);

double analytic_pdr(const AnalyticPdr& model, double h, double rate);

/// Per-link packet delivery rate; rate must lie in [rate_min, rate_max].
double pdr(const PhyModel& phy, double h, double rate);

/// Seconds to send `packet_bits` at `rate` Mb/s.
double tx_time(double rate, int packet_bits);

/// 1 - prod_j (1 - assign_j q_j).
double combined_pdr(std::span<const double> link_pdr, std::span<const int> assign_row);

double combined_pdr(const PhyModel& phy, const Vector& h_row, const Eigen::VectorXi& assign_row,
                    double rate);

/// Total air time scheduled on channel j.
double channel_time(const Schedule& schedule, const PhyModel& phy, Eigen::Index j);

/// Largest table entry not above `rate`; rates below the table clamp up.
double mcs_floor(double rate, std::span<const double> table);

}  // namespace ctlsched
