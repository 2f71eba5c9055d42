#include "ctlsched/phy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ctlsched {

PerCurveTable::PerCurveTable(std::vector<Curve> curves) : curves_(std::move(curves)) {
  require(!curves_.empty(), "PerCurveTable: no curves");
  for (std::size_t c = 0; c < curves_.size(); ++c) {
    const auto& curve = curves_[c];
    require(curve.rate > 0.0, "PerCurveTable: rates must be positive");
    require(c == 0 || curve.rate > curves_[c - 1].rate, "PerCurveTable: rates must be strictly increasing");
    require(!curve.snr.empty() && curve.snr.size() == curve.per.size(), "PerCurveTable: empty curve");
    for (std::size_t k = 0; k < curve.snr.size(); ++k) {
      require(curve.per[k] >= 0.0 && curve.per[k] <= 1.0, "PerCurveTable: per must lie in [0, 1]");
      require(k == 0 || curve.snr[k] > curve.snr[k - 1], "PerCurveTable: snr must be strictly increasing");
    }
  }
}

PerCurveTable PerCurveTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("phy.per_curve_file: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("phy.per_curve_file: empty file " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "rate,snr,per") throw ConfigError("phy.per_curve_file: header must be rate,snr,per");

  std::vector<Curve> curves;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    double values[3];
    for (int k = 0; k < 3; ++k) {
      std::string cell;
      if (!std::getline(row, cell, ',')) {
        throw ConfigError("phy.per_curve_file: line " + std::to_string(line_no) + " has fewer than 3 fields");
      }
      try {
        values[k] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("phy.per_curve_file: line " + std::to_string(line_no) + " is not numeric");
      }
    }
    if (curves.empty() || curves.back().rate != values[0]) {
      if (!curves.empty() && values[0] < curves.back().rate) {
        throw ConfigError("phy.per_curve_file: rows not sorted by rate at line " + std::to_string(line_no));
      }
      curves.push_back(Curve{values[0], {}, {}});
    }
    curves.back().snr.push_back(values[1]);
    curves.back().per.push_back(values[2]);
  }
  try {
    return PerCurveTable(std::move(curves));
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("phy.per_curve_file: ") + e.what());
  }
}

double PerCurveTable::pdr(double h, double rate) const {
  auto it = std::upper_bound(curves_.begin(), curves_.end(), rate,
                             [](double r, const Curve& c) { return r < c.rate; });
  const Curve& curve = it == curves_.begin() ? curves_.front() : *std::prev(it);
  const auto& snr = curve.snr;
  const auto& per = curve.per;
  double e;
  if (h <= snr.front()) {
    e = per.front();
  } else if (h >= snr.back()) {
    e = per.back();
  } else {
    const auto hi = static_cast<std::size_t>(std::upper_bound(snr.begin(), snr.end(), h) - snr.begin());
    const auto lo = hi - 1;
    const double t = (h - snr[lo]) / (snr[hi] - snr[lo]);
    e = per[lo] + t * (per[hi] - per[lo]);
  }
  return 1.0 - e;
}

void PhyModel::validate() const {
  if (channels < 1) throw ConfigError("phy.channels: must be >= 1");
  if (packet_bits <= 0) throw ConfigError("phy.packet_bits: must be positive");
  if (!(rate_min > 0.0)) throw ConfigError("phy.rate_min: must be positive");
  if (!(rate_max >= rate_min)) throw ConfigError("phy.rate_max: must be >= rate_min");
  if (mcs_table.empty()) throw ConfigError("phy.mcs_table: must be nonempty");
  for (std::size_t k = 0; k < mcs_table.size(); ++k) {
    if (k > 0 && !(mcs_table[k] > mcs_table[k - 1]))
      throw ConfigError("phy.mcs_table: must be strictly increasing");
    if (mcs_table[k] < rate_min || mcs_table[k] > rate_max)
      throw ConfigError("phy.mcs_table: entries must lie in [rate_min, rate_max]");
  }
  if (mcs_table.front() != rate_min) throw ConfigError("phy.mcs_table: smallest entry must equal rate_min");
  if (const auto* a = std::get_if<AnalyticPdr>(&pdr_model)) {
    if (!(a->eta0 > 0.0)) throw ConfigError("phy.eta0: must be positive");
    if (!(a->mu0 > 0.0)) throw ConfigError("phy.mu0: must be positive");
  }
  if (!(fading_mean > 0.0)) throw ConfigError("phy.fading_mean: must be positive");
}

Schedule Schedule::empty(Eigen::Index channels, Eigen::Index systems, double rate) {
  return Schedule{IndexMatrix::Zero(channels, systems), Vector::Constant(systems, rate), Vector()};
}

ChannelMatrix sample_fading(Rng& rng, int m, int n, double fading_mean) {
  require(m >= 1 && n >= 1, "sample_fading: m and n must be >= 1");
  require(fading_mean > 0.0, "sample_fading: fading_mean must be positive");
  ChannelMatrix c{Matrix(m, n)};
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) c.h(i, j) = rng.exponential(fading_mean);
  return c;
}

double analytic_pdr(const AnalyticPdr& model, double h, double rate) {
  if (h <= 0.0) return 0.0;
  const double eta = model.eta0 * (std::exp2(rate / model.mu0) - 1.0);
  return std::exp(-eta / h);
}

double pdr(const PhyModel& phy, double h, double rate) {
  require(h >= 0.0, "pdr: fading gain must be nonnegative");
  require(rate >= phy.rate_min && rate <= phy.rate_max, "pdr: rate outside [rate_min, rate_max]");
  return std::visit(
      [&](const auto& model) -> double {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, AnalyticPdr>) {
          return analytic_pdr(model, h, rate);
        } else {
          return model.pdr(h, rate);
        }
      },
      phy.pdr_model);
}

double tx_time(double rate, int packet_bits) {
  require(rate > 0.0, "tx_time: rate must be positive");
  require(packet_bits > 0, "tx_time: packet_bits must be positive");
  return static_cast<double>(packet_bits) / (rate * 1e6);
}

double combined_pdr(std::span<const double> link_pdr, std::span<const int> assign_row) {
  require(link_pdr.size() == assign_row.size(), "combined_pdr: length mismatch");
  double miss = 1.0;
  for (std::size_t j = 0; j < link_pdr.size(); ++j) {
    if (assign_row[j] != 0) miss *= 1.0 - link_pdr[j];
  }
  return 1.0 - miss;
}

double combined_pdr(const PhyModel& phy, const Vector& h_row, const Eigen::VectorXi& assign_row,
                    double rate) {
  require(h_row.size() == assign_row.size(), "combined_pdr: length mismatch");
  double miss = 1.0;
  for (Eigen::Index j = 0; j < h_row.size(); ++j) {
    if (assign_row(j) != 0) miss *= 1.0 - pdr(phy, h_row(j), rate);
  }
  return 1.0 - miss;
}

double channel_time(const Schedule& schedule, const PhyModel& phy, Eigen::Index j) {
  require(j >= 0 && j < schedule.channels(), "channel_time: channel index out of range");
  require(schedule.rates.size() == schedule.systems(), "channel_time: rates/assign mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < schedule.systems(); ++i) {
    if (schedule.assign(j, i) != 0) total += tx_time(schedule.rates(i), phy.packet_bits);
  }
  return total;
}

double mcs_floor(double rate, std::span<const double> table) {
  require(!table.empty(), "mcs_floor: empty table");
  auto it = std::upper_bound(table.begin(), table.end(), rate);
  return it == table.begin() ? table.front() : *std::prev(it);
}

}  // namespace ctlsched
