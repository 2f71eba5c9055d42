#include "ctlsched/schedule.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace ctlsched;

namespace {

ChannelMatrix constant_channels(int m, int n, double h) { return {Matrix::Constant(m, n, h)}; }

std::vector<PlantState> zero_states(int m) { return std::vector<PlantState>(m, PlantState{Vector::Zero(1)}); }

// Smallest gain at which `rate` reaches the target under the analytic model.
double gain_for(double rate, double target) { return (std::exp2(rate / 13.0) - 1.0) / -std::log(target); }

}  // namespace

TEST_CASE("constraint values") {
  PhyModel phy;
  phy.channels = 1;
  LatencyConstraint lat;
  Schedule s = Schedule::empty(1, 2, 4.0);  // 2e-4 s each
  s.assign << 1, 1;
  CHECK(constraint_values(s, phy, lat).g(0) == doctest::Approx(0.05));
  s.rates << 4.0, 2.0;  // 2e-4 + 4e-4
  CHECK(constraint_values(s, phy, lat).g(0) == doctest::Approx(-0.95));
  CHECK(constraint_values(Schedule::empty(1, 2, 4.0), phy, lat).g(0) == doctest::Approx(0.05));
}

TEST_CASE("constraint values take two levels and the batch mean stays in range") {
  PhyModel phy;
  LatencyConstraint lat;
  Rng rng(12);
  Vector mean = Vector::Zero(2);
  const int trials = 500;
  for (int k = 0; k < trials; ++k) {
    Schedule s = Schedule::empty(2, 9, 1.6);
    for (int i = 0; i < 9; ++i) {
      s.rates(i) = rng.uniform(1.6, 13.0);
      for (int j = 0; j < 2; ++j) s.assign(j, i) = rng.bernoulli(0.3);
    }
    const Vector g = constraint_values(s, phy, lat).g;
    for (int j = 0; j < 2; ++j) {
      const bool two_level = std::abs(g(j) - 0.05) < 1e-15 || std::abs(g(j) + 0.95) < 1e-15;
      CHECK(two_level);
    }
    mean += g;
  }
  mean /= trials;
  CHECK(mean.minCoeff() >= -0.95);
  CHECK(mean.maxCoeff() <= 0.05);
}

TEST_CASE("baseline rate") {
  PhyModel phy;
  BaselineParams params;
  CHECK(baseline_rate(1e9, phy, params) == 13.0);
  CHECK(baseline_rate(0.0, phy, params) == 1.6);
  const double h = 0.5 * (gain_for(3.3, 0.95) + gain_for(4.9, 0.95));
  CHECK(baseline_rate(h, phy, params) == 3.3);
}

TEST_CASE("round robin rotation") {
  PhyModel phy;
  phy.channels = 1;
  LatencyConstraint lat;
  BaselineParams params;
  const auto ch = constant_channels(2, 1, 1e9);  // rate 13
  const auto states = zero_states(2);
  const auto both = round_robin(0, states, ch, phy, lat, params);
  CHECK(both.assign.sum() == 2);

  lat.t_max = 1.5 * tx_time(13.0, phy.packet_bits);  // room for one packet
  CHECK(round_robin(0, states, ch, phy, lat, params).assign(0, 0) == 1);
  CHECK(round_robin(0, states, ch, phy, lat, params).assign(0, 1) == 0);
  CHECK(round_robin(1, states, ch, phy, lat, params).assign(0, 1) == 1);
  CHECK(round_robin(1, states, ch, phy, lat, params).assign(0, 0) == 0);
}

TEST_CASE("round robin is fair over m cycles") {
  PhyModel phy;
  BaselineParams params;
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform01() * 10);
    phy.channels = 1 + static_cast<int>(rng.uniform01() * 2);
    const auto ch = constant_channels(m, phy.channels, 1e9);
    LatencyConstraint lat;
    lat.t_max = 1.5 * tx_time(13.0, phy.packet_bits);
    const long offset = static_cast<long>(rng.uniform01() * 1000);
    Eigen::VectorXi served = Eigen::VectorXi::Zero(m);
    for (long c = offset; c < offset + m; ++c) {
      const auto s = round_robin(c, zero_states(m), ch, phy, lat, params);
      served += s.assign.colwise().sum().transpose();
    }
    // one slot per channel per cycle, so the first phy.channels systems in line get served
    CHECK(served.minCoeff() == phy.channels);
    CHECK(served.maxCoeff() == phy.channels);
  }
}

TEST_CASE("round robin with no budget is empty") {
  PhyModel phy;
  LatencyConstraint lat;
  lat.t_max = 0.0;
  const auto s = round_robin(3, zero_states(4), constant_channels(4, 2, 20.0), phy, lat, BaselineParams{});
  CHECK(s.assign.sum() == 0);
}

TEST_CASE("priority ranking serves the largest Lyapunov value first") {
  PhyModel phy;
  phy.channels = 1;
  LatencyConstraint lat;
  lat.t_max = 1.5 * tx_time(13.0, phy.packet_bits);
  const auto ch = constant_channels(2, 1, 1e9);
  std::vector<PlantState> states{{Vector::Constant(1, 1.0)}, {Vector::Constant(1, 3.0)}};
  const std::vector<Matrix> lyap(2, Matrix::Identity(1, 1));
  const auto s = priority_ranking(states, lyap, ch, phy, lat, BaselineParams{});
  CHECK(s.assign(0, 1) == 1);
  CHECK(s.assign(0, 0) == 0);

  const auto tie = priority_ranking(zero_states(2), lyap, ch, phy, lat, BaselineParams{});
  CHECK(tie.assign(0, 0) == 1);
  CHECK(tie.assign(0, 1) == 0);
}

TEST_CASE("priority ranking equals round robin for one system") {
  PhyModel phy;
  LatencyConstraint lat;
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const ChannelMatrix ch{Matrix::NullaryExpr(1, 2, [&] { return rng.exponential(5.0); })};
    const std::vector<PlantState> st{{Vector::Constant(1, rng.uniform(-10, 10))}};
    const std::vector<Matrix> lyap(1, Matrix::Identity(1, 1));
    const auto a = priority_ranking(st, lyap, ch, phy, lat, BaselineParams{});
    const auto b = round_robin(0, st, ch, phy, lat, BaselineParams{});
    CHECK(a.assign == b.assign);
    CHECK(a.rates == b.rates);
  }
}

TEST_CASE("baseline schedules respect the budget and one channel per system") {
  PhyModel phy;
  LatencyConstraint lat;
  Rng rng(17);
  for (int k = 0; k < 200; ++k) {
    const ChannelMatrix ch{Matrix::NullaryExpr(9, 2, [&] { return rng.exponential(6.0); })};
    const auto s = round_robin(k, zero_states(9), ch, phy, lat, BaselineParams{});
    CHECK(s.assign.colwise().sum().maxCoeff() <= 1);
    for (int j = 0; j < 2; ++j) CHECK(channel_time(s, phy, j) <= lat.t_max + 1e-15);
  }
}

TEST_CASE("certain transmissions") {
  PhyModel phy;
  phy.pdr_model = PerCurveTable({{1.6, {0.0, 1.0}, {0.0, 0.0}}});
  LatencyConstraint lat;
  Schedule s = Schedule::empty(2, 3, 13.0);
  s.assign << 1, 0, 1, 0, 1, 0;
  Rng rng(1);
  const ChannelMatrix ch{Matrix::Constant(3, 2, 1.0)};
  const auto ok = simulate_transmissions(s, ch, phy, lat, rng);
  CHECK(ok.success == std::vector<bool>{true, true, true});
  CHECK(ok.truncated == 0);

  phy.pdr_model = PerCurveTable({{1.6, {0.0, 1.0}, {1.0, 1.0}}});
  const auto fail = simulate_transmissions(s, ch, phy, lat, rng);
  CHECK(fail.success == std::vector<bool>{false, false, false});
}

TEST_CASE("transmissions past the deadline are cut") {
  PhyModel phy;
  phy.channels = 1;
  phy.pdr_model = PerCurveTable({{1.6, {0.0, 1.0}, {0.0, 0.0}}});
  LatencyConstraint lat;
  Schedule s = Schedule::empty(1, 3, 4.0);  // 2e-4 each
  s.assign << 1, 1, 1;
  Rng rng(1);
  const auto out = simulate_transmissions(s, {Matrix::Constant(3, 1, 1.0)}, phy, lat, rng);
  CHECK(out.success == std::vector<bool>{true, true, false});
  CHECK(out.truncated == 1);
  CHECK(out.planned_time(0) == doctest::Approx(6e-4));
  CHECK(out.realized_time(0) == doctest::Approx(4e-4));
}

TEST_CASE("empirical success rate matches the combined delivery rate") {
  PhyModel phy;
  LatencyConstraint lat;
  const ChannelMatrix ch{(Matrix(3, 2) << 2.0, 5.0, 8.0, 1.0, 0.5, 3.0).finished()};
  Schedule s = Schedule::empty(2, 3, 6.5);
  s.assign << 1, 0, 1, 1, 1, 0;
  Rng rng(99);
  const int runs = 100000;
  std::vector<int> hits(3, 0);
  for (int r = 0; r < runs; ++r) {
    const auto out = simulate_transmissions(s, ch, phy, lat, rng);
    for (int i = 0; i < 3; ++i) hits[i] += out.success[i];
  }
  for (int i = 0; i < 3; ++i) {
    const double q = combined_pdr(phy, ch.h.row(i).transpose(), s.assign.col(i), s.rates(i));
    const double freq = static_cast<double>(hits[i]) / runs;
    const double se = std::sqrt(q * (1 - q) / runs);
    CHECK(std::abs(freq - q) <= 3 * se + 1e-12);
  }
}

TEST_CASE("schedule json round trip") {
  Schedule s = Schedule::empty(2, 3, 6.5);
  s.assign << 1, 0, 1, 0, 1, 0;
  s.rates << 1.6, 3.3, 13.0;
  const auto back = schedule_from_json(schedule_to_json(s));
  CHECK(back.assign == s.assign);
  CHECK(back.rates == s.rates);
}
