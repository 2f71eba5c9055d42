#include "ctlsched/sim.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace ctlsched;

namespace {

PhyModel perfect_phy(int n) {
  PhyModel phy;
  phy.channels = n;
  phy.pdr_model = PerCurveTable({{1.6, {0.0, 1.0}, {0.0, 0.0}}});
  return phy;
}

// every system gets its own channel at the top rate
Scheduler grant_all() {
  return [](long, std::span<const PlantState> states, const ChannelMatrix& ch, Rng&) {
    const auto m = static_cast<Eigen::Index>(states.size());
    Schedule s = Schedule::empty(ch.channels(), m, 13.0);
    for (Eigen::Index i = 0; i < m; ++i) s.assign(i, i) = 1;
    return s;
  };
}

Scheduler grant_none() {
  return [](long, std::span<const PlantState> states, const ChannelMatrix& ch, Rng&) {
    return Schedule::empty(ch.channels(), static_cast<Eigen::Index>(states.size()), 13.0);
  };
}

std::vector<PlantModel> scalar_ensemble(int m, double closed, double open) {
  return std::vector<PlantModel>(m, PlantModel(Matrix::Constant(1, 1, closed), Matrix::Constant(1, 1, open),
                                               Matrix::Identity(1, 1), Matrix::Identity(1, 1)));
}

RolloutResult fixture(int m, long horizon) {
  RolloutResult r;
  r.systems = m;
  r.state_dim = 1;
  r.horizon = horizon;
  r.states = Matrix::Zero(m, horizon);
  r.diverged.assign(m, false);
  return r;
}

}  // namespace

TEST_CASE("always-delivered stable plants settle at the stationary cost") {
  RolloutConfig cfg;
  cfg.horizon = 50000;
  cfg.eval_window = 0.9;
  const auto ens = scalar_ensemble(3, 0.9, 1.1);
  const auto r = rollout(grant_all(), ens, perfect_phy(3), LatencyConstraint{}, cfg, 4);
  CHECK(r.summary.mean_cost == doctest::Approx(1.0 / (1.0 - 0.81)).epsilon(0.05));
  CHECK(r.summary.stable_count == 3);
  CHECK(r.received.sum() == 3 * cfg.horizon);
}

TEST_CASE("never-delivered unstable plants are all flagged") {
  RolloutConfig cfg;
  const auto ens = scalar_ensemble(4, 0.9, 1.1);
  const auto r = rollout(grant_none(), ens, perfect_phy(2), LatencyConstraint{}, cfg, 4);
  CHECK(r.summary.stable_count == 0);
}

TEST_CASE("rollouts are reproducible") {
  EnsembleConfig ec;
  Rng rng(2);
  const auto ens = sample_ensemble(ec, rng);
  PhyModel phy;
  phy.fading_mean = 6.0;
  RolloutConfig cfg;
  cfg.horizon = 300;
  const auto rr = make_round_robin(phy, LatencyConstraint{}, BaselineParams{});
  const auto a = rollout(rr, ens, phy, LatencyConstraint{}, cfg, 17);
  const auto b = rollout(rr, ens, phy, LatencyConstraint{}, cfg, 17);
  CHECK(a.states == b.states);
  CHECK(a.received == b.received);
  CHECK(a.fading_checksum == b.fading_checksum);
  CHECK(a.noise_checksum == b.noise_checksum);
  CHECK(a.summary.mean_cost == b.summary.mean_cost);
}

TEST_CASE("stability count") {
  RolloutConfig cfg;
  CHECK(stability_count(fixture(5, 100), cfg) == 5);

  auto all = fixture(3, 100);
  all.diverged.assign(3, true);
  CHECK(stability_count(all, cfg) == 0);

  auto one = fixture(4, 100);
  one.states(2, 90) = 150.0;
  CHECK(stability_count(one, cfg) == 3);
  auto early = fixture(4, 100);
  early.states(2, 10) = 150.0;  // before the window
  CHECK(stability_count(early, cfg) == 4);
}

TEST_CASE("paired comparison") {
  EnsembleConfig ec;
  Rng rng(3);
  const auto ens = sample_ensemble(ec, rng);
  PhyModel phy;
  phy.fading_mean = 6.0;
  RolloutConfig cfg;
  cfg.horizon = 200;
  cfg.num_seeds = 3;
  LatencyConstraint lat;
  const auto rr = make_round_robin(phy, lat, BaselineParams{});
  const std::vector<NamedScheduler> self{{"a", rr}, {"b", rr}};
  const auto table = compare(self, ens, phy, lat, cfg, 8);
  const auto a = table.rows_for("a"), b = table.rows_for("b");
  REQUIRE(a.size() == 3);
  for (std::size_t s = 0; s < a.size(); ++s) {
    CHECK(a[s].summary.mean_cost == b[s].summary.mean_cost);
    CHECK(a[s].summary.stable_count == b[s].summary.stable_count);
    CHECK(a[s].fading_checksum == b[s].fading_checksum);
  }


  const auto one = std::vector<PlantModel>{ens[0]};
  const std::vector<NamedScheduler> single{{"round_robin", rr},
                                           {"priority_ranking", make_priority_ranking(one, phy, lat, BaselineParams{})}};
  const auto t3 = compare(single, one, phy, lat, cfg, 8);
  const auto r = t3.rows_for("round_robin"), p = t3.rows_for("priority_ranking");
  for (std::size_t s = 0; s < r.size(); ++s) {
    CHECK(r[s].summary.mean_cost == p[s].summary.mean_cost);
    CHECK(r[s].summary.stable_count == p[s].summary.stable_count);
  }
}

TEST_CASE("learned scheduler runs and respects shapes") {
  EnsembleConfig ec;
  ec.m = 4;
  Rng rng(5);
  const auto ens = sample_ensemble(ec, rng);
  PhyModel phy;
  PolicyArch arch;
  arch.systems = 4;
  arch.hidden = {5};
  const auto params = init_params(arch, rng);
  RolloutConfig cfg;
  cfg.horizon = 50;
  for (bool sampled : {false, true}) {
    const auto r = rollout(make_policy_scheduler(params, sampled), ens, phy, LatencyConstraint{}, cfg, 3);
    CHECK(r.states.cols() == 50);
    for (const auto& s : r.schedules)
      for (Eigen::Index i = 0; i < 4; ++i)
        CHECK(std::find(phy.mcs_table.begin(), phy.mcs_table.end(), s.rates(i)) != phy.mcs_table.end());
  }
}

TEST_CASE("csv headers") {
  auto r = fixture(2, 3);
  r.received = IndexMatrix::Zero(3, 2);
  r.realized_time = Matrix::Zero(3, 2);
  std::ostringstream traj;
  write_trajectory_csv(traj, r);
  const std::string text = traj.str();
  CHECK(text.rfind("cycle,system,state_norm,received,channel_time_1,channel_time_2\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);

  ComparisonTable t;
  t.rows.push_back({"round_robin", 0, {3, 1.5, 0.0}, 0, 0});
  std::ostringstream cmp;
  write_comparison_csv(cmp, t);
  CHECK(cmp.str() == "scheduler,seed,stable_count,mean_cost,violation_rate\nround_robin,0,3,1.5,0\n");
}
