#include "ctlsched/commands.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace ctlsched;
using nlohmann::json;

namespace {

RunConfig small_config(const std::filesystem::path& out, long iterations) {
  auto c = parse_config_json(json{{"seed", 7},
                                  {"ensemble", {{"m", 3}}},
                                  {"phy", {{"channels", 1}}},
                                  {"policy", {{"arch", "mlp"}, {"hidden", {6}}}},
                                  {"train", {{"iterations", iterations}, {"batch_size", 8}}},
                                  {"rollout", {{"horizon", 200}, {"num_seeds", 2}}}});
  c.output_dir = out.string();
  return c;
}

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("training twice gives identical files") {
  const auto dir = oracle::scratch_dir("cmd_det");
  const auto a = cmd_train(small_config(dir / "a", 40));
  const auto b = cmd_train(small_config(dir / "b", 40));
  CHECK(oracle::slurp(a.metrics) == oracle::slurp(b.metrics));
  CHECK(oracle::slurp(a.checkpoint) == oracle::slurp(b.checkpoint));
  CHECK(first_line(a.metrics) == "iter,objective,lagrangian,lambda_1,time_ch_1,sat_rate_1");
  CHECK(a.state.log.size() == 40);
}

TEST_CASE("metric header lists every channel") {
  std::ostringstream os;
  write_metrics_csv(os, {}, 2);
  CHECK(os.str() == "iter,objective,lagrangian,lambda_1,lambda_2,time_ch_1,time_ch_2,sat_rate_1,sat_rate_2\n");
}

TEST_CASE("evaluation reproduces the training satisfaction rate") {
  const auto dir = oracle::scratch_dir("cmd_eval");
  auto cfg = small_config(dir / "run", 400);
  const auto trained = cmd_train(cfg);
  const auto ev = cmd_eval(cfg, trained.checkpoint);

  const long tail = 100;
  double sat = 0.0;
  for (std::size_t k = trained.state.log.size() - tail; k < trained.state.log.size(); ++k)
    sat += trained.state.log[k].sat_rate(0);
  sat /= tail;
  const double n_train = tail * cfg.train.batch_size;
  const double se = std::sqrt(std::max(sat * (1 - sat), 0.01) / n_train);
  CHECK(std::abs(ev.iid_sat_rate(0) - sat) <= 4 * se + 0.02);

  CHECK(std::filesystem::exists(dir / "run" / "eval.csv"));
  CHECK(std::filesystem::exists(dir / "run" / "eval_summary.json"));
  CHECK(first_line(dir / "run" / "trajectory_learned.csv") == "cycle,system,state_norm,received,channel_time_1");
  CHECK(ev.table.rows_for("learned").size() == 2);

  const auto table = cmd_compare(cfg, trained.checkpoint);
  CHECK(table.rows_for("learned").size() == 2);
  CHECK(table.rows_for("round_robin").size() == 2);
  CHECK(table.rows_for("priority_ranking").size() == 2);
  // the learned rollouts inside compare match those of eval
  CHECK(table.rows_for("learned")[0].summary.mean_cost == ev.table.rows_for("learned")[0].summary.mean_cost);
}

TEST_CASE("baseline-only comparison") {
  const auto dir = oracle::scratch_dir("cmd_cmp");
  const auto cfg = small_config(dir / "cmp", 1);
  const auto table = cmd_compare(cfg, std::nullopt);
  CHECK(table.rows_for("learned").empty());
  CHECK(table.rows_for("round_robin").size() == 2);
  CHECK(table.rows_for("priority_ranking").size() == 2);
  CHECK(first_line(dir / "cmp" / "comparison.csv") == "scheduler,seed,stable_count,mean_cost,violation_rate");
  CHECK(std::filesystem::exists(dir / "cmp" / "trajectory_round_robin.csv"));
  CHECK(std::filesystem::exists(dir / "cmp" / "trajectory_priority_ranking.csv"));
}

TEST_CASE("checkpoints from another architecture are refused") {
  const auto dir = oracle::scratch_dir("cmd_arch");
  const auto trained = cmd_train(small_config(dir / "a", 2));
  auto other = small_config(dir / "b", 2);
  other.policy.hidden = {7};
  CHECK_THROWS_WITH_AS(cmd_eval(other, trained.checkpoint), doctest::Contains("incompatible architecture"),
                       CheckpointError);
  auto more = small_config(dir / "c", 2);
  more.ensemble.m = 4;
  CHECK_THROWS_AS(cmd_compare(more, trained.checkpoint), CheckpointError);
}

TEST_CASE("unwritable output directory") {
  const auto dir = oracle::scratch_dir("cmd_unwritable");
  std::ofstream(dir / "file") << "x";
  auto cfg = small_config(dir / "file" / "sub", 1);
  CHECK_THROWS(cmd_train(cfg));
}
