#include "ctlsched/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory")->required();
  cmd->add_option("--seed", c.seed, "override the configured seed");
}

ctlsched::RunConfig load(const Common& c) {
  ctlsched::RunConfig config = ctlsched::parse_config(c.config);
  config.output_dir = c.out;
  if (c.seed) config.seed = *c.seed;
  config.validate();
  return config;
}

void print_table(const ctlsched::ComparisonTable& table, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    const auto agg = table.aggregate(name);
    std::cout << name << ": stable " << agg.stable_count << " mean_cost " << agg.mean_cost
              << " violation_rate " << agg.violation_rate << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Control-aware wireless scheduling: train, evaluate and compare schedulers"};
  app.require_subcommand(1);

  Common train_opts, eval_opts, compare_opts;
  std::string eval_ckpt;
  std::optional<std::string> compare_ckpt;

  auto* train = app.add_subcommand("train", "train a scheduling policy");
  add_common(train, train_opts);

  auto* eval = app.add_subcommand("eval", "roll out a checkpointed policy");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);

  auto* cmp = app.add_subcommand("compare", "compare learned policy with round robin and priority ranking");
  add_common(cmp, compare_opts);
  cmp->add_option("--checkpoint", compare_ckpt, "checkpoint file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto config = load(train_opts);
      const auto out = ctlsched::cmd_train(config);
      const auto& last = out.state.log.back();
      std::cout << "trained " << out.state.iteration << " iterations; objective " << last.objective
                << "\ncheckpoint " << out.checkpoint.string() << "\nmetrics " << out.metrics.string() << '\n';
    } else if (*eval) {
      const auto config = load(eval_opts);
      const auto out = ctlsched::cmd_eval(config, eval_ckpt);
      print_table(out.table, {"learned"});
      std::cout << "iid satisfaction";
      for (Eigen::Index j = 0; j < out.iid_sat_rate.size(); ++j) std::cout << ' ' << out.iid_sat_rate(j);
      std::cout << '\n';
    } else if (*cmp) {
      const auto config = load(compare_opts);
      std::optional<std::filesystem::path> ckpt;
      if (compare_ckpt) ckpt = *compare_ckpt;
      const auto table = ctlsched::cmd_compare(config, ckpt);
      std::vector<std::string> names;
      if (ckpt) names.push_back("learned");
      names.push_back("round_robin");
      names.push_back("priority_ranking");
      print_table(table, names);
    }
  } catch (const ctlsched::TrainingDiverged& e) {
    std::cerr << "error: training diverged at iteration " << e.iteration() << ": " << e.what() << '\n';
    return 3;
  } catch (const ctlsched::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
