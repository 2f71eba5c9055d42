#include "ctlsched/commands.hpp"

#include "ctlsched/csv.hpp"

#include <sstream>

namespace ctlsched {

namespace {

std::filesystem::path prepare_output_dir(const RunConfig& config) {
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw std::runtime_error("cannot create output directory " + dir.string());
  return dir;
}

void write_trajectory(const std::filesystem::path& path, const RolloutResult& result) {
  std::ostringstream os;
  write_trajectory_csv(os, result);
  write_file_atomic(path, os.str());
}

std::uint64_t first_eval_seed(const RunConfig& config) {
  return Rng::stream(config.seed, "eval", {0}).engine()();
}

}  // namespace

void write_metrics_csv(std::ostream& out, const std::vector<IterationLog>& log, int channels) {
  out << "iter,objective,lagrangian";
  for (int j = 1; j <= channels; ++j) out << ",lambda_" << j;
  for (int j = 1; j <= channels; ++j) out << ",time_ch_" << j;
  for (int j = 1; j <= channels; ++j) out << ",sat_rate_" << j;
  out << '\n';
  for (const auto& row : log) {
    out << row.iter << ',' << format_double(row.objective) << ',' << format_double(row.lagrangian);
    for (int j = 0; j < channels; ++j) out << ',' << format_double(row.lambda(j));
    for (int j = 0; j < channels; ++j) out << ',' << format_double(row.channel_time(j));
    for (int j = 0; j < channels; ++j) out << ',' << format_double(row.sat_rate(j));
    out << '\n';
  }
}

std::vector<PlantModel> run_ensemble(const RunConfig& config) {
  Rng rng = Rng::stream(config.seed, "ensemble");
  return sample_ensemble(config.ensemble, rng);
}

TrainOutput cmd_train(const RunConfig& config) {
  config.validate();
  const auto dir = prepare_output_dir(config);
  TrainOutput out;
  out.ensemble = run_ensemble(config);
  out.checkpoint = dir / "checkpoint.ckpt";
  out.metrics = dir / "metrics.csv";

  const PolicyArch arch = policy_arch(config);
  // the output location is not part of the experiment, so it stays out of
  // the snapshot and reruns elsewhere produce identical checkpoints
  nlohmann::json snapshot = config_to_json(config);
  snapshot.erase("output_dir");
  out.state = initial_train_state(arch, config.phy.channels, config.seed);

  auto flush_metrics = [&](const TrainState& s) {
    std::ostringstream os;
    write_metrics_csv(os, s.log, config.phy.channels);
    write_file_atomic(out.metrics, os.str());
  };
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const TrainState& s) {
    save_checkpoint(make_checkpoint(s, out.ensemble, snapshot, config.seed), out.checkpoint);
    flush_metrics(s);
  };

  try {
    train(out.state, out.ensemble, config.phy, config.latency, config.train, config.seed, hooks);
  } catch (const TrainingDiverged&) {
    flush_metrics(out.state);
    throw;
  }
  save_checkpoint(make_checkpoint(out.state, out.ensemble, snapshot, config.seed), out.checkpoint);
  flush_metrics(out.state);
  return out;
}

Checkpoint load_compatible_checkpoint(const RunConfig& config, const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const PolicyArch expected = policy_arch(config);
  if (!(ckpt.policy.arch == expected)) {
    throw CheckpointError("checkpoint: incompatible architecture (checkpoint has " +
                          arch_to_json(ckpt.policy.arch).dump() + ", config expects " +
                          arch_to_json(expected).dump() + ")");
  }
  if (static_cast<int>(ckpt.ensemble.size()) != config.ensemble.m)
    throw CheckpointError("checkpoint: ensemble size does not match ensemble.m");
  if (ckpt.dual.lambda.size() != config.phy.channels)
    throw CheckpointError("checkpoint: multiplier count does not match phy.channels");
  return ckpt;
}

EvalOutput cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint) {
  config.validate();
  const Checkpoint ckpt = load_compatible_checkpoint(config, checkpoint);
  const auto dir = prepare_output_dir(config);

  EvalOutput out;
  const std::vector<NamedScheduler> schedulers{
      {"learned", make_policy_scheduler(ckpt.policy, config.rollout.sampled_execution)}};
  out.table = compare(schedulers, ckpt.ensemble, config.phy, config.latency, config.rollout, config.seed);

  // training-distribution check with stochastic actions
  const int n = config.phy.channels;
  out.iid_sat_rate = Vector::Zero(n);
  out.iid_mean_time = Vector::Zero(n);
  constexpr long kIidBatches = 500;
  const std::uint64_t iid_seed = Rng::stream(config.seed, "eval-iid").engine()();
  long count = 0;
  for (long b = 0; b < kIidBatches; ++b) {
    const auto batch = sample_batch(ckpt.policy, config.train.batch_size, ckpt.ensemble, config.phy,
                                    config.train.state_box, iid_seed, b);
    for (const auto& s : batch) {
      for (int j = 0; j < n; ++j) {
        const double t = channel_time(s.schedule, config.phy, j);
        out.iid_mean_time(j) += t;
        out.iid_sat_rate(j) += t <= config.latency.t_max ? 1.0 : 0.0;
      }
      ++count;
    }
  }
  out.iid_sat_rate /= static_cast<double>(count);
  out.iid_mean_time /= static_cast<double>(count);

  std::ostringstream os;
  write_comparison_csv(os, out.table);
  write_file_atomic(dir / "eval.csv", os.str());

  const RolloutSummary agg = out.table.aggregate("learned");
  const nlohmann::json summary{
      {"checkpoint_iteration", ckpt.iteration},
      {"stable_count_mean", agg.stable_count},
      {"mean_cost", agg.mean_cost},
      {"violation_rate", agg.violation_rate},
      {"iid_sat_rate", std::vector<double>(out.iid_sat_rate.data(), out.iid_sat_rate.data() + n)},
      {"iid_mean_time", std::vector<double>(out.iid_mean_time.data(), out.iid_mean_time.data() + n)}};
  write_file_atomic(dir / "eval_summary.json", summary.dump(2) + "\n");

  write_trajectory(dir / "trajectory_learned.csv",
                   rollout(schedulers[0].schedule, ckpt.ensemble, config.phy, config.latency, config.rollout,
                           first_eval_seed(config)));
  return out;
}

ComparisonTable cmd_compare(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint) {
  config.validate();
  std::vector<PlantModel> ensemble;
  std::vector<NamedScheduler> schedulers;
  if (checkpoint) {
    Checkpoint ckpt = load_compatible_checkpoint(config, *checkpoint);
    ensemble = std::move(ckpt.ensemble);
    schedulers.push_back({"learned", make_policy_scheduler(std::move(ckpt.policy), config.rollout.sampled_execution)});
  } else {
    ensemble = run_ensemble(config);
  }
  const auto dir = prepare_output_dir(config);
  schedulers.push_back({"round_robin", make_round_robin(config.phy, config.latency, config.baseline)});
  schedulers.push_back(
      {"priority_ranking", make_priority_ranking(ensemble, config.phy, config.latency, config.baseline)});

  const ComparisonTable table = compare(schedulers, ensemble, config.phy, config.latency, config.rollout, config.seed);
  std::ostringstream os;
  write_comparison_csv(os, table);
  write_file_atomic(dir / "comparison.csv", os.str());

  for (const auto& s : schedulers) {
    write_trajectory(dir / ("trajectory_" + s.name + ".csv"),
                     rollout(s.schedule, ensemble, config.phy, config.latency, config.rollout, first_eval_seed(config)));
  }
  return table;
}

}  // namespace ctlsched
