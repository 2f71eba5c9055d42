#include "ctlsched/learning.hpp"
#include "ctlsched/sim.hpp"

#include <benchmark/benchmark.h>

using namespace ctlsched;

namespace {

struct Fixture {
  PolicyParams params;
  PolicyInput input;
  GsoMatrix gso;
  Schedule schedule;

  explicit Fixture(ArchKind kind, int m, int n) {
    Rng rng(1);
    PolicyArch arch;
    arch.kind = kind;
    arch.systems = m;
    arch.channels = n;
    params = init_params(arch, rng);
    auto [ch, st] = sample_states(rng, m, n, 1, StateBox{}, 6.0);
    input = make_policy_input(ch, st);
    gso = build_gso(ch);
    schedule = sample_action(policy_forward(params, &gso, input), rng);
  }
};

void BM_Forward(benchmark::State& state) {
  const Fixture f(static_cast<ArchKind>(state.range(0)), static_cast<int>(state.range(1)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(policy_forward(f.params, &f.gso, f.input));
}
BENCHMARK(BM_Forward)->ArgsProduct({{0, 1}, {9, 20}});

void BM_GradLogProb(benchmark::State& state) {
  const Fixture f(static_cast<ArchKind>(state.range(0)), static_cast<int>(state.range(1)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(grad_log_prob(f.params, &f.gso, f.input, f.schedule));
}
BENCHMARK(BM_GradLogProb)->ArgsProduct({{0, 1}, {9, 20}});

void BM_CombinedPdr(benchmark::State& state) {
  PhyModel phy;
  phy.channels = 4;
  Vector h(4);
  h << 3.0, 7.0, 1.5, 12.0;
  Eigen::VectorXi a(4);
  a << 1, 0, 1, 1;
  for (auto _ : state) benchmark::DoNotOptimize(combined_pdr(phy, h, a, 6.5));
}
BENCHMARK(BM_CombinedPdr);

void BM_TrainIteration(benchmark::State& state) {
  EnsembleConfig ec;
  Rng rng(2);
  const auto ens = sample_ensemble(ec, rng);
  PhyModel phy;
  PolicyArch arch;
  auto ts = initial_train_state(arch, 2, 3);
  TrainConfig tc;
  for (auto _ : state) {
    tc.iterations = ts.iteration + 1;
    train(ts, ens, phy, LatencyConstraint{}, tc, 3);
  }
}
BENCHMARK(BM_TrainIteration)->Unit(benchmark::kMillisecond);

void BM_Rollout(benchmark::State& state) {
  EnsembleConfig ec;
  Rng rng(4);
  const auto ens = sample_ensemble(ec, rng);
  PhyModel phy;
  RolloutConfig rc;
  rc.horizon = state.range(0);
  const auto rr = make_round_robin(phy, LatencyConstraint{}, BaselineParams{});
  for (auto _ : state) benchmark::DoNotOptimize(rollout(rr, ens, phy, LatencyConstraint{}, rc, 5));
}
BENCHMARK(BM_Rollout)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
