#include "ctlsched/checkpoint.hpp"
#include "ctlsched/config.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <fstream>

using namespace ctlsched;

namespace {

TrainState random_state(Rng& rng, const PolicyArch& arch) {
  TrainState s;
  s.policy = init_params(arch, rng);
  for (Eigen::Index k = 0; k < s.policy.theta.size(); ++k) s.policy.theta(k) *= std::exp(rng.normal() * 10);
  s.dual.lambda = Vector::NullaryExpr(arch.channels, [&] { return rng.exponential(3.0); });
  s.iteration = static_cast<long>(rng.uniform01() * 1e6);
  s.baseline = rng.normal() * 100;
  s.baseline_ready = rng.bernoulli(0.5);
  return s;
}

PolicyArch random_arch(Rng& rng) {
  PolicyArch a;
  a.kind = rng.bernoulli(0.5) ? ArchKind::gnn : ArchKind::mlp;
  a.systems = 1 + static_cast<int>(rng.uniform01() * 5);
  a.channels = 1 + static_cast<int>(rng.uniform01() * 3);
  a.hidden = {1 + static_cast<int>(rng.uniform01() * 6)};
  a.taps = 1 + static_cast<int>(rng.uniform01() * 4);
  a.channel_scale = rng.uniform(0.01, 1.0);
  return a;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit exact") {
  const auto dir = oracle::scratch_dir("ckpt");
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto arch = random_arch(rng);
    const auto state = random_state(rng, arch);
    EnsembleConfig ec;
    ec.m = arch.systems;
    ec.p = 1 + trial % 2;
    const auto ens = sample_ensemble(ec, rng);
    const nlohmann::json cfg{{"seed", trial}};
    save_checkpoint(make_checkpoint(state, ens, cfg, 1000 + trial), dir / "c.ckpt");
    const auto back = load_checkpoint(dir / "c.ckpt");
    CHECK(back.version == Checkpoint::kVersion);
    CHECK(back.seed == 1000u + trial);
    CHECK(back.config == cfg);
    CHECK(back.policy.arch == arch);
    CHECK(back.policy.theta == state.policy.theta);
    CHECK(back.dual.lambda == state.dual.lambda);
    CHECK(back.iteration == state.iteration);
    CHECK(back.baseline == state.baseline);
    CHECK(back.baseline_ready == state.baseline_ready);
    REQUIRE(back.ensemble.size() == ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) {
      CHECK(back.ensemble[i].a_closed() == ens[i].a_closed());
      CHECK(back.ensemble[i].a_open() == ens[i].a_open());
      CHECK(back.ensemble[i].noise_cov() == ens[i].noise_cov());
      CHECK(back.ensemble[i].lyap() == ens[i].lyap());
    }
    const auto resumed = train_state_from(back);
    CHECK(resumed.policy.theta == state.policy.theta);
    CHECK(resumed.iteration == state.iteration);
  }
}

TEST_CASE("damaged checkpoints are rejected") {
  const auto dir = oracle::scratch_dir("ckpt_bad");
  Rng rng(2);
  PolicyArch arch;
  arch.systems = 3;
  arch.hidden = {4};
  EnsembleConfig ec;
  ec.m = 3;
  save_checkpoint(make_checkpoint(random_state(rng, arch), sample_ensemble(ec, rng), {}, 1), dir / "good.ckpt");
  const std::string bytes = oracle::slurp(dir / "good.ckpt");

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir / name, std::ios::binary) << content;
    return dir / name;
  };
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{19}, std::size_t{40}, bytes.size() - 1}) {
    CHECK_THROWS_AS(load_checkpoint(write("cut.ckpt", bytes.substr(0, cut))), CheckpointError);
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(write("long.ckpt", bytes + "x")), doctest::Contains("length"),
                       CheckpointError);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_WITH_AS(load_checkpoint(write("version.ckpt", version)), doctest::Contains("version"),
                       CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint(write("magic.ckpt", magic)), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), CheckpointError);
}
