#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ctlsched {

/// Seeded random source. Every consumer gets its own named sub-stream so that
/// adding draws in one place never shifts the sequence seen by another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Derives an independent stream from a root seed, a name and optional
  /// integer coordinates (iteration, batch index, evaluation seed, ...).
  static Rng stream(std::uint64_t root, std::string_view name,
                    std::initializer_list<std::uint64_t> coords = {});

  double uniform01();
  double uniform(double lo, double hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  double exponential(double mean);
  bool bernoulli(double p) { return uniform01() < p; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace ctlsched
