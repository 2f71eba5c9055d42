#pragma once

// Single-Bernoulli toy problem: one system, one channel, a linear policy and
// objective f(a) = a. The exact gradient of E[f] follows from enumerating a.

#include "ctlsched/learning.hpp"
#include "ctlsched/policy.hpp"

#include "oracles.hpp"

#include <cmath>
#include <vector>

namespace toy {

using ctlsched::Vector;

struct Problem {
  ctlsched::PolicyParams params;
  ctlsched::PolicyInput input;
  double prob = 0.0;
};

inline Problem make(double w_h, double w_x) {
  ctlsched::PolicyArch arch;
  arch.kind = ctlsched::ArchKind::mlp;
  arch.systems = 1;
  arch.channels = 1;
  arch.hidden = {};
  arch.activation = ctlsched::Activation::identity;
  Problem p;
  // layer is 2x2 column-major: row 0 drives the assignment logit
  p.params = {arch, Vector::Zero(4)};
  p.params.theta << w_h, 0.1, w_x, -0.2;
  p.input.w0 = Vector(2);
  p.input.w0 << 0.8, -0.5;
  p.prob = 1.0 / (1.0 + std::exp(-(w_h * 0.8 + w_x * -0.5)));
  return p;
}

// d E[a] / d theta by enumeration: E[a] = sigma(z), z = theta_00 h + theta_01 x.
inline Vector exact_gradient(const Problem& p) {
  Vector g = Vector::Zero(4);
  const double d = p.prob * (1.0 - p.prob);
  g(0) = d * p.input.w0(0);
  g(2) = d * p.input.w0(1);
  return g;
}

struct Draws {
  std::vector<Vector> per_sample;  // contribution of each sample
  Vector mean;
};

// Runs `count` single-sample iterations through reduce_score_function. With
// `baseline` on, each iteration subtracts a running mean of earlier objectives.
inline Draws estimate(const Problem& p, long count, bool baseline, ctlsched::Rng& rng) {
  const auto out = ctlsched::policy_forward(p.params, nullptr, p.input);
  const Vector lambda = Vector::Zero(1);
  Draws d;
  d.mean = Vector::Zero(4);
  double b = 0.0;
  bool ready = false;
  for (long k = 0; k < count; ++k) {
    const auto sched = ctlsched::sample_action(out, rng);
    const std::vector<double> f{static_cast<double>(sched.assign(0, 0))};
    const std::vector<Vector> g{Vector::Zero(1)};
    const std::vector<Vector> s{ctlsched::grad_log_prob(p.params, nullptr, p.input, sched)};
    const auto est = ctlsched::reduce_score_function(f, g, s, lambda, baseline && ready ? b : 0.0);
    d.per_sample.push_back(est.primal);
    d.mean += est.primal;
    if (baseline) {
      b = ready ? 0.99 * b + 0.01 * est.mean_weight : est.mean_weight;
      ready = true;
    }
  }
  d.mean /= static_cast<double>(count);
  return d;
}

}  // namespace toy
