#include "ctlsched/policy.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ctlsched {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename Derived>
Matrix activate(const Eigen::MatrixBase<Derived>& pre, Activation act) {
  switch (act) {
    case Activation::identity:
      return pre;
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::sigmoid:
      return pre.unaryExpr([](double v) { return sigmoid(v); });
  }
  return pre;
}

/// Elementwise d act / d pre.
template <typename Derived>
Matrix activation_slope(const Eigen::MatrixBase<Derived>& pre, Activation act) {
  switch (act) {
    case Activation::identity:
      return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::relu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::sigmoid:
      return pre.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 - s);
      });
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

void check_input(const PolicyArch& arch, const PolicyInput& input) {
  const Eigen::Index expected =
      static_cast<Eigen::Index>(arch.systems) * (arch.channels + arch.state_dim);
  require(input.w0.size() == expected, "policy: input length does not match (m, n, p)");
}

void check_params(const PolicyParams& params) {
  require(params.theta.size() == params.arch.num_params(), "policy: parameter count mismatch");
}

// ---- MLP -------------------------------------------------------------------

struct MlpTape {
  std::vector<Vector> inputs;  // layer inputs
  std::vector<Vector> pre;     // pre-activations
};

Vector mlp_raw(const PolicyParams& params, const PolicyInput& input, MlpTape* tape) {
  const auto& arch = params.arch;
  const auto widths = arch.widths();
  const Eigen::Index channel_entries = static_cast<Eigen::Index>(arch.systems) * arch.channels;

  Vector a = input.w0;
  a.head(channel_entries) *= arch.channel_scale;
  a.tail(a.size() - channel_entries) *= arch.state_scale;

  const std::size_t layers = widths.size() - 1;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index in = widths[l], out = widths[l + 1];
    Eigen::Map<const Matrix> w(params.theta.data() + offset, out, in);
    offset += in * out;
    Vector h = w * a;
    if (tape) {
      tape->inputs.push_back(a);
      tape->pre.push_back(h);
    }
    a = l + 1 < layers ? Vector(activate(h, arch.activation)) : h;
  }
  return a;
}

Vector mlp_backprop(const PolicyParams& params, const PolicyInput& input, const Vector& dlogits) {
  const auto& arch = params.arch;
  const auto widths = arch.widths();
  MlpTape tape;
  mlp_raw(params, input, &tape);

  const std::size_t layers = widths.size() - 1;
  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += static_cast<Eigen::Index>(widths[l]) * widths[l + 1];
  }

  Vector grad(offset);
  Vector d = dlogits;
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::Index in = widths[l], out = widths[l + 1];
    const Vector dh = l + 1 == layers ? d : Vector(d.cwiseProduct(activation_slope(tape.pre[l], arch.activation)));
    Eigen::Map<Matrix>(grad.data() + offsets[l], out, in) = dh * tape.inputs[l].transpose();
    if (l > 0) {
      Eigen::Map<const Matrix> w(params.theta.data() + offsets[l], out, in);
      d = w.transpose() * dh;
    }
  }
  return grad;
}

// ---- GNN -------------------------------------------------------------------

struct GnnLayerTape {
  std::vector<Matrix> shifted;  // S^k Z_in, k = 0..K-1
  Matrix pre;
};

Matrix node_features(const PolicyArch& arch, const PolicyInput& input) {
  const int m = arch.systems, n = arch.channels, p = arch.state_dim;
  Matrix z(m, n + p);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) z(i, j) = input.w0(j * m + i) * arch.channel_scale;
    for (int d = 0; d < p; ++d) z(i, n + d) = input.w0(m * n + i * p + d) * arch.state_scale;
  }
  return z;
}

Matrix gnn_raw(const PolicyParams& params, const Matrix& s, const Matrix& z0,
               std::vector<GnnLayerTape>* tape) {
  const auto& arch = params.arch;
  const auto widths = arch.widths();
  const std::size_t layers = widths.size() - 1;
  const int taps = arch.taps;

  Matrix z = z0;
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index fin = widths[l], fout = widths[l + 1];
    GnnLayerTape layer;
    layer.shifted.reserve(static_cast<std::size_t>(taps));
    layer.shifted.push_back(z);
    for (int k = 1; k < taps; ++k) layer.shifted.push_back(s * layer.shifted.back());
    Matrix pre = Matrix::Zero(z.rows(), fout);
    for (int k = 0; k < taps; ++k) {
      Eigen::Map<const Matrix> a(params.theta.data() + offset + k * fin * fout, fin, fout);
      pre.noalias() += layer.shifted[static_cast<std::size_t>(k)] * a;
    }
    offset += taps * fin * fout;
    z = l + 1 < layers ? activate(pre, arch.activation) : pre;
    if (tape) {
      layer.pre = std::move(pre);
      tape->push_back(std::move(layer));
    }
  }
  return z;
}

Vector node_outputs_to_logits(const PolicyArch& arch, const Matrix& y) {
  const int m = arch.systems, n = arch.channels;
  Vector z(m * n + m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) z(i * n + j) = y(i, j);
    z(m * n + i) = y(i, n);
  }
  return z;
}

Matrix logits_to_node_grad(const PolicyArch& arch, const Vector& dz) {
  const int m = arch.systems, n = arch.channels;
  Matrix dy(m, n + 1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) dy(i, j) = dz(i * n + j);
    dy(i, n) = dz(m * n + i);
  }
  return dy;
}

void check_gso(const PolicyArch& arch, const GsoMatrix* gso) {
  require(gso != nullptr, "gnn: graph shift operator required");
  require(gso->s.rows() == arch.systems && gso->s.cols() == arch.systems,
          "gnn: graph shift operator must be m x m");
}

Vector gnn_backprop(const PolicyParams& params, const Matrix& s, const PolicyInput& input,
                    const Vector& dlogits) {
  const auto& arch = params.arch;
  const auto widths = arch.widths();
  const std::size_t layers = widths.size() - 1;
  const int taps = arch.taps;

  std::vector<GnnLayerTape> tape;
  gnn_raw(params, s, node_features(arch, input), &tape);

  std::vector<Eigen::Index> offsets(layers);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    offsets[l] = offset;
    offset += static_cast<Eigen::Index>(taps) * widths[l] * widths[l + 1];
  }

  Vector grad(offset);
  Matrix dz = logits_to_node_grad(arch, dlogits);
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::Index fin = widths[l], fout = widths[l + 1];
    const auto& layer = tape[l];
    const Matrix dpre = l + 1 == layers ? dz : Matrix(dz.cwiseProduct(activation_slope(layer.pre, arch.activation)));
    for (int k = 0; k < taps; ++k) {
      Eigen::Map<Matrix>(grad.data() + offsets[l] + k * fin * fout, fin, fout) =
          layer.shifted[static_cast<std::size_t>(k)].transpose() * dpre;
    }
    if (l == 0) break;
    // dZ_in = sum_k S^k dpre A_k^T, evaluated Horner-style (S is symmetric)
    auto tap = [&](int k) {
      return Eigen::Map<const Matrix>(params.theta.data() + offsets[l] + k * fin * fout, fin, fout);
    };
    Matrix g = dpre * tap(taps - 1).transpose();
    for (int k = taps - 2; k >= 0; --k) g = dpre * tap(k).transpose() + s * g;
    dz = std::move(g);
  }
  return grad;
}

}  // namespace

// ---- descriptors -----------------------------------------------------------

std::string to_string(ArchKind kind) { return kind == ArchKind::mlp ? "mlp" : "gnn"; }

std::string to_string(Activation act) {
  switch (act) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "relu";
}

ArchKind arch_kind_from_string(const std::string& s) {
  if (s == "mlp") return ArchKind::mlp;
  if (s == "gnn") return ArchKind::gnn;
  throw ConfigError("policy.arch: expected \"mlp\" or \"gnn\", got \"" + s + "\"");
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw ConfigError("policy.activation: expected identity, relu or sigmoid, got \"" + s + "\"");
}

std::vector<int> PolicyArch::widths() const {
  std::vector<int> w;
  if (kind == ArchKind::mlp) {
    w.push_back(systems * (channels + state_dim));
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(systems * (channels + 1));
  } else {
    w.push_back(channels + state_dim);
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(channels + 1);
  }
  return w;
}

Eigen::Index PolicyArch::num_params() const {
  const auto w = widths();
  Eigen::Index q = 0;
  const Eigen::Index k = kind == ArchKind::gnn ? taps : 1;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) q += k * w[l] * w[l + 1];
  return q;
}

void PolicyArch::validate() const {
  if (systems < 1) throw ConfigError("policy.systems: must be >= 1");
  if (channels < 1) throw ConfigError("policy.channels: must be >= 1");
  if (state_dim < 1) throw ConfigError("policy.state_dim: must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("policy.hidden: widths must be >= 1");
  if (taps < 1) throw ConfigError("policy.taps: must be >= 1");
  if (!(channel_scale > 0.0)) throw ConfigError("policy.channel_scale: must be positive");
  if (!(state_scale > 0.0)) throw ConfigError("policy.state_scale: must be positive");
  if (!(rate_min > 0.0 && rate_max >= rate_min)) throw ConfigError("policy.rate_range: invalid bounds");
  if (!(rate_std >= 0.0)) throw ConfigError("policy.rate_std: must be >= 0");
}

nlohmann::json arch_to_json(const PolicyArch& arch) {
  return nlohmann::json{{"kind", to_string(arch.kind)},
                        {"systems", arch.systems},
                        {"channels", arch.channels},
                        {"state_dim", arch.state_dim},
                        {"hidden", arch.hidden},
                        {"taps", arch.taps},
                        {"activation", to_string(arch.activation)},
                        {"normalize_gso", arch.normalize_gso},
                        {"channel_scale", arch.channel_scale},
                        {"state_scale", arch.state_scale},
                        {"rate_min", arch.rate_min},
                        {"rate_max", arch.rate_max},
                        {"rate_std", arch.rate_std}};
}

PolicyArch arch_from_json(const nlohmann::json& j) {
  PolicyArch a;
  a.kind = arch_kind_from_string(j.at("kind").get<std::string>());
  a.systems = j.at("systems").get<int>();
  a.channels = j.at("channels").get<int>();
  a.state_dim = j.at("state_dim").get<int>();
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.taps = j.at("taps").get<int>();
  a.activation = activation_from_string(j.at("activation").get<std::string>());
  a.normalize_gso = j.at("normalize_gso").get<bool>();
  a.channel_scale = j.at("channel_scale").get<double>();
  a.state_scale = j.at("state_scale").get<double>();
  a.rate_min = j.at("rate_min").get<double>();
  a.rate_max = j.at("rate_max").get<double>();
  a.rate_std = j.at("rate_std").get<double>();
  return a;
}

// ---- inputs ----------------------------------------------------------------

PolicyInput make_policy_input(const ChannelMatrix& channels, std::span<const PlantState> states) {
  const auto m = channels.systems();
  const auto n = channels.channels();
  require(static_cast<Eigen::Index>(states.size()) == m, "make_policy_input: one state per system required");
  const Eigen::Index p = m > 0 ? states[0].x.size() : 0;
  PolicyInput in{Vector(m * n + m * p)};
  in.w0.head(m * n) = Eigen::Map<const Vector>(channels.h.data(), m * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    require(states[static_cast<std::size_t>(i)].x.size() == p, "make_policy_input: state dimensions differ");
    in.w0.segment(m * n + i * p, p) = states[static_cast<std::size_t>(i)].x;
  }
  return in;
}

GsoMatrix build_gso(const ChannelMatrix& channels, bool normalize) {
  GsoMatrix g{channels.h * channels.h.transpose()};
  if (normalize) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.s, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().maxCoeff();
    if (top > 0.0) g.s /= top;
  }
  return g;
}

PolicyParams init_params(const PolicyArch& arch, Rng& rng) {
  arch.validate();
  const auto w = arch.widths();
  PolicyParams params{arch, Vector(arch.num_params())};
  Eigen::Index offset = 0;
  const int k = arch.kind == ArchKind::gnn ? arch.taps : 1;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(k * w[l] + w[l + 1]));
    const Eigen::Index count = static_cast<Eigen::Index>(k) * w[l] * w[l + 1];
    for (Eigen::Index c = 0; c < count; ++c) params.theta(offset + c) = rng.uniform(-bound, bound);
    offset += count;
  }
  return params;
}

// ---- forward ---------------------------------------------------------------

Vector policy_logits(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input) {
  check_params(params);
  check_input(params.arch, input);
  if (params.arch.kind == ArchKind::mlp) return mlp_raw(params, input, nullptr);
  check_gso(params.arch, gso);
  return node_outputs_to_logits(params.arch,
                                gnn_raw(params, gso->s, node_features(params.arch, input), nullptr));
}

PolicyOutput apply_heads(const PolicyArch& arch, const Vector& logits) {
  const int m = arch.systems, n = arch.channels;
  require(logits.size() == m * n + m, "apply_heads: logits length mismatch");
  PolicyOutput out;
  out.assign_prob.resize(n, m);
  out.rate_mean.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j)
      out.assign_prob(j, i) = std::clamp(sigmoid(logits(i * n + j)), kProbClamp, 1.0 - kProbClamp);
    out.rate_mean(i) = arch.rate_min + (arch.rate_max - arch.rate_min) * sigmoid(logits(m * n + i));
  }
  out.rate_std = arch.rate_std;
  out.rate_min = arch.rate_min;
  out.rate_max = arch.rate_max;
  return out;
}

PolicyOutput mlp_forward(const PolicyParams& params, const PolicyInput& input) {
  require(params.arch.kind == ArchKind::mlp, "mlp_forward: parameters are not an MLP");
  return apply_heads(params.arch, policy_logits(params, nullptr, input));
}

PolicyOutput gnn_forward(const PolicyParams& params, const GsoMatrix& gso, const PolicyInput& input) {
  require(params.arch.kind == ArchKind::gnn, "gnn_forward: parameters are not a GNN");
  return apply_heads(params.arch, policy_logits(params, &gso, input));
}

PolicyOutput policy_forward(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input) {
  return apply_heads(params.arch, policy_logits(params, gso, input));
}

// ---- distribution ----------------------------------------------------------

Schedule sample_action(const PolicyOutput& output, Rng& rng) {
  const auto n = output.assign_prob.rows();
  const auto m = output.assign_prob.cols();
  Schedule s{IndexMatrix(n, m), Vector(m), Vector(m)};
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s.assign(j, i) = rng.bernoulli(output.assign_prob(j, i)) ? 1 : 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    s.raw_rates(i) = output.rate_mean(i) + output.rate_std * rng.normal();
    s.rates(i) = std::clamp(s.raw_rates(i), output.rate_min, output.rate_max);
  }
  return s;
}

Schedule mean_action(const PolicyOutput& output) {
  const auto n = output.assign_prob.rows();
  const auto m = output.assign_prob.cols();
  Schedule s{IndexMatrix(n, m), output.rate_mean, Vector()};
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s.assign(j, i) = output.assign_prob(j, i) >= 0.5 ? 1 : 0;
  return s;
}

double log_prob(const PolicyOutput& output, const Schedule& schedule) {
  const auto n = output.assign_prob.rows();
  const auto m = output.assign_prob.cols();
  require(schedule.channels() == n && schedule.systems() == m, "log_prob: schedule dimension mismatch");
  require(output.rate_std > 0.0, "log_prob: rate_std must be positive");
  const Vector& rates = schedule.raw_rates.size() == m ? schedule.raw_rates : schedule.rates;
  require(rates.size() == m, "log_prob: rates dimension mismatch");

  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double p = output.assign_prob(j, i);
      total += schedule.assign(j, i) != 0 ? std::log(p) : std::log1p(-p);
    }
  const double sigma = output.rate_std;
  const double norm = std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double u = (rates(i) - output.rate_mean(i)) / sigma;
    total += -0.5 * u * u - norm;
  }
  return total;
}

Vector log_prob_logit_grad(const PolicyArch& arch, const Vector& logits, const Schedule& schedule) {
  const int m = arch.systems, n = arch.channels;
  require(logits.size() == m * n + m, "log_prob_logit_grad: logits length mismatch");
  require(schedule.channels() == n && schedule.systems() == m, "log_prob_logit_grad: schedule mismatch");
  require(arch.rate_std > 0.0, "log_prob_logit_grad: rate_std must be positive");
  const Vector& rates = schedule.raw_rates.size() == m ? schedule.raw_rates : schedule.rates;

  Vector g(m * n + m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = sigmoid(logits(i * n + j));
      // the clamp is flat outside [eps, 1 - eps]
      const bool clamped = s < kProbClamp || s > 1.0 - kProbClamp;
      g(i * n + j) = clamped ? 0.0 : static_cast<double>(schedule.assign(j, i)) - s;
    }
    const double s = sigmoid(logits(m * n + i));
    const double span = arch.rate_max - arch.rate_min;
    const double mean = arch.rate_min + span * s;
    const double var = arch.rate_std * arch.rate_std;
    g(m * n + i) = (rates(i) - mean) / var * span * s * (1.0 - s);
  }
  return g;
}

Vector backprop_logits(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input,
                       const Vector& dlogits) {
  check_params(params);
  check_input(params.arch, input);
  require(dlogits.size() == params.arch.systems * (params.arch.channels + 1),
          "backprop_logits: gradient length mismatch");
  if (params.arch.kind == ArchKind::mlp) return mlp_backprop(params, input, dlogits);
  check_gso(params.arch, gso);
  return gnn_backprop(params, gso->s, input, dlogits);
}

Vector grad_log_prob(const PolicyParams& params, const GsoMatrix* gso, const PolicyInput& input,
                     const Schedule& schedule) {
  const Vector logits = policy_logits(params, gso, input);
  return backprop_logits(params, gso, input, log_prob_logit_grad(params.arch, logits, schedule));
}

}  // namespace ctlsched
