#include "ctlsched/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace ctlsched {

namespace {

using nlohmann::json;

/// Tracks which keys of one JSON object were consumed.
class Section {
 public:
  Section(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(name_or_root() + ": expected a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key) + ": wrong type");
    }
  }

  void get_range(const std::string& key, double& lo, double& hi) {
    std::vector<double> v{lo, hi};
    get(key, v);
    if (v.size() != 2) throw ConfigError(path(key) + ": expected [lo, hi]");
    lo = v[0];
    hi = v[1];
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown key");
    }
  }

 private:
  std::string name_or_root() const { return prefix_.empty() ? "config" : prefix_; }

  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void read_ensemble(Section& root, EnsembleConfig& e) {
  const json* node = root.child("ensemble");
  if (!node) return;
  Section s(*node, "ensemble");
  s.get("m", e.m);
  s.get("p", e.p);
  s.get_range("closed_gain_range", e.closed_lo, e.closed_hi);
  s.get_range("open_gain_range", e.open_lo, e.open_hi);
  s.get("noise_var", e.noise_var);
  if (const json* lyap = s.child("lyap")) {
    if (lyap->is_string()) {
      if (lyap->get<std::string>() != "identity")
        throw ConfigError("ensemble.lyap: expected \"identity\" or a p x p matrix");
      e.lyap_choice = LyapChoice::identity;
    } else {
      std::vector<std::vector<double>> rows;
      try {
        rows = lyap->get<std::vector<std::vector<double>>>();
      } catch (const json::exception&) {
        throw ConfigError("ensemble.lyap: wrong type");
      }
      Matrix P(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != P.cols()) throw ConfigError("ensemble.lyap: ragged matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c) P(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
      }
      e.lyap_choice = LyapChoice::user;
      e.lyap = P;
    }
  }
  s.finish();
}

void read_phy(Section& root, RunConfig& c, const std::filesystem::path& base_dir) {
  const json* node = root.child("phy");
  if (!node) return;
  Section s(*node, "phy");
  auto& phy = c.phy;
  s.get("channels", phy.channels);
  s.get("packet_bits", phy.packet_bits);
  s.get_range("rate_range", phy.rate_min, phy.rate_max);
  s.get("mcs_table", phy.mcs_table);
  s.get("fading_mean", phy.fading_mean);
  AnalyticPdr analytic;
  s.get("eta0", analytic.eta0);
  s.get("mu0", analytic.mu0);
  std::string model = "analytic";
  s.get("pdr_model", model);
  s.get("per_curve_file", c.per_curve_file);
  if (model == "analytic") {
    phy.pdr_model = analytic;
    c.per_curve_file.clear();
  } else if (model == "table") {
    if (c.per_curve_file.empty()) throw ConfigError("phy.per_curve_file: required when pdr_model is \"table\"");
    std::filesystem::path file(c.per_curve_file);
    if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
    phy.pdr_model = PerCurveTable::load_csv(file);
    c.per_curve_file = file.string();
  } else {
    throw ConfigError("phy.pdr_model: expected \"analytic\" or \"table\"");
  }
  s.finish();
}

void read_latency(Section& root, LatencyConstraint& lat) {
  const json* node = root.child("latency");
  if (!node) return;
  Section s(*node, "latency");
  s.get("t_max", lat.t_max);
  s.get("delta", lat.delta);
  s.finish();
}

void read_baseline(Section& root, BaselineParams& b) {
  const json* node = root.child("baseline");
  if (!node) return;
  Section s(*node, "baseline");
  s.get("target_pdr", b.target_pdr);
  s.finish();
}

void read_policy(Section& root, PolicySettings& p) {
  const json* node = root.child("policy");
  if (!node) return;
  Section s(*node, "policy");
  std::string arch = to_string(p.kind);
  s.get("arch", arch);
  p.kind = arch_kind_from_string(arch);
  s.get("hidden", p.hidden);
  s.get("taps", p.taps);
  std::string act = to_string(p.activation);
  s.get("activation", act);
  p.activation = activation_from_string(act);
  s.get("normalize_gso", p.normalize_gso);
  s.get("rate_std", p.rate_std);
  if (const json* v = s.child("channel_scale"); v && !v->is_null()) {
    if (!v->is_number()) throw ConfigError("policy.channel_scale: wrong type");
    p.channel_scale = v->get<double>();
  }
  if (const json* v = s.child("state_scale"); v && !v->is_null()) {
    if (!v->is_number()) throw ConfigError("policy.state_scale: wrong type");
    p.state_scale = v->get<double>();
  }
  s.finish();
}

void read_train(Section& root, TrainConfig& t) {
  const json* node = root.child("train");
  if (!node) return;
  Section s(*node, "train");
  s.get("iterations", t.iterations);
  s.get("batch_size", t.batch_size);
  s.get("primal_step", t.primal_step);
  s.get("dual_step", t.dual_step);
  s.get("variance_baseline", t.variance_baseline);
  s.get("baseline_decay", t.baseline_decay);
  s.get("log_every", t.log_every);
  s.get("checkpoint_every", t.checkpoint_every);
  s.get_range("state_box", t.state_box.lo, t.state_box.hi);
  s.finish();
}

void read_rollout(Section& root, RolloutConfig& r) {
  const json* node = root.child("rollout");
  if (!node) return;
  Section s(*node, "rollout");
  s.get("horizon", r.horizon);
  s.get_range("initial_state_box", r.init_lo, r.init_hi);
  s.get("stability_threshold", r.stability_threshold);
  s.get("eval_window", r.eval_window);
  s.get("num_seeds", r.num_seeds);
  s.get("quantize_rates", r.quantize_rates);
  s.get("sampled_execution", r.sampled_execution);
  s.get("divergence_limit", r.divergence_limit);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  ensemble.validate();
  phy.validate();
  latency.validate();
  baseline.validate();
  train.validate();
  rollout.validate();
  policy_arch(*this).validate();
}

RunConfig parse_config_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  read_ensemble(root, c.ensemble);
  read_phy(root, c, base_dir);
  read_latency(root, c.latency);
  read_baseline(root, c.baseline);
  read_policy(root, c.policy);
  read_train(root, c.train);
  read_rollout(root, c.rollout);
  root.finish();
  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: malformed JSON in " + path.string() + ": " + e.what());
  }
  return parse_config_json(j, path.parent_path());
}

nlohmann::json config_to_json(const RunConfig& c) {
  json ensemble{{"m", c.ensemble.m},
                {"p", c.ensemble.p},
                {"closed_gain_range", {c.ensemble.closed_lo, c.ensemble.closed_hi}},
                {"open_gain_range", {c.ensemble.open_lo, c.ensemble.open_hi}},
                {"noise_var", c.ensemble.noise_var}};
  if (c.ensemble.lyap_choice == LyapChoice::user && c.ensemble.lyap) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < c.ensemble.lyap->rows(); ++r) {
      json row = json::array();
      for (Eigen::Index col = 0; col < c.ensemble.lyap->cols(); ++col) row.push_back((*c.ensemble.lyap)(r, col));
      rows.push_back(row);
    }
    ensemble["lyap"] = rows;
  } else {
    ensemble["lyap"] = "identity";
  }

  json phy{{"channels", c.phy.channels},
           {"packet_bits", c.phy.packet_bits},
           {"rate_range", {c.phy.rate_min, c.phy.rate_max}},
           {"mcs_table", c.phy.mcs_table},
           {"fading_mean", c.phy.fading_mean}};
  if (const auto* a = std::get_if<AnalyticPdr>(&c.phy.pdr_model)) {
    phy["pdr_model"] = "analytic";
    phy["eta0"] = a->eta0;
    phy["mu0"] = a->mu0;
  } else {
    phy["pdr_model"] = "table";
    phy["per_curve_file"] = c.per_curve_file;
  }

  json policy{{"arch", to_string(c.policy.kind)},
              {"hidden", c.policy.hidden},
              {"taps", c.policy.taps},
              {"activation", to_string(c.policy.activation)},
              {"normalize_gso", c.policy.normalize_gso},
              {"rate_std", c.policy.rate_std},
              {"channel_scale", c.policy.channel_scale ? json(*c.policy.channel_scale) : json(nullptr)},
              {"state_scale", c.policy.state_scale ? json(*c.policy.state_scale) : json(nullptr)}};

  json train{{"iterations", c.train.iterations},
             {"batch_size", c.train.batch_size},
             {"primal_step", c.train.primal_step},
             {"dual_step", c.train.dual_step},
             {"variance_baseline", c.train.variance_baseline},
             {"baseline_decay", c.train.baseline_decay},
             {"log_every", c.train.log_every},
             {"checkpoint_every", c.train.checkpoint_every},
             {"state_box", {c.train.state_box.lo, c.train.state_box.hi}}};

  json rollout{{"horizon", c.rollout.horizon},
               {"initial_state_box", {c.rollout.init_lo, c.rollout.init_hi}},
               {"stability_threshold", c.rollout.stability_threshold},
               {"eval_window", c.rollout.eval_window},
               {"num_seeds", c.rollout.num_seeds},
               {"quantize_rates", c.rollout.quantize_rates},
               {"sampled_execution", c.rollout.sampled_execution},
               {"divergence_limit", c.rollout.divergence_limit}};

  return json{{"seed", c.seed},
              {"output_dir", c.output_dir},
              {"ensemble", ensemble},
              {"phy", phy},
              {"latency", {{"t_max", c.latency.t_max}, {"delta", c.latency.delta}}},
              {"baseline", {{"target_pdr", c.baseline.target_pdr}}},
              {"policy", policy},
              {"train", train},
              {"rollout", rollout}};
}

PolicyArch policy_arch(const RunConfig& c) {
  PolicyArch a;
  a.kind = c.policy.kind;
  a.systems = c.ensemble.m;
  a.channels = c.phy.channels;
  a.state_dim = c.ensemble.p;
  a.hidden = c.policy.hidden;
  a.taps = c.policy.taps;
  a.activation = c.policy.activation;
  a.normalize_gso = c.policy.normalize_gso;
  a.channel_scale = c.policy.channel_scale.value_or(1.0 / c.phy.fading_mean);
  const double box = std::max(std::abs(c.train.state_box.lo), std::abs(c.train.state_box.hi));
  a.state_scale = c.policy.state_scale.value_or(box > 0.0 ? 1.0 / box : 1.0);
  a.rate_min = c.phy.rate_min;
  a.rate_max = c.phy.rate_max;
  a.rate_std = c.policy.rate_std;
  return a;
}

}  // namespace ctlsched
