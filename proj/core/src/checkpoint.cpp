#include "ctlsched/checkpoint.hpp"

#include "ctlsched/csv.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace ctlsched {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'L', 'S', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  const auto cols = rows.empty() ? 0 : rows[0].size();
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw CheckpointError("checkpoint: ragged matrix in ensemble");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace

nlohmann::json plant_to_json(const PlantModel& model) {
  return nlohmann::json{{"a_closed", matrix_to_json(model.a_closed())},
                        {"a_open", matrix_to_json(model.a_open())},
                        {"noise_cov", matrix_to_json(model.noise_cov())},
                        {"lyap", matrix_to_json(model.lyap())}};
}

PlantModel plant_from_json(const nlohmann::json& j) {
  return PlantModel(matrix_from_json(j.at("a_closed")), matrix_from_json(j.at("a_open")),
                    matrix_from_json(j.at("noise_cov")), matrix_from_json(j.at("lyap")));
}

Checkpoint make_checkpoint(const TrainState& state, const std::vector<PlantModel>& ensemble,
                           const nlohmann::json& config, std::uint64_t seed) {
  Checkpoint c;
  c.config = config;
  c.seed = seed;
  c.iteration = state.iteration;
  c.policy = state.policy;
  c.dual = state.dual;
  c.baseline = state.baseline;
  c.baseline_ready = state.baseline_ready;
  c.ensemble = ensemble;
  return c;
}

TrainState train_state_from(const Checkpoint& ckpt) {
  TrainState s;
  s.policy = ckpt.policy;
  s.dual = ckpt.dual;
  s.iteration = ckpt.iteration;
  s.baseline = ckpt.baseline;
  s.baseline_ready = ckpt.baseline_ready;
  return s;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  require(ckpt.policy.theta.size() == ckpt.policy.arch.num_params(), "save_checkpoint: parameter count mismatch");
  nlohmann::json ensemble = nlohmann::json::array();
  for (const auto& model : ckpt.ensemble) ensemble.push_back(plant_to_json(model));
  const nlohmann::json header{{"version", ckpt.version},
                              {"arch", arch_to_json(ckpt.policy.arch)},
                              {"seed", ckpt.seed},
                              {"iteration", ckpt.iteration},
                              {"num_params", ckpt.policy.theta.size()},
                              {"num_lambda", ckpt.dual.lambda.size()},
                              {"baseline", ckpt.baseline},
                              {"baseline_ready", ckpt.baseline_ready},
                              {"config", ckpt.config},
                              {"ensemble", ensemble}};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, ckpt.version);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (Eigen::Index k = 0; k < ckpt.policy.theta.size(); ++k) put_le<double>(out, ckpt.policy.theta(k));
  for (Eigen::Index k = 0; k < ckpt.dual.lambda.size(); ++k) put_le<double>(out, ckpt.dual.lambda(k));
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kPrefix = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (data.size() < kPrefix) throw CheckpointError("checkpoint: truncated file " + path.string());
  if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError("checkpoint: not a checkpoint file " + path.string());
  const auto version = get_le<std::uint32_t>(data, sizeof kMagic);
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("checkpoint: incompatible format version " + std::to_string(version) + " (expected " +
                          std::to_string(Checkpoint::kVersion) + ")");
  }
  const auto header_len = get_le<std::uint64_t>(data, sizeof kMagic + sizeof(std::uint32_t));
  if (header_len > data.size() - kPrefix) throw CheckpointError("checkpoint: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data.substr(kPrefix, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: corrupt header: ") + e.what());
  }

  Checkpoint c;
  try {
    c.version = version;
    c.policy.arch = arch_from_json(header.at("arch"));
    c.seed = header.at("seed").get<std::uint64_t>();
    c.iteration = header.at("iteration").get<long>();
    c.baseline = header.at("baseline").get<double>();
    c.baseline_ready = header.at("baseline_ready").get<bool>();
    c.config = header.at("config");
    const auto num_params = header.at("num_params").get<std::uint64_t>();
    const auto num_lambda = header.at("num_lambda").get<std::uint64_t>();
    if (static_cast<Eigen::Index>(num_params) != c.policy.arch.num_params())
      throw CheckpointError("checkpoint: parameter count disagrees with architecture");
    const std::size_t payload = (num_params + num_lambda) * sizeof(double);
    if (data.size() != kPrefix + header_len + payload) {
      throw CheckpointError("checkpoint: length mismatch in " + path.string() + " (expected " +
                            std::to_string(kPrefix + header_len + payload) + " bytes, found " +
                            std::to_string(data.size()) + ")");
    }
    std::size_t offset = kPrefix + header_len;
    c.policy.theta.resize(static_cast<Eigen::Index>(num_params));
    for (auto& v : c.policy.theta) {
      v = get_le<double>(data, offset);
      offset += sizeof(double);
    }
    c.dual.lambda.resize(static_cast<Eigen::Index>(num_lambda));
    for (auto& v : c.dual.lambda) {
      v = get_le<double>(data, offset);
      offset += sizeof(double);
    }
    for (const auto& model : header.at("ensemble")) c.ensemble.push_back(plant_from_json(model));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

}  // namespace ctlsched
