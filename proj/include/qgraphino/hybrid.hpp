#pragma once

// The full hybrid regressor:
//
//   v     = aggregate(GCN(features))                 graph module
//   u     = P^T v + b                                 learned projection d_L -> 2^n
//   psi   = U(theta) amplitude_encode(u)              quantum layer
//   e_q   = <psi| Z_q |psi>,  q = 0..n-1
//   y_hat = w^T e + c                                 linear readout
//
// Parameters are exposed as flat blocks in a fixed order (adjacency, W^1..W^L,
// projection, projection_bias, ansatz, readout, readout_bias). The optimizer, the
// gradient checker and the HQGM checkpoint all use that order.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgraphino/binary_io.hpp"
#include "qgraphino/error.hpp"
#include "qgraphino/graph.hpp"
#include "qgraphino/qsim.hpp"
#include "qgraphino/rng.hpp"

namespace qgraphino::hybrid {

using graph::Matrix;
using graph::Vector;

struct HybridConfig {
  graph::GraphConfig graph;
  qsim::AnsatzSpec ansatz;

  std::size_t encoder_width() const noexcept { return std::size_t{1} << ansatz.n_qubits; }

  bool operator==(const HybridConfig&) const = default;
};

inline void validate(const HybridConfig& cfg) {
  graph::validate(cfg.graph);
  qsim::validate(cfg.ansatz);
}

struct HybridParams {
  graph::GraphParams graph;
  Matrix projection;        // d_L x 2^n
  Vector projection_bias;   // 2^n
  std::vector<double> ansatz;
  Vector readout;           // n_qubits
  double readout_bias = 0.0;

  bool operator==(const HybridParams&) const = default;
};

struct HybridModel {
  HybridConfig config;
  HybridParams params;
};

/// Zero-valued parameter set with the model's shapes (used for gradient accumulation).
inline HybridParams zeros_like(const HybridConfig& cfg) {
  HybridParams p;
  p.graph.adjacency = Matrix::Zero(cfg.graph.n_nodes, cfg.graph.n_nodes);
  for (int l = 1; l <= cfg.graph.n_layers(); ++l) {
    p.graph.weights.push_back(Matrix::Zero(cfg.graph.layer_dims[l - 1], cfg.graph.layer_dims[l]));
  }
  const auto width = static_cast<Eigen::Index>(cfg.encoder_width());
  p.projection = Matrix::Zero(cfg.graph.output_dim(), width);
  p.projection_bias = Vector::Zero(width);
  p.ansatz.assign(static_cast<std::size_t>(qsim::param_count(cfg.ansatz)), 0.0);
  p.readout = Vector::Zero(cfg.ansatz.n_qubits);
  p.readout_bias = 0.0;
  return p;
}

/// Mutable views over every parameter block, in canonical order. Eigen blocks are column-major.
inline std::vector<std::span<double>> blocks(HybridParams& p) {
  std::vector<std::span<double>> out;
  out.emplace_back(p.graph.adjacency.data(), static_cast<std::size_t>(p.graph.adjacency.size()));
  for (auto& w : p.graph.weights) out.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
  out.emplace_back(p.projection.data(), static_cast<std::size_t>(p.projection.size()));
  out.emplace_back(p.projection_bias.data(), static_cast<std::size_t>(p.projection_bias.size()));
  out.emplace_back(p.ansatz);
  out.emplace_back(p.readout.data(), static_cast<std::size_t>(p.readout.size()));
  out.emplace_back(&p.readout_bias, 1);
  return out;
}

inline std::vector<std::span<const double>> blocks(const HybridParams& p) {
  std::vector<std::span<const double>> out;
  for (auto b : blocks(const_cast<HybridParams&>(p))) out.emplace_back(b.data(), b.size());
  return out;
}

inline std::vector<std::string> block_names(const HybridConfig& cfg) {
  std::vector<std::string> names{"adjacency"};
  for (int l = 1; l <= cfg.graph.n_layers(); ++l) names.push_back("gcn_weight_" + std::to_string(l));
  names.insert(names.end(), {"projection", "projection_bias", "ansatz", "readout", "readout_bias"});
  return names;
}

/// Shapes (rows, cols) of each block in canonical order.
inline std::vector<std::array<std::int64_t, 2>> block_shapes(const HybridConfig& cfg) {
  std::vector<std::array<std::int64_t, 2>> s;
  const auto& g = cfg.graph;
  s.push_back({g.n_nodes, g.n_nodes});
  for (int l = 1; l <= g.n_layers(); ++l) s.push_back({g.layer_dims[l - 1], g.layer_dims[l]});
  const auto width = static_cast<std::int64_t>(cfg.encoder_width());
  s.push_back({g.output_dim(), width});
  s.push_back({width, 1});
  s.push_back({qsim::param_count(cfg.ansatz), 1});
  s.push_back({cfg.ansatz.n_qubits, 1});
  s.push_back({1, 1});
  return s;
}

/// Seeded initialization, one SplitMix64 stream consumed in this order:
/// GCN weights (Glorot), projection (Glorot), projection bias (same limit),
/// ansatz angles U[0, 2pi), readout weights (Glorot n_qubits -> 1). S = 0, c = 0.
inline HybridModel init_model(const HybridConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  SplitMix64 rng(seed);
  HybridModel m{cfg, {}};
  m.params.graph = graph::init_params(cfg.graph, rng);
  const auto width = static_cast<Eigen::Index>(cfg.encoder_width());
  const double plim = graph::glorot_limit(cfg.graph.output_dim(), width);
  m.params.projection = graph::uniform_matrix(cfg.graph.output_dim(), width, plim, rng);
  m.params.projection_bias = graph::uniform_matrix(width, 1, plim, rng);
  m.params.ansatz.resize(static_cast<std::size_t>(qsim::param_count(cfg.ansatz)));
  for (auto& t : m.params.ansatz) t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  m.params.readout = graph::uniform_matrix(cfg.ansatz.n_qubits, 1, graph::glorot_limit(cfg.ansatz.n_qubits, 1), rng);
  m.params.readout_bias = 0.0;
  return m;
}

inline void check_shapes(const HybridModel& m) {
  validate(m.config);
  graph::check_params(m.config.graph, m.params.graph);
  const auto width = static_cast<Eigen::Index>(m.config.encoder_width());
  if (m.params.projection.rows() != m.config.graph.output_dim() || m.params.projection.cols() != width ||
      m.params.projection_bias.size() != width) {
    detail::fail(ErrorCode::ShapeMismatch, "projection must map d_L to 2^n_qubits");
  }
  if (m.params.ansatz.size() != static_cast<std::size_t>(qsim::param_count(m.config.ansatz))) {
    detail::fail(ErrorCode::ParamLengthMismatch, "ansatz parameter count mismatch");
  }
  if (m.params.readout.size() != m.config.ansatz.n_qubits) {
    detail::fail(ErrorCode::ShapeMismatch, "readout width must equal n_qubits");
  }
}

struct ForwardCache {
  graph::ForwardCache graph;
  qsim::GateSequence circuit;
  Vector pooled;                      // v
  std::vector<double> encoder_input;  // u
  std::vector<double> expectations;   // e
  double prediction = 0.0;
  bool valid = false;
};

inline double forward(const HybridModel& m, const Matrix& features, ForwardCache* cache = nullptr) {
  check_shapes(m);
  const auto& p = m.params;
  graph::ForwardCache gcache;
  const Vector v = graph::forward(m.config.graph, p.graph, features, cache ? &gcache : nullptr);
  const Vector u_vec = p.projection.transpose() * v + p.projection_bias;
  std::vector<double> u(u_vec.data(), u_vec.data() + u_vec.size());

  qsim::GateSequence circuit = qsim::build_sequence(m.config.ansatz);
  qsim::Statevector state = qsim::amplitude_encode(u, m.config.ansatz.n_qubits);
  qsim::run_sequence(state, circuit, p.ansatz);
  std::vector<double> e = qsim::expect_all_z(state);

  double y = p.readout_bias;
  for (std::size_t q = 0; q < e.size(); ++q) y += p.readout(static_cast<Eigen::Index>(q)) * e[q];

  if (cache) {
    cache->graph = std::move(gcache);
    cache->circuit = std::move(circuit);
    cache->pooled = v;
    cache->encoder_input = std::move(u);
    cache->expectations = std::move(e);
    cache->prediction = y;
    cache->valid = true;
  }
  return y;
}

inline double mse_loss(double prediction, double target) {
  const double d = prediction - target;
  return d * d;
}

inline double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) detail::fail(ErrorCode::LengthMismatch, "prediction/target counts differ");
  if (predictions.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) s += mse_loss(predictions[i], targets[i]);
  return s / static_cast<double>(predictions.size());
}

/// Gradient of the per-sample squared error with respect to every parameter block.
inline HybridParams backward(const HybridModel& m, const ForwardCache& cache, double target) {
  if (!cache.valid) detail::fail(ErrorCode::MissingCache, "backward called without a forward cache");
  const auto& p = m.params;
  const double dy = 2.0 * (cache.prediction - target);

  HybridParams g;
  const auto nq = static_cast<Eigen::Index>(m.config.ansatz.n_qubits);
  g.readout.resize(nq);
  for (Eigen::Index q = 0; q < nq; ++q) g.readout(q) = dy * cache.expectations[static_cast<std::size_t>(q)];
  g.readout_bias = dy;

  // observable seen by the circuit: sum_q w_q Z_q
  const std::vector<double> w(p.readout.data(), p.readout.data() + p.readout.size());
  const qsim::Statevector encoded = qsim::amplitude_encode(cache.encoder_input, m.config.ansatz.n_qubits);
  g.ansatz = qsim::param_shift_grad(cache.circuit, p.ansatz, encoded, w);
  for (auto& x : g.ansatz) x *= dy;

  const std::vector<double> du_raw = qsim::input_grad(cache.circuit, p.ansatz, cache.encoder_input, w);
  const Vector du = Eigen::Map<const Vector>(du_raw.data(), static_cast<Eigen::Index>(du_raw.size())) * dy;
  g.projection = cache.pooled * du.transpose();
  g.projection_bias = du;
  const Vector dv = p.projection * du;

  graph::GraphGrads gg = graph::graph_backward(m.config.graph, p.graph, cache.graph, dv);
  g.graph.adjacency = std::move(gg.adjacency);
  g.graph.weights = std::move(gg.weights);
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint: <path> holds the HQGM binary, <path>.json the config sidecar.
//
//   bytes 0..3   "HQGM"
//   u32          format version (1)
//   u32          block count B
//   B times:     u64 element count k, then k little-endian float64 (column-major)
//
// Blocks follow the canonical order documented at the top of this header.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json config_to_json(const HybridConfig& cfg) {
  nlohmann::json shapes = nlohmann::json::array();
  const auto names = block_names(cfg);
  const auto dims = block_shapes(cfg);
  for (std::size_t i = 0; i < names.size(); ++i) shapes.push_back({{"name", names[i]}, {"shape", dims[i]}});
  return {{"format", "HQGM"},
          {"version", kCheckpointVersion},
          {"graph",
           {{"n_nodes", cfg.graph.n_nodes},
            {"layer_dims", cfg.graph.layer_dims},
            {"activation", std::string(graph::to_string(cfg.graph.activation))}}},
          {"ansatz", qsim::to_json(cfg.ansatz)},
          {"blocks", std::move(shapes)}};
}

inline HybridConfig config_from_json(const nlohmann::json& j) {
  try {
    HybridConfig cfg;
    const auto& g = j.at("graph");
    cfg.graph.n_nodes = g.at("n_nodes").get<int>();
    cfg.graph.layer_dims = g.at("layer_dims").get<std::vector<int>>();
    const auto act = graph::parse_activation(g.at("activation").get<std::string>());
    if (!act) detail::fail(ErrorCode::InvalidSpec, "unknown activation");
    cfg.graph.activation = *act;
    cfg.ansatz = qsim::ansatz_from_json(j.at("ansatz"));
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorCode::InvalidSpec, std::string("bad model config: ") + e.what());
  }
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  return std::filesystem::path(checkpoint.string() + ".json");
}

inline void save_checkpoint(const HybridModel& m, const std::filesystem::path& path) {
  check_shapes(m);
  io::ByteWriter w;
  w.put_bytes("HQGM");
  w.put_u32(kCheckpointVersion);
  const auto bs = blocks(m.params);
  w.put_u32(static_cast<std::uint32_t>(bs.size()));
  for (auto b : bs) {
    w.put_u64(b.size());
    for (double v : b) w.put_f64(v);
  }
  w.write_file(path);

  std::ofstream side(sidecar_path(path), std::ios::trunc);
  if (!side) detail::fail(ErrorCode::Io, "cannot write " + sidecar_path(path).string());
  side << config_to_json(m.config).dump(2) << '\n';
}

inline HybridModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream side(sidecar_path(path));
  if (!side) detail::fail(ErrorCode::Io, "cannot open " + sidecar_path(path).string());
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorCode::InvalidSpec, std::string("bad checkpoint sidecar: ") + e.what());
  }
  HybridModel m{config_from_json(j), {}};
  m.params = zeros_like(m.config);

  auto r = io::ByteReader::from_file(path);
  if (r.get_bytes(4) != "HQGM") detail::fail(ErrorCode::BadMagic, path.string() + " is not an HQGM checkpoint");
  if (r.get_u32() != kCheckpointVersion) detail::fail(ErrorCode::VersionMismatch, "unsupported checkpoint version");
  auto bs = blocks(m.params);
  if (r.get_u32() != bs.size()) detail::fail(ErrorCode::ShapeInconsistent, "checkpoint block count does not match config");
  for (auto b : bs) {
    if (r.get_u64() != b.size()) detail::fail(ErrorCode::ShapeInconsistent, "checkpoint block size does not match config");
    for (double& v : b) v = r.get_f64();
  }
  if (r.remaining() != 0) detail::fail(ErrorCode::ShapeInconsistent, "trailing bytes after last block");
  return m;
}

}  // namespace qgraphino::hybrid
