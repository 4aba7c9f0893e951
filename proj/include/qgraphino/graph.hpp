#pragma once

// Graph convolution with a learnable adjacency:
//
//   A     = row_normalize(softplus(S) + I)
//   Z^l   = act(A Z^{l-1} W^l),  l = 1..L
//   v     = column mean of Z^L
//
// plus exact reverse-mode gradients through all three steps.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qgraphino/error.hpp"
#include "qgraphino/rng.hpp"

namespace qgraphino::graph {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { ReLU, Tanh, Identity };

inline std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

inline std::optional<Activation> parse_activation(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  return std::nullopt;
}

struct GraphConfig {
  int n_nodes = 1;
  std::vector<int> layer_dims{3, 32, 16};  // d_0 .. d_L
  Activation activation = Activation::ReLU;

  int n_layers() const noexcept { return static_cast<int>(layer_dims.size()) - 1; }
  int input_dim() const noexcept { return layer_dims.front(); }
  int output_dim() const noexcept { return layer_dims.back(); }

  bool operator==(const GraphConfig&) const = default;
};

inline void validate(const GraphConfig& cfg) {
  if (cfg.n_nodes < 1) detail::fail(ErrorCode::InvalidArgument, "n_nodes must be >= 1");
  if (cfg.layer_dims.size() < 2) detail::fail(ErrorCode::InvalidArgument, "need at least one GCN layer");
  for (int d : cfg.layer_dims) {
    if (d < 1) detail::fail(ErrorCode::InvalidArgument, "layer widths must be >= 1");
  }
}

/// Learnable state: raw adjacency S (N x N) and one weight matrix per layer.
struct GraphParams {
  Matrix adjacency;
  std::vector<Matrix> weights;

  bool operator==(const GraphParams&) const = default;
};

inline double glorot_limit(Eigen::Index fan_in, Eigen::Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Uniform(+-limit) fill in row-major order.
inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double limit, SplitMix64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

/// S = 0 (uniform mixing plus self-loops), W^l Glorot-uniform.
inline GraphParams init_params(const GraphConfig& cfg, SplitMix64& rng) {
  validate(cfg);
  GraphParams p;
  p.adjacency = Matrix::Zero(cfg.n_nodes, cfg.n_nodes);
  for (int l = 1; l <= cfg.n_layers(); ++l) {
    const int din = cfg.layer_dims[l - 1], dout = cfg.layer_dims[l];
    p.weights.push_back(uniform_matrix(din, dout, glorot_limit(din, dout), rng));
  }
  return p;
}

inline void check_params(const GraphConfig& cfg, const GraphParams& p) {
  if (p.adjacency.rows() != cfg.n_nodes || p.adjacency.cols() != cfg.n_nodes) {
    detail::fail(ErrorCode::ShapeMismatch, "adjacency must be n_nodes x n_nodes");
  }
  if (static_cast<int>(p.weights.size()) != cfg.n_layers()) detail::fail(ErrorCode::ShapeMismatch, "layer count mismatch");
  for (int l = 1; l <= cfg.n_layers(); ++l) {
    const auto& w = p.weights[l - 1];
    if (w.rows() != cfg.layer_dims[l - 1] || w.cols() != cfg.layer_dims[l]) {
      detail::fail(ErrorCode::ShapeMismatch, "weight shape mismatch at layer " + std::to_string(l));
    }
  }
}

inline double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

inline double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix normalize_adjacency(const Matrix& raw) {
  if (raw.rows() < 1 || raw.rows() != raw.cols()) detail::fail(ErrorCode::ShapeMismatch, "adjacency must be square, N >= 1");
  Matrix b = raw.unaryExpr([](double s) { return softplus(s); });
  b.diagonal().array() += 1.0;
  const Vector row_sums = b.rowwise().sum();
  for (Eigen::Index i = 0; i < b.rows(); ++i) b.row(i) /= row_sums(i);
  return b;
}

inline double activate(Activation a, double x) noexcept {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

/// Derivative of the activation at pre-activation x.
inline double activate_grad(Activation a, double x) noexcept {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

inline Matrix gcn_forward(const Matrix& z_prev, const Matrix& a, const Matrix& w, Activation act) {
  if (a.rows() != a.cols() || a.cols() != z_prev.rows() || z_prev.cols() != w.rows()) {
    detail::fail(ErrorCode::ShapeMismatch, "A(NxN) * Z(N x d_in) * W(d_in x d_out) shapes do not chain");
  }
  Matrix h = a * z_prev * w;
  return h.unaryExpr([act](double x) { return activate(act, x); });
}

inline Vector aggregate(const Matrix& z) {
  if (z.rows() < 1) detail::fail(ErrorCode::ShapeMismatch, "aggregate needs at least one node");
  return z.colwise().mean().transpose();
}

/// Intermediates retained by forward() for graph_backward().
struct ForwardCache {
  Matrix raw_adjacency;
  Matrix adjacency;                // normalized A
  std::vector<Matrix> embeddings;  // Z^0 .. Z^L
  std::vector<Matrix> preacts;     // H^1 .. H^L
  bool valid = false;
};

inline Vector forward(const GraphConfig& cfg, const GraphParams& p, const Matrix& features, ForwardCache* cache = nullptr) {
  check_params(cfg, p);
  if (features.rows() != cfg.n_nodes || features.cols() != cfg.input_dim()) {
    detail::fail(ErrorCode::ShapeMismatch, "node features must be n_nodes x d_0");
  }
  const Matrix a = normalize_adjacency(p.adjacency);
  Matrix z = features;
  if (cache) {
    cache->raw_adjacency = p.adjacency;
    cache->adjacency = a;
    cache->embeddings.assign(1, features);
    cache->preacts.clear();
  }
  for (const auto& w : p.weights) {
    Matrix h = a * z * w;
    z = h.unaryExpr([act = cfg.activation](double x) { return activate(act, x); });
    if (cache) {
      cache->preacts.push_back(std::move(h));
      cache->embeddings.push_back(z);
    }
  }
  if (cache) cache->valid = true;
  return aggregate(z);
}

struct GraphGrads {
  Matrix adjacency;             // dL/dS
  std::vector<Matrix> weights;  // dL/dW^l
  Matrix features;              // dL/dZ^0
};

inline GraphGrads graph_backward(const GraphConfig& cfg, const GraphParams& p, const ForwardCache& cache,
                                 const Vector& upstream) {
  if (!cache.valid) detail::fail(ErrorCode::MissingCache, "graph_backward called without a forward cache");
  if (upstream.size() != cfg.output_dim()) detail::fail(ErrorCode::ShapeMismatch, "upstream gradient width != d_L");
  const int n_layers = cfg.n_layers();
  const Matrix& a = cache.adjacency;
  const auto n = static_cast<double>(cfg.n_nodes);

  GraphGrads g;
  g.weights.resize(static_cast<std::size_t>(n_layers));
  Matrix d_a = Matrix::Zero(cfg.n_nodes, cfg.n_nodes);

  // mean over rows -> every row receives upstream / N
  Matrix d_z = (Vector::Ones(cfg.n_nodes) * upstream.transpose()) / n;
  for (int l = n_layers; l >= 1; --l) {
    const Matrix& h = cache.preacts[l - 1];
    const Matrix& z_prev = cache.embeddings[l - 1];
    const Matrix d_h = d_z.cwiseProduct(h.unaryExpr([act = cfg.activation](double x) { return activate_grad(act, x); }));
    const Matrix az = a * z_prev;
    g.weights[l - 1] = az.transpose() * d_h;
    const Matrix d_az = d_h * p.weights[l - 1].transpose();
    d_a += d_az * z_prev.transpose();
    d_z = a.transpose() * d_az;
  }
  g.features = std::move(d_z);

  // A_ij = B_ij / r_i with B = softplus(S) + I, r_i = sum_j B_ij
  //   dB_ij = (dA_ij - sum_k dA_ik A_ik) / r_i,   dS_ij = dB_ij * sigmoid(S_ij)
  const Matrix& s = cache.raw_adjacency;
  Matrix b = s.unaryExpr([](double x) { return softplus(x); });
  b.diagonal().array() += 1.0;
  const Vector r = b.rowwise().sum();
  const Vector row_dot = d_a.cwiseProduct(a).rowwise().sum();
  g.adjacency.resize(cfg.n_nodes, cfg.n_nodes);
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
      g.adjacency(i, j) = (d_a(i, j) - row_dot(i)) / r(i) * sigmoid(s(i, j));
    }
  }
  return g;
}

}  // namespace qgraphino::graph
