#pragma once

// Finite-difference checks of every analytic gradient path. Only forward
// evaluations are used on the reference side.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qgraphino/hybrid.hpp"
#include "qgraphino/qsim.hpp"

namespace qgraphino::gradcheck {

/// Central difference of f at x for every coordinate.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> x, double eps) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + eps;
    const double fp = f(probe);
    probe[k] = orig - eps;
    const double fm = f(probe);
    probe[k] = orig;
    g[k] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

inline double max_abs_error(std::span<const double> a, std::span<const double> b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

/// max_i |a_i - b_i| / max_i |b_i|: error relative to the reference block's scale.
/// An all-zero reference block reports the absolute error instead.
inline double max_rel_error(std::span<const double> analytic, std::span<const double> reference) {
  double scale = 0.0;
  for (double v : reference) scale = std::max(scale, std::abs(v));
  const double err = max_abs_error(analytic, reference);
  return scale > 0.0 ? err / scale : err;
}

struct PathError {
  std::string name;
  double error;  // relative for model blocks, absolute for the circuit paths
};

/// Parameter-shift gradients of every <Z_q> against central differences.
inline double param_shift_error(const qsim::AnsatzSpec& spec, std::span<const double> params,
                                const qsim::Statevector& input, double eps = 1e-4) {
  const auto seq = qsim::build_sequence(spec);
  double worst = 0.0;
  for (int q = 0; q < spec.n_qubits; ++q) {
    std::vector<double> w(static_cast<std::size_t>(spec.n_qubits), 0.0);
    w[static_cast<std::size_t>(q)] = 1.0;
    const auto analytic = qsim::param_shift_grad(seq, params, input, w);
    const auto fd = central_difference(
        [&](std::span<const double> p) {
          qsim::Statevector s = input;
          qsim::run_sequence(s, seq, p);
          return qsim::expect_z(s, q);
        },
        params, eps);
    worst = std::max(worst, max_abs_error(analytic, fd));
  }
  return worst;
}

/// Encoder-input gradients of every <Z_q> against central differences.
inline double input_grad_error(const qsim::AnsatzSpec& spec, std::span<const double> params, std::span<const double> x,
                               double eps = 1e-4) {
  double worst = 0.0;
  for (int q = 0; q < spec.n_qubits; ++q) {
    const auto analytic = qsim::input_grad(spec, params, x, spec.n_qubits, q);
    const auto fd = central_difference(
        [&](std::span<const double> xi) {
          qsim::Statevector s = qsim::amplitude_encode(xi, spec.n_qubits);
          qsim::run_ansatz(s, spec, params);
          return qsim::expect_z(s, q);
        },
        x, eps);
    worst = std::max(worst, max_abs_error(analytic, fd));
  }
  return worst;
}

/// Per-block relative error of hybrid::backward against central differences of the
/// squared-error loss.
inline std::vector<PathError> hybrid_errors(const hybrid::HybridModel& model, const graph::Matrix& features,
                                            double target, double eps = 1e-4) {
  hybrid::ForwardCache cache;
  hybrid::forward(model, features, &cache);
  const hybrid::HybridParams analytic = hybrid::backward(model, cache, target);
  const auto a_blocks = hybrid::blocks(analytic);
  const auto names = hybrid::block_names(model.config);

  hybrid::HybridModel probe = model;
  auto p_blocks = hybrid::blocks(probe.params);
  std::vector<PathError> out;
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    std::vector<double> fd(p_blocks[b].size());
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double orig = p_blocks[b][i];
      p_blocks[b][i] = orig + eps;
      const double lp = hybrid::mse_loss(hybrid::forward(probe, features), target);
      p_blocks[b][i] = orig - eps;
      const double lm = hybrid::mse_loss(hybrid::forward(probe, features), target);
      p_blocks[b][i] = orig;
      fd[i] = (lp - lm) / (2.0 * eps);
    }
    out.push_back({names[b], max_rel_error(a_blocks[b], fd)});
  }
  return out;
}

}  // namespace qgraphino::gradcheck
