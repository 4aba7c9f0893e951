#pragma once

// Mini-batch training of the hybrid model with Adam.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "qgraphino/data.hpp"
#include "qgraphino/error.hpp"
#include "qgraphino/hybrid.hpp"
#include "qgraphino/rng.hpp"

namespace qgraphino::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int threads = 1;  // sample-gradient workers; results do not depend on this
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    detail::fail(ErrorCode::InvalidArgument, "learning_rate must be finite and >= 0");
  }
  if (c.epochs < 1) detail::fail(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (c.batch_size < 1) detail::fail(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (c.threads < 1) detail::fail(ErrorCode::InvalidArgument, "threads must be >= 1");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0) || !(c.eps > 0.0)) {
    detail::fail(ErrorCode::InvalidArgument, "adam constants out of range");
  }
}

struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;
};

/// One bias-corrected Adam update over parallel parameter/gradient blocks. Moment
/// buffers are allocated on first use.
inline void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                      OptimizerState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) detail::fail(ErrorCode::ShapeMismatch, "parameter and gradient block counts differ");
  if (state.m.empty()) {
    for (auto p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) detail::fail(ErrorCode::ShapeMismatch, "optimizer state has wrong block count");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || state.m[b].size() != params[b].size()) {
      detail::fail(ErrorCode::ShapeMismatch, "parameter block " + std::to_string(b) + " shape mismatch");
    }
  }
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      params[b][i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

struct SampleResult {
  double loss = 0.0;
  hybrid::HybridParams grads;
};

inline SampleResult sample_gradient(const hybrid::HybridModel& model, const data::Dataset& ds, std::size_t index) {
  const auto& s = ds.samples[index];
  hybrid::ForwardCache cache;
  const double y = hybrid::forward(model, data::feature_matrix(s, ds.manifest), &cache);
  return {hybrid::mse_loss(y, s.target_oni), hybrid::backward(model, cache, s.target_oni)};
}

struct FitResult {
  std::vector<double> epoch_loss;     // mean per-sample MSE seen during each epoch
  std::vector<double> epoch_seconds;  // cumulative wall time at the end of each epoch
};

struct FitHooks {
  std::function<void(int epoch, double train_mse, double wall_seconds)> on_epoch;
  std::optional<std::filesystem::path> checkpoint;  // written after the final epoch
};

/// Shuffle seed derived from TrainConfig::seed so it never aliases model initialization.
inline std::uint64_t shuffle_seed(std::uint64_t seed) noexcept { return seed ^ 0x5DEECE66DULL; }

/// Per epoch: shuffle sample indices (Fisher-Yates, SplitMix64), walk consecutive batches,
/// average the per-sample gradients in batch order and take one Adam step per batch.
/// Sample gradients may be computed on `threads` workers; the reduction order is fixed.
inline FitResult fit(hybrid::HybridModel& model, const data::Dataset& ds, const TrainConfig& cfg, const FitHooks& hooks = {}) {
  validate(cfg);
  if (ds.empty()) detail::fail(ErrorCode::EmptyDataset, "cannot fit on an empty dataset");
  if (ds.manifest.n_nodes != model.config.graph.n_nodes || ds.manifest.d0 != model.config.graph.input_dim()) {
    detail::fail(ErrorCode::ShapeMismatch, "dataset shape does not match the model");
  }
  hybrid::check_shapes(model);

  SplitMix64 rng(shuffle_seed(cfg.seed));
  OptimizerState opt;
  std::vector<std::size_t> order(ds.size());
  FitResult result;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t n = end - start;
      std::vector<SampleResult> results(n);
      const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n);
      std::vector<std::exception_ptr> failures(n_workers);
      const auto work = [&](std::size_t worker) {
        try {
          for (std::size_t k = worker; k < n; k += n_workers) results[k] = sample_gradient(model, ds, order[start + k]);
        } catch (...) {
          failures[worker] = std::current_exception();
        }
      };
      if (n_workers <= 1) {
        work(0);
      } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
      }
      for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
      }

      hybrid::HybridParams total = hybrid::zeros_like(model.config);
      auto acc = hybrid::blocks(total);
      for (auto& r : results) {
        if (!std::isfinite(r.loss)) detail::fail(ErrorCode::NonFinite, "non-finite training loss");
        epoch_loss += r.loss;
        const auto g = hybrid::blocks(std::as_const(r.grads));
        for (std::size_t b = 0; b < acc.size(); ++b)
          for (std::size_t i = 0; i < acc[b].size(); ++i) acc[b][i] += g[b][i];
      }
      for (auto blk : acc)
        for (double& x : blk) x /= static_cast<double>(n);

      const auto params = hybrid::blocks(model.params);
      const auto grads = hybrid::blocks(std::as_const(total));
      adam_step(params, grads, opt, cfg);
    }

    epoch_loss /= static_cast<double>(ds.size());
    if (!std::isfinite(epoch_loss)) detail::fail(ErrorCode::NonFinite, "non-finite epoch loss");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epoch_loss.push_back(epoch_loss);
    result.epoch_seconds.push_back(secs);
    if (hooks.on_epoch) hooks.on_epoch(epoch, epoch_loss, secs);
  }
  if (hooks.checkpoint) hybrid::save_checkpoint(model, *hooks.checkpoint);
  return result;
}

/// Forward pass over every sample, in dataset order.
inline std::vector<double> predict(const hybrid::HybridModel& model, const data::Dataset& ds) {
  if (ds.manifest.n_nodes != model.config.graph.n_nodes || ds.manifest.d0 != model.config.graph.input_dim()) {
    detail::fail(ErrorCode::ShapeMismatch, "dataset shape does not match the model");
  }
  std::vector<double> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(hybrid::forward(model, data::feature_matrix(s, ds.manifest)));
  return out;
}

}  // namespace qgraphino::train
