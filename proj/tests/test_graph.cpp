#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "qgraphino/graph.hpp"

using namespace qgraphino;
using namespace qgraphino::graph;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, SplitMix64& rng, double lo = -1, double hi = 1) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.uniform(lo, hi);
  return m;
}

double block_rel_error(const Matrix& analytic, const Matrix& fd) {
  const double scale = fd.cwiseAbs().maxCoeff();
  const double err = (analytic - fd).cwiseAbs().maxCoeff();
  return scale > 0 ? err / scale : err;
}

}  // namespace

TEST(NormalizeAdjacency, SingleNode) {
  for (double s : {-50.0, 0.0, 3.0}) {
    Matrix raw(1, 1);
    raw << s;
    EXPECT_EQ(normalize_adjacency(raw)(0, 0), 1.0);
  }
}

TEST(NormalizeAdjacency, VeryNegativeApproachesIdentity) {
  const Matrix a = normalize_adjacency(Matrix::Constant(4, 4, -1e3));
  EXPECT_LT((a - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix b = normalize_adjacency(Matrix::Constant(4, 4, -20.0));
  EXPECT_LT((b - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(NormalizeAdjacency, RowStochasticAndPositive) {
  SplitMix64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const Matrix raw = random_matrix(n, n, rng, -30, 30);
    const Matrix a = normalize_adjacency(raw);
    for (int i = 0; i < n; ++i) {
      double row = 0;
      for (int j = 0; j < n; ++j) {
        EXPECT_GT(a(i, j), 0.0);
        row += a(i, j);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(NormalizeAdjacency, MatchesDefinition) {
  SplitMix64 rng(2);
  const Matrix raw = random_matrix(4, 4, rng, -3, 3);
  const Matrix a = normalize_adjacency(raw);
  for (int i = 0; i < 4; ++i) {
    std::vector<double> b(4);
    for (int j = 0; j < 4; ++j) b[j] = std::log(1 + std::exp(raw(i, j))) + (i == j ? 1.0 : 0.0);
    const double r = std::accumulate(b.begin(), b.end(), 0.0);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(a(i, j), b[j] / r, 1e-15);
  }
}

TEST(GcnForward, IdentityPassThrough) {
  SplitMix64 rng(3);
  const Matrix z = random_matrix(5, 3, rng);
  EXPECT_EQ(gcn_forward(z, Matrix::Identity(5, 5), Matrix::Identity(3, 3), Activation::Identity), z);
}

TEST(GcnForward, ReluOfNegativeIsZero) {
  const Matrix z = Matrix::Constant(3, 2, 1.0);
  const Matrix w = Matrix::Constant(2, 4, -0.5);
  const Matrix a = normalize_adjacency(Matrix::Zero(3, 3));
  EXPECT_EQ(gcn_forward(z, a, w, Activation::ReLU), Matrix::Zero(3, 4));
}

TEST(GcnForward, MatchesNaiveLoops) {
  SplitMix64 rng(4);
  for (auto act : {Activation::ReLU, Activation::Tanh, Activation::Identity}) {
    const Matrix z = random_matrix(6, 4, rng);
    const Matrix a = normalize_adjacency(random_matrix(6, 6, rng));
    const Matrix w = random_matrix(4, 3, rng);
    const Matrix h = oracle::naive_matmul(oracle::naive_matmul(a, z), w);
    const Matrix out = gcn_forward(z, a, w, act);
    for (Eigen::Index i = 0; i < h.size(); ++i) {
      const double ref = act == Activation::ReLU ? std::max(0.0, h(i)) : act == Activation::Tanh ? std::tanh(h(i)) : h(i);
      EXPECT_NEAR(out(i), ref, 1e-12);
    }
  }
}

TEST(GcnForward, ShapeMismatch) {
  try {
    gcn_forward(Matrix::Zero(3, 2), Matrix::Identity(4, 4), Matrix::Zero(2, 2), Activation::ReLU);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(GcnForward, PermutationEquivariance) {
  SplitMix64 rng(5);
  const int n = 6;
  const Matrix z = random_matrix(n, 3, rng);
  const Matrix a = normalize_adjacency(random_matrix(n, n, rng));
  const Matrix w = random_matrix(3, 4, rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
  perm.indices() << 3, 0, 5, 1, 4, 2;
  const Matrix lhs = gcn_forward(perm * z, perm * a * perm.transpose(), w, Activation::Tanh);
  const Matrix rhs = perm * gcn_forward(z, a, w, Activation::Tanh);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Aggregate, Examples) {
  Matrix one(1, 3);
  one << 1.5, -2, 7;
  EXPECT_EQ(aggregate(one), one.row(0).transpose());

  Matrix sym(2, 3);
  sym << 1, -4, 2.5, -1, 4, -2.5;
  EXPECT_EQ(aggregate(sym), Vector::Zero(3));

  SplitMix64 rng(6);
  const Matrix z = random_matrix(7, 4, rng);
  const Vector v = aggregate(z);
  for (int j = 0; j < 4; ++j) {
    double s = 0;
    for (int i = 0; i < 7; ++i) s += z(i, j);
    EXPECT_NEAR(v(j), s / 7, 1e-15);
  }
}

TEST(Forward, IdentityNetworkGivesColumnMeans) {
  SplitMix64 rng(7);
  const GraphConfig cfg{5, {3, 3, 3}, Activation::Identity};
  GraphParams p{Matrix::Constant(5, 5, -1e4), {Matrix::Identity(3, 3), Matrix::Identity(3, 3)}};
  ASSERT_EQ(normalize_adjacency(p.adjacency), Matrix::Identity(5, 5));
  const Matrix z = random_matrix(5, 3, rng);
  EXPECT_EQ(forward(cfg, p, z), aggregate(z));
}

TEST(Backward, SingleIdentityLayerClosedForm) {
  SplitMix64 rng(8);
  const int n = 4;
  const GraphConfig cfg{n, {3, 2}, Activation::Identity};
  SplitMix64 init(1);
  GraphParams p = init_params(cfg, init);
  p.adjacency = random_matrix(n, n, rng);
  const Matrix z = random_matrix(n, 3, rng);
  ForwardCache cache;
  forward(cfg, p, z, &cache);
  for (int j = 0; j < 2; ++j) {
    Vector up = Vector::Zero(2);
    up(j) = 1.0;
    const auto g = graph_backward(cfg, p, cache, up);
    // v_j = (1/N) 1^T A Z W e_j  =>  dW = (A Z)^T 1 e_j^T / N
    const Matrix az = oracle::naive_matmul(normalize_adjacency(p.adjacency), z);
    Matrix expected = Matrix::Zero(3, 2);
    for (int k = 0; k < 3; ++k) expected(k, j) = az.col(k).sum() / n;
    EXPECT_LT((g.weights[0] - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Backward, MatchesFiniteDifferences) {
  SplitMix64 rng(9);
  for (auto act : {Activation::Tanh, Activation::Identity, Activation::ReLU}) {
    const GraphConfig cfg{5, {3, 4, 2}, act};
    SplitMix64 init(10);
    GraphParams p = init_params(cfg, init);
    p.adjacency = random_matrix(5, 5, rng, -2, 2);
    const Matrix z = random_matrix(5, 3, rng);
    const Vector up = random_matrix(2, 1, rng);

    ForwardCache cache;
    forward(cfg, p, z, &cache);
    const auto g = graph_backward(cfg, p, cache, up);

    const auto objective = [&](const GraphParams& q, const Matrix& zz) { return up.dot(forward(cfg, q, zz)); };
    constexpr double eps = 1e-5;
    const auto fd_of = [&](Matrix& target, const std::function<double()>& f) {
      Matrix out(target.rows(), target.cols());
      for (Eigen::Index i = 0; i < target.size(); ++i) {
        const double orig = target(i);
        target(i) = orig + eps;
        const double fp = f();
        target(i) = orig - eps;
        const double fm = f();
        target(i) = orig;
        out(i) = (fp - fm) / (2 * eps);
      }
      return out;
    };
    GraphParams q = p;
    Matrix zz = z;
    const auto f = [&] { return objective(q, zz); };
    EXPECT_LT(block_rel_error(g.adjacency, fd_of(q.adjacency, f)), 1e-6) << to_string(act);
    for (std::size_t l = 0; l < q.weights.size(); ++l) {
      EXPECT_LT(block_rel_error(g.weights[l], fd_of(q.weights[l], f)), 1e-6) << to_string(act) << " layer " << l;
    }
    EXPECT_LT(block_rel_error(g.features, fd_of(zz, f)), 1e-6) << to_string(act);
  }
}

TEST(Backward, GradientFidelityProperty) {
  // random networks up to 8 nodes and 3 layers, smooth activation
  SplitMix64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const int layers = 1 + static_cast<int>(rng.below(3));
    GraphConfig cfg{n, {static_cast<int>(1 + rng.below(4))}, Activation::Tanh};
    for (int l = 0; l < layers; ++l) cfg.layer_dims.push_back(static_cast<int>(1 + rng.below(4)));
    SplitMix64 init(rng.next());
    GraphParams p = init_params(cfg, init);
    p.adjacency = random_matrix(n, n, rng, -2, 2);
    const Matrix z = random_matrix(n, cfg.input_dim(), rng);
    const Vector up = random_matrix(cfg.output_dim(), 1, rng);
    ForwardCache cache;
    forward(cfg, p, z, &cache);
    const auto g = graph_backward(cfg, p, cache, up);

    GraphParams q = p;
    Matrix fd(n, n);
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double orig = q.adjacency(i);
      q.adjacency(i) = orig + 1e-5;
      const double fp = up.dot(forward(cfg, q, z));
      q.adjacency(i) = orig - 1e-5;
      const double fm = up.dot(forward(cfg, q, z));
      q.adjacency(i) = orig;
      fd(i) = (fp - fm) / 2e-5;
    }
    // single-node graphs have a constant A, so dS is identically zero
    if (n == 1) EXPECT_NEAR(g.adjacency(0, 0), 0.0, 1e-15);
    else EXPECT_LT(block_rel_error(g.adjacency, fd), 1e-6);
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const GraphConfig cfg{4, {3, 5, 2}, Activation::ReLU};
  SplitMix64 init(3), rng(4);
  const GraphParams p = init_params(cfg, init);
  ForwardCache cache;
  forward(cfg, p, random_matrix(4, 3, rng), &cache);
  const auto g = graph_backward(cfg, p, cache, Vector::Zero(2));
  EXPECT_EQ(g.adjacency, Matrix::Zero(4, 4));
  for (const auto& w : g.weights) EXPECT_EQ(w, Matrix::Zero(w.rows(), w.cols()));
  EXPECT_EQ(g.features, Matrix::Zero(4, 3));
}

TEST(Backward, MissingCache) {
  const GraphConfig cfg{2, {1, 1}, Activation::ReLU};
  SplitMix64 init(1);
  const GraphParams p = init_params(cfg, init);
  try {
    graph_backward(cfg, p, ForwardCache{}, Vector::Zero(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingCache);
  }
}

TEST(Init, GlorotBoundsAndZeroAdjacency) {
  const GraphConfig cfg{6, {3, 32, 16}, Activation::ReLU};
  SplitMix64 rng(1);
  const auto p = init_params(cfg, rng);
  EXPECT_EQ(p.adjacency, Matrix::Zero(6, 6));
  ASSERT_EQ(p.weights.size(), 2U);
  EXPECT_LE(p.weights[0].cwiseAbs().maxCoeff(), std::sqrt(6.0 / 35));
  EXPECT_LE(p.weights[1].cwiseAbs().maxCoeff(), std::sqrt(6.0 / 48));
}
