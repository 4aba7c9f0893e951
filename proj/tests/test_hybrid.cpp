#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "oracles.hpp"
#include "qgraphino/gradcheck.hpp"
#include "qgraphino/hybrid.hpp"

using namespace qgraphino;
using namespace qgraphino::hybrid;

namespace {

HybridConfig small_config(qsim::AnsatzKind kind = qsim::AnsatzKind::Strongly, int nodes = 4, int qubits = 2, int layers = 1) {
  HybridConfig cfg;
  cfg.graph = {nodes, {3, 5, 4}, graph::Activation::Tanh};
  switch (kind) {
    case qsim::AnsatzKind::Basic: cfg.ansatz = qsim::AnsatzSpec::basic(layers, qubits); break;
    case qsim::AnsatzKind::Strongly: cfg.ansatz = qsim::AnsatzSpec::strongly(layers, qubits); break;
    case qsim::AnsatzKind::Random: cfg.ansatz = qsim::AnsatzSpec::random(layers, qubits, 99); break;
  }
  return cfg;
}

Matrix random_features(int n, int d, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix z(n, d);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.uniform(-1, 1);
  return z;
}

std::filesystem::path temp_dir(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("qgraphino_hybrid_" + tag);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(HybridForward, ZeroReadoutGivesBias) {
  auto m = init_model(small_config(), 3);
  m.params.readout.setZero();
  m.params.readout_bias = 0.37;
  EXPECT_EQ(forward(m, random_features(4, 3, 1)), 0.37);
}

TEST(HybridForward, ZeroAnglesOnFirstBasisState) {
  auto m = init_model(small_config(), 3);
  std::fill(m.params.ansatz.begin(), m.params.ansatz.end(), 0.0);
  m.params.projection.setZero();
  m.params.projection_bias.setZero();
  m.params.projection_bias(0) = 2.0;
  m.params.readout << 0.25, -0.75;
  m.params.readout_bias = 0.1;
  EXPECT_NEAR(forward(m, random_features(4, 3, 2)), 0.25 - 0.75 + 0.1, 1e-15);
}

TEST(HybridForward, MatchesDenseComposition) {
  for (auto kind : {qsim::AnsatzKind::Basic, qsim::AnsatzKind::Strongly, qsim::AnsatzKind::Random}) {
    auto cfg = small_config(kind, 5, 3, 2);
    auto m = init_model(cfg, 11);
    SplitMix64 rng(5);
    for (Eigen::Index i = 0; i < m.params.graph.adjacency.size(); ++i) m.params.graph.adjacency(i) = rng.uniform(-1, 1);
    m.params.readout_bias = -0.2;
    const Matrix z = random_features(5, 3, 3);

    // graph by hand
    const int n = 5;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i) {
      double r = 0;
      for (int j = 0; j < n; ++j) r += a(i, j) = std::log1p(std::exp(m.params.graph.adjacency(i, j))) + (i == j);
      a.row(i) /= r;
    }
    Matrix h = z;
    for (const auto& w : m.params.graph.weights) h = oracle::naive_matmul(oracle::naive_matmul(a, h), w).array().tanh().matrix();
    std::vector<double> v(static_cast<std::size_t>(h.cols()), 0.0);
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(j)] += h(i, j) / n;

    std::vector<double> u(cfg.encoder_width());
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] = m.params.projection_bias(static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < v.size(); ++j) u[k] += m.params.projection(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * v[j];
    }
    const auto amp = oracle::normalize_and_pad(u, u.size());
    oracle::CVector psi(static_cast<Eigen::Index>(amp.size()));
    for (std::size_t k = 0; k < amp.size(); ++k) psi(static_cast<Eigen::Index>(k)) = amp[k];
    psi = oracle::circuit_unitary(qsim::build_sequence(cfg.ansatz), m.params.ansatz) * psi;
    double y = m.params.readout_bias;
    for (int q = 0; q < 3; ++q) y += m.params.readout(q) * oracle::expect_z_dense(psi, q, 3);

    EXPECT_NEAR(forward(m, z), y, 1e-12) << qsim::to_string(kind);
  }
}

TEST(HybridForward, ShapeMismatchOnWrongFeatures) {
  const auto m = init_model(small_config(), 1);
  EXPECT_THROW(forward(m, random_features(3, 3, 1)), Error);
  EXPECT_THROW(forward(m, random_features(4, 2, 1)), Error);
}

TEST(HybridForward, EncoderScaleInvariance) {
  auto m = init_model(small_config(qsim::AnsatzKind::Strongly, 4, 3, 2), 21);
  const Matrix z = random_features(4, 3, 8);
  const double y0 = forward(m, z);
  for (double c : {0.01, 3.0, 250.0}) {
    auto scaled = m;
    scaled.params.projection *= c;
    scaled.params.projection_bias *= c;
    EXPECT_NEAR(forward(scaled, z), y0, 1e-12);
  }
  ForwardCache cache;
  forward(m, z, &cache);
  const std::vector<double> w(m.params.readout.data(), m.params.readout.data() + m.params.readout.size());
  const auto du = qsim::input_grad(cache.circuit, m.params.ansatz, cache.encoder_input, w);
  double dot = 0;
  for (std::size_t k = 0; k < du.size(); ++k) dot += du[k] * cache.encoder_input[k];
  EXPECT_LT(std::abs(dot), 1e-8);
}

TEST(HybridForward, Deterministic) {
  const auto a = init_model(small_config(), 4);
  const auto b = init_model(small_config(), 4);
  EXPECT_EQ(a.params, b.params);
  const Matrix z = random_features(4, 3, 9);
  EXPECT_EQ(forward(a, z), forward(b, z));
  EXPECT_NE(init_model(small_config(), 5).params, a.params);
}

TEST(MseLoss, Examples) {
  EXPECT_EQ(mse_loss(1.0, 1.0), 0.0);
  EXPECT_EQ(mse_loss(3.0, 1.0), 4.0);
  const std::vector<double> p{1, 2, 3}, t{1, 2, 5};
  EXPECT_DOUBLE_EQ(mse_loss(p, t), 4.0 / 3.0);
  EXPECT_THROW(mse_loss(std::span<const double>(p), std::span<const double>(t).first(2)), Error);
}

TEST(HybridBackward, ZeroWhenPredictionHitsTarget) {
  const auto m = init_model(small_config(), 6);
  const Matrix z = random_features(4, 3, 1);
  ForwardCache cache;
  const double y = forward(m, z, &cache);
  const auto g = backward(m, cache, y);
  for (auto b : blocks(g))
    for (double v : b) EXPECT_EQ(v, 0.0);
}

TEST(HybridBackward, MatchesFiniteDifferences) {
  for (auto kind : {qsim::AnsatzKind::Basic, qsim::AnsatzKind::Strongly, qsim::AnsatzKind::Random}) {
    auto m = init_model(small_config(kind, 4, 2, 1), 13);
    SplitMix64 rng(2);
    for (Eigen::Index i = 0; i < m.params.graph.adjacency.size(); ++i) m.params.graph.adjacency(i) = rng.uniform(-1, 1);
    m.params.readout_bias = 0.3;
    const Matrix z = random_features(4, 3, 4);
    ForwardCache cache;
    forward(m, z, &cache);
    const auto g = backward(m, cache, 0.8);
    const auto analytic = blocks(g);

    auto probe = m;
    auto p_blocks = blocks(probe.params);
    const auto names = block_names(m.config);
    for (std::size_t b = 0; b < p_blocks.size(); ++b) {
      std::vector<double> fd = oracle::central_difference(
          [&](const std::vector<double>& x) {
            std::copy(x.begin(), x.end(), p_blocks[b].begin());
            const double d = forward(probe, z) - 0.8;
            return d * d;
          },
          std::vector<double>(p_blocks[b].begin(), p_blocks[b].end()), 1e-5);
      std::copy(blocks(m.params)[b].begin(), blocks(m.params)[b].end(), p_blocks[b].begin());
      double scale = 0, err = 0;
      for (std::size_t i = 0; i < fd.size(); ++i) {
        scale = std::max(scale, std::abs(fd[i]));
        err = std::max(err, std::abs(fd[i] - analytic[b][i]));
      }
      EXPECT_LT(scale > 0 ? err / scale : err, 1e-4) << qsim::to_string(kind) << " " << names[b];
    }
  }
}

TEST(HybridBackward, AnsatzGradientLinearInReadout) {
  auto m = init_model(small_config(qsim::AnsatzKind::Strongly, 4, 3, 2), 17);
  const Matrix z = random_features(4, 3, 5);
  ForwardCache c1;
  forward(m, z, &c1);
  const std::vector<double> w(m.params.readout.data(), m.params.readout.data() + m.params.readout.size());
  std::vector<double> w2 = w;
  for (double& x : w2) x *= 2;
  const auto seq = c1.circuit;
  const auto input = qsim::amplitude_encode(c1.encoder_input, 3);
  const auto g1 = qsim::param_shift_grad(seq, m.params.ansatz, input, w);
  const auto g2 = qsim::param_shift_grad(seq, m.params.ansatz, input, w2);
  for (std::size_t k = 0; k < g1.size(); ++k) EXPECT_NEAR(g2[k], 2 * g1[k], 1e-14);
}

TEST(HybridBackward, MissingCache) {
  const auto m = init_model(small_config(), 1);
  try {
    backward(m, ForwardCache{}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingCache);
  }
}

TEST(HybridGradcheck, LibraryCheckAgreesOnDefaultShape) {
  HybridConfig cfg;
  cfg.graph = {6, {3, 8, 4}, graph::Activation::Tanh};
  cfg.ansatz = qsim::AnsatzSpec::strongly(2, 3);
  auto m = init_model(cfg, 2);
  m.params.readout_bias = 0.1;
  for (const auto& e : gradcheck::hybrid_errors(m, random_features(6, 3, 3), -0.4)) EXPECT_LT(e.error, 1e-4) << e.name;
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto dir = temp_dir("roundtrip");
  for (auto kind : {qsim::AnsatzKind::Basic, qsim::AnsatzKind::Strongly, qsim::AnsatzKind::Random}) {
    auto m = init_model(small_config(kind, 4, 3, 2), 8);
    m.params.readout_bias = -1.0 / 3.0;
    const auto path = dir / "model.hqgm";
    save_checkpoint(m, path);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.params, m.params);
    const Matrix z = random_features(4, 3, 6);
    EXPECT_EQ(forward(back, z), forward(m, z));
    EXPECT_EQ(qsim::build_sequence(back.config.ansatz).gates, qsim::build_sequence(m.config.ansatz).gates);
  }
}

TEST(Checkpoint, BadMagic) {
  const auto dir = temp_dir("magic");
  const auto path = dir / "model.hqgm";
  save_checkpoint(init_model(small_config(), 1), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
}

TEST(Checkpoint, TruncatedAndMissing) {
  const auto dir = temp_dir("trunc");
  const auto path = dir / "model.hqgm";
  save_checkpoint(init_model(small_config(), 1), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 5);
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedFile);
  }
  try {
    load_checkpoint(dir / "nope.hqgm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Checkpoint, BlockLayout) {
  const auto cfg = small_config(qsim::AnsatzKind::Strongly, 4, 2, 1);
  const auto names = block_names(cfg);
  const std::vector<std::string> expected{"adjacency", "gcn_weight_1", "gcn_weight_2", "projection",
                                          "projection_bias", "ansatz", "readout", "readout_bias"};
  EXPECT_EQ(names, expected);
  const auto shapes = block_shapes(cfg);
  const auto m = init_model(cfg, 1);
  const auto bs = blocks(m.params);
  ASSERT_EQ(shapes.size(), bs.size());
  for (std::size_t i = 0; i < bs.size(); ++i) EXPECT_EQ(static_cast<std::int64_t>(bs[i].size()), shapes[i][0] * shapes[i][1]);
  EXPECT_EQ(bs[5].size(), 6U);
}
