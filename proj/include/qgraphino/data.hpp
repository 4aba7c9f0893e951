#pragma once

// Datasets: the native HQGD container, the Niño3.4-based ONI, a seeded ENSO-like
// generator for desk-scale runs, and year-based splitting.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qgraphino/binary_io.hpp"
#include "qgraphino/error.hpp"
#include "qgraphino/rng.hpp"

namespace qgraphino::data {

/// Regular lat/lon grid. Nodes are ordered lat-major: south to north, and within a
/// latitude band west to east starting at lon_min. Node (i, j) has index i * n_lon() + j.
struct GridSpec {
  double lat_min = -55.0;
  double lat_max = 60.0;
  double lon_min = 0.0;
  double lon_max = 360.0;
  double resolution = 5.0;

  int n_lat() const { return static_cast<int>(std::lround((lat_max - lat_min) / resolution)); }
  int n_lon() const { return static_cast<int>(std::lround((lon_max - lon_min) / resolution)); }
  int node_count() const { return n_lat() * n_lon(); }
  double lat_center(int i) const { return lat_min + resolution * (i + 0.5); }
  double lon_center(int j) const { return lon_min + resolution * (j + 0.5); }
  int node_index(int i, int j) const { return i * n_lon() + j; }

  bool operator==(const GridSpec&) const = default;
};

/// Niño3.4 box: 5S-5N, 170W-120W (190E-240E).
struct Nino34Box {
  static constexpr double kLatMin = -5.0, kLatMax = 5.0;
  static constexpr double kLonMin = 190.0, kLonMax = 240.0;
};

/// Node indices whose cell centres fall inside the Niño3.4 box (inclusive bounds).
inline std::vector<int> nino34_nodes(const GridSpec& grid) {
  std::vector<int> nodes;
  for (int i = 0; i < grid.n_lat(); ++i) {
    const double lat = grid.lat_center(i);
    if (lat < Nino34Box::kLatMin || lat > Nino34Box::kLatMax) continue;
    for (int j = 0; j < grid.n_lon(); ++j) {
      const double lon = std::fmod(grid.lon_center(j) + 360.0, 360.0);
      if (lon >= Nino34Box::kLonMin && lon <= Nino34Box::kLonMax) nodes.push_back(grid.node_index(i, j));
    }
  }
  return nodes;
}

/// ONI from monthly anomaly fields (each of length grid.node_count()): box mean,
/// then a centred 3-month running mean whose two endpoints use the available 2 months.
inline std::vector<double> compute_oni(const std::vector<std::vector<double>>& monthly_anomaly, const GridSpec& grid) {
  if (monthly_anomaly.size() < 3) detail::fail(ErrorCode::InvalidArgument, "ONI needs at least 3 months");
  const auto nodes = nino34_nodes(grid);
  if (nodes.empty()) detail::fail(ErrorCode::RegionNotCovered, "grid does not cover the Nino3.4 box");
  const std::size_t n_nodes = static_cast<std::size_t>(grid.node_count());

  std::vector<double> box(monthly_anomaly.size());
  for (std::size_t t = 0; t < monthly_anomaly.size(); ++t) {
    if (monthly_anomaly[t].size() != n_nodes) detail::fail(ErrorCode::ShapeMismatch, "field size != grid node count");
    double s = 0.0;
    for (int k : nodes) s += monthly_anomaly[t][static_cast<std::size_t>(k)];
    box[t] = s / static_cast<double>(nodes.size());
  }

  const std::size_t n = box.size();
  std::vector<double> oni(n);
  oni[0] = (box[0] + box[1]) / 2.0;
  for (std::size_t t = 1; t + 1 < n; ++t) oni[t] = (box[t - 1] + box[t] + box[t + 1]) / 3.0;
  oni[n - 1] = (box[n - 2] + box[n - 1]) / 2.0;
  return oni;
}

// ---------------------------------------------------------------------------
// Samples and datasets

struct Sample {
  std::vector<float> features;  // n_nodes x d0, row-major (node-major)
  double target_oni = 0.0;
  int lead_h = 0;
  int target_month = 1;  // 1..12
  int year = 0;

  bool operator==(const Sample&) const = default;
};

struct Manifest {
  int n_nodes = 0;
  int d0 = 0;
  int lead_h = 0;
  std::string source = "synthetic";
  GridSpec grid;

  bool operator==(const Manifest&) const = default;
};

struct Dataset {
  Manifest manifest;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  bool operator==(const Dataset&) const = default;
};

/// N x d0 feature matrix of a sample, widened to double.
inline Eigen::MatrixXd feature_matrix(const Sample& s, const Manifest& m) {
  Eigen::MatrixXd z(m.n_nodes, m.d0);
  for (int i = 0; i < m.n_nodes; ++i)
    for (int j = 0; j < m.d0; ++j) z(i, j) = static_cast<double>(s.features[static_cast<std::size_t>(i * m.d0 + j)]);
  return z;
}

inline void validate(const Dataset& ds) {
  const auto& m = ds.manifest;
  if (m.n_nodes < 1 || m.d0 < 1) detail::fail(ErrorCode::ShapeInconsistent, "manifest needs n_nodes >= 1 and d0 >= 1");
  const auto width = static_cast<std::size_t>(m.n_nodes) * static_cast<std::size_t>(m.d0);
  for (const auto& s : ds.samples) {
    if (s.features.size() != width) detail::fail(ErrorCode::ShapeInconsistent, "sample feature block has wrong size");
    if (s.target_month < 1 || s.target_month > 12) detail::fail(ErrorCode::ShapeInconsistent, "target_month outside 1..12");
    for (float f : s.features) {
      if (!std::isfinite(f)) detail::fail(ErrorCode::NonFinite, "non-finite feature value");
    }
    if (!std::isfinite(s.target_oni)) detail::fail(ErrorCode::NonFinite, "non-finite target");
  }
}

// HQGD layout (all integers and floats little-endian):
//
//   bytes 0..3   "HQGD"
//   u32          format version (1)
//   u32          manifest byte length L, then L bytes of UTF-8 JSON
//   n_samples records, each:
//     float32[n_nodes * d0]   features, node-major
//     float64                 target_oni
//     i32 lead_h, i32 target_month, i32 year
//
// The manifest JSON carries n_samples, n_nodes, d0, lead_h, source, grid and
// node_order = "lat-major"; see docs/formats.md.

inline constexpr std::uint32_t kDatasetVersion = 1;

inline nlohmann::json manifest_to_json(const Manifest& m, std::size_t n_samples) {
  return {{"format", "HQGD"},
          {"version", kDatasetVersion},
          {"n_samples", n_samples},
          {"n_nodes", m.n_nodes},
          {"d0", m.d0},
          {"lead_h", m.lead_h},
          {"source", m.source},
          {"node_order", "lat-major"},
          {"grid",
           {{"lat_min", m.grid.lat_min},
            {"lat_max", m.grid.lat_max},
            {"lon_min", m.grid.lon_min},
            {"lon_max", m.grid.lon_max},
            {"resolution", m.grid.resolution}}},
          {"sample_layout", {"features:f32[n_nodes*d0]", "target_oni:f64", "lead_h:i32", "target_month:i32", "year:i32"}}};
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  validate(ds);
  io::ByteWriter w;
  w.put_bytes("HQGD");
  w.put_u32(kDatasetVersion);
  const std::string manifest = manifest_to_json(ds.manifest, ds.size()).dump();
  w.put_u32(static_cast<std::uint32_t>(manifest.size()));
  w.put_bytes(manifest);
  for (const auto& s : ds.samples) {
    for (float f : s.features) w.put_f32(f);
    w.put_f64(s.target_oni);
    w.put_i32(s.lead_h);
    w.put_i32(s.target_month);
    w.put_i32(s.year);
  }
  w.write_file(path);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) detail::fail(ErrorCode::Io, "dataset not found: " + path.string());
  auto r = io::ByteReader::from_file(path);
  if (r.remaining() >= 4) {
    if (r.get_bytes(4) != "HQGD") detail::fail(ErrorCode::BadMagic, path.string() + " is not an HQGD file");
  } else {
    detail::fail(ErrorCode::TruncatedFile, "file shorter than magic");
  }
  if (r.get_u32() != kDatasetVersion) detail::fail(ErrorCode::VersionMismatch, "unsupported HQGD version");
  const std::uint32_t mlen = r.get_u32();
  const std::string text = r.get_bytes(mlen);

  Dataset ds;
  std::size_t n_samples = 0;
  try {
    const auto j = nlohmann::json::parse(text);
    auto& m = ds.manifest;
    n_samples = j.at("n_samples").get<std::size_t>();
    m.n_nodes = j.at("n_nodes").get<int>();
    m.d0 = j.at("d0").get<int>();
    m.lead_h = j.at("lead_h").get<int>();
    m.source = j.at("source").get<std::string>();
    const auto& g = j.at("grid");
    m.grid = {g.at("lat_min").get<double>(), g.at("lat_max").get<double>(), g.at("lon_min").get<double>(),
              g.at("lon_max").get<double>(), g.at("resolution").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    detail::fail(ErrorCode::ShapeInconsistent, std::string("bad manifest: ") + e.what());
  }
  if (ds.manifest.n_nodes < 1 || ds.manifest.d0 < 1) detail::fail(ErrorCode::ShapeInconsistent, "manifest shapes invalid");

  const auto width = static_cast<std::size_t>(ds.manifest.n_nodes) * static_cast<std::size_t>(ds.manifest.d0);
  const std::size_t record = width * 4 + 8 + 12;
  if (r.remaining() < n_samples * record) detail::fail(ErrorCode::TruncatedFile, "fewer sample bytes than the manifest declares");
  if (r.remaining() > n_samples * record) detail::fail(ErrorCode::ShapeInconsistent, "trailing bytes after declared samples");
  ds.samples.resize(n_samples);
  for (auto& s : ds.samples) {
    s.features.resize(width);
    for (auto& f : s.features) f = r.get_f32();
    s.target_oni = r.get_f64();
    s.lead_h = r.get_i32();
    s.target_month = r.get_i32();
    s.year = r.get_i32();
  }
  validate(ds);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic ENSO-like data

struct SynthOptions {
  std::uint64_t seed = 7;
  int n_samples = 512;
  int n_nodes = 24;
  int window = 3;  // d0
  int lead_h = 1;
  double noise = 0.1;       // observation noise std relative to the latent's std (SNR ~ 10)
  double innovation = 1.0;  // AR(2) innovation std; 0 gives a deterministic damped cosine
  int start_year = 1871;
};

/// Latent AR(2) coefficients: poles r e^{+-i w} with r = 0.95 and a 40-step period.
struct LatentOscillator {
  static constexpr double kRadius = 0.95;
  static constexpr double kPeriod = 40.0;
  static double a1() { return 2.0 * kRadius * std::cos(2.0 * std::numbers::pi / kPeriod); }
  static double a2() { return -kRadius * kRadius; }
};

/// Seeded generator. Draw order from SplitMix64(seed): node loadings U[0.2, 1.0],
/// then 200 burn-in + T innovations (skipped when innovation == 0), then observation
/// noise per sample, node and window slot. Sample k's window covers latent steps
/// k..k+window-1 and its target is the latent at step k+window-1+lead_h, scaled so the
/// series peaks at |2.5|. Calendar: the last observed month of sample k is month k
/// counted from January of start_year, so year = start_year + k/12 and
/// target_month = (k + lead_h) mod 12 + 1.
inline Dataset synth_enso(const SynthOptions& opt) {
  if (opt.n_samples < 1 || opt.n_nodes < 1 || opt.window < 1 || opt.lead_h < 0) {
    detail::fail(ErrorCode::InvalidArgument, "synth_enso needs n_samples, n_nodes, window >= 1 and lead_h >= 0");
  }
  SplitMix64 rng(opt.seed);
  std::vector<double> loading(static_cast<std::size_t>(opt.n_nodes));
  for (auto& l : loading) l = rng.uniform(0.2, 1.0);

  const std::size_t steps = static_cast<std::size_t>(opt.n_samples + opt.window - 1 + opt.lead_h);
  const double a1 = LatentOscillator::a1(), a2 = LatentOscillator::a2();
  std::vector<double> x(steps);
  if (opt.innovation > 0.0) {
    double prev2 = 0.0, prev1 = 0.0;
    for (int t = 0; t < 200; ++t) {
      const double nx = a1 * prev1 + a2 * prev2 + opt.innovation * rng.normal();
      prev2 = prev1;
      prev1 = nx;
    }
    for (std::size_t t = 0; t < steps; ++t) {
      x[t] = a1 * prev1 + a2 * prev2 + opt.innovation * rng.normal();
      prev2 = prev1;
      prev1 = x[t];
    }
  } else {
    const double w = 2.0 * std::numbers::pi / LatentOscillator::kPeriod;
    x[0] = 1.0;
    if (steps > 1) x[1] = LatentOscillator::kRadius * std::cos(w);
    for (std::size_t t = 2; t < steps; ++t) x[t] = a1 * x[t - 1] + a2 * x[t - 2];
  }

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 2.5 / peak : 1.0;
  for (auto& v : x) v *= scale;
  double mean = 0.0, var = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(steps);
  for (double v : x) var += (v - mean) * (v - mean);
  const double latent_std = std::sqrt(var / static_cast<double>(steps));
  const double noise_std = opt.noise * latent_std;

  Dataset ds;
  ds.manifest = {opt.n_nodes, opt.window, opt.lead_h, "synthetic", GridSpec{}};
  ds.samples.reserve(static_cast<std::size_t>(opt.n_samples));
  for (int k = 0; k < opt.n_samples; ++k) {
    Sample s;
    s.features.resize(static_cast<std::size_t>(opt.n_nodes * opt.window));
    for (int i = 0; i < opt.n_nodes; ++i) {
      for (int j = 0; j < opt.window; ++j) {
        double f = x[static_cast<std::size_t>(k + j)] * loading[static_cast<std::size_t>(i)];
        if (noise_std > 0.0) f += noise_std * rng.normal();
        s.features[static_cast<std::size_t>(i * opt.window + j)] = static_cast<float>(f);
      }
    }
    s.target_oni = x[static_cast<std::size_t>(k + opt.window - 1 + opt.lead_h)];
    s.lead_h = opt.lead_h;
    s.target_month = (k + opt.lead_h) % 12 + 1;
    s.year = opt.start_year + k / 12;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Splitting

struct YearRange {
  int first;
  int last;  // inclusive
  bool contains(int y) const noexcept { return y >= first && y <= last; }
};

/// Partitions by sample year; samples in neither range are dropped. Order is preserved.
inline std::pair<Dataset, Dataset> split_by_year(const Dataset& ds, YearRange train, YearRange test) {
  if (train.first > train.last || test.first > test.last) detail::fail(ErrorCode::InvalidArgument, "empty year range");
  if (train.first <= test.last && test.first <= train.last) {
    detail::fail(ErrorCode::OverlappingRanges, "train and test year ranges overlap");
  }
  Dataset a{ds.manifest, {}}, b{ds.manifest, {}};
  for (const auto& s : ds.samples) {
    if (train.contains(s.year)) a.samples.push_back(s);
    else if (test.contains(s.year)) b.samples.push_back(s);
  }
  return {std::move(a), std::move(b)};
}

}  // namespace qgraphino::data
