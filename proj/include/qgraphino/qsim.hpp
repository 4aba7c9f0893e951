#pragma once

// Exact statevector simulation of the variational circuit: amplitude encoding, the
// {RX, RY, RZ, Rot, CNOT} gate set, the three ansatz families, Pauli-Z readout and
// gradients (parameter shift for angles, adjoint pass for the encoded input).
//
// Bit order: qubit 0 is the most significant bit of the amplitude index, so for
// n qubits the basis index of |q0 q1 ... q_{n-1}> is sum_q q_k * 2^(n-1-k).

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qgraphino/error.hpp"
#include "qgraphino/rng.hpp"

namespace qgraphino::qsim {

using Complex = std::complex<double>;

inline constexpr int kMaxQubits = 20;
inline constexpr double kZeroNormTolerance = 1e-12;
/// Probability of drawing a CNOT slot in the random ansatz (only when n_qubits > 1).
inline constexpr double kRandomCnotProbability = 0.3;

class Statevector {
 public:
  /// |0...0> on n qubits.
  explicit Statevector(int n_qubits) : n_qubits_(checked_qubits(n_qubits)), amps_(std::size_t{1} << n_qubits) {
    amps_[0] = 1.0;
  }

  static Statevector basis(int n_qubits, std::size_t index) {
    Statevector s(n_qubits);
    if (index >= s.size()) detail::fail(ErrorCode::InvalidArgument, "basis index out of range");
    s.amps_[0] = 0.0;
    s.amps_[index] = 1.0;
    return s;
  }

  /// Takes amplitudes as given; the caller is responsible for normalization.
  static Statevector from_amplitudes(int n_qubits, std::vector<Complex> amps) {
    Statevector s(n_qubits);
    if (amps.size() != s.size()) detail::fail(ErrorCode::ShapeMismatch, "amplitude count must be 2^n_qubits");
    s.amps_ = std::move(amps);
    return s;
  }

  int n_qubits() const noexcept { return n_qubits_; }
  std::size_t size() const noexcept { return amps_.size(); }

  std::span<const Complex> amplitudes() const noexcept { return amps_; }
  std::span<Complex> amplitudes() noexcept { return amps_; }

  const Complex& operator[](std::size_t i) const noexcept { return amps_[i]; }
  Complex& operator[](std::size_t i) noexcept { return amps_[i]; }

  double norm() const noexcept {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

  std::vector<double> probabilities() const {
    std::vector<double> p(amps_.size());
    for (std::size_t i = 0; i < amps_.size(); ++i) p[i] = std::norm(amps_[i]);
    return p;
  }

  bool operator==(const Statevector&) const = default;

 private:
  static int checked_qubits(int n) {
    if (n < 1 || n > kMaxQubits) {
      detail::fail(ErrorCode::InvalidArgument, "n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
    }
    return n;
  }

  int n_qubits_;
  std::vector<Complex> amps_;
};

/// Bit of `qubit` in basis index `index` under the MSB-first convention.
constexpr unsigned bit_of(std::size_t index, int qubit, int n_qubits) noexcept {
  return static_cast<unsigned>((index >> (n_qubits - 1 - qubit)) & 1U);
}

// ---------------------------------------------------------------------------
// Encoding

/// Writes x / ||x|| into the first m amplitudes and zero-pads to 2^n.
inline Statevector amplitude_encode(std::span<const double> x, int n_qubits) {
  Statevector s(n_qubits);
  if (x.empty()) detail::fail(ErrorCode::ZeroVector, "empty feature vector");
  if (x.size() > s.size()) {
    detail::fail(ErrorCode::TooManyFeatures,
                 std::to_string(x.size()) + " features exceed 2^" + std::to_string(n_qubits));
  }
  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double nrm = std::sqrt(sq);
  if (!(nrm > kZeroNormTolerance)) detail::fail(ErrorCode::ZeroVector, "feature norm <= 1e-12");
  auto amps = s.amplitudes();
  amps[0] = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) amps[i] = Complex(x[i] / nrm, 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Gates

using Matrix2 = std::array<Complex, 4>;  // row-major {m00, m01, m10, m11}

inline void check_qubit(const Statevector& s, int qubit) {
  if (qubit < 0 || qubit >= s.n_qubits()) {
    detail::fail(ErrorCode::QubitOutOfRange,
                 "qubit " + std::to_string(qubit) + " outside register of " + std::to_string(s.n_qubits()));
  }
}

inline void apply_matrix(Statevector& s, int qubit, const Matrix2& m) {
  check_qubit(s, qubit);
  const std::size_t stride = std::size_t{1} << (s.n_qubits() - 1 - qubit);
  const std::size_t dim = s.size();
  auto amps = s.amplitudes();
  for (std::size_t base = 0; base < dim; base += 2 * stride) {
    for (std::size_t i = base; i < base + stride; ++i) {
      const Complex a0 = amps[i];
      const Complex a1 = amps[i + stride];
      amps[i] = m[0] * a0 + m[1] * a1;
      amps[i + stride] = m[2] * a0 + m[3] * a1;
    }
  }
}

inline Matrix2 rx_matrix(double theta) {
  const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
  return {Complex(c, 0), Complex(0, -sn), Complex(0, -sn), Complex(c, 0)};
}

inline Matrix2 ry_matrix(double theta) {
  const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
  return {Complex(c, 0), Complex(-sn, 0), Complex(sn, 0), Complex(c, 0)};
}

inline Matrix2 rz_matrix(double theta) {
  return {std::polar(1.0, -theta / 2), Complex(0, 0), Complex(0, 0), std::polar(1.0, theta / 2)};
}

// r * exp(i a) for any sign of r (std::polar requires r >= 0)
inline Complex scaled_phase(double r, double a) { return {r * std::cos(a), r * std::sin(a)}; }

/// RZ(omega) * RY(theta) * RZ(phi): RZ(phi) acts first in time.
inline Matrix2 rot_matrix(double phi, double theta, double omega) {
  const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
  return {scaled_phase(c, -(phi + omega) / 2), scaled_phase(-sn, (phi - omega) / 2),
          scaled_phase(sn, -(phi - omega) / 2), scaled_phase(c, (phi + omega) / 2)};
}

inline void apply_rx(Statevector& s, int qubit, double theta) { apply_matrix(s, qubit, rx_matrix(theta)); }
inline void apply_ry(Statevector& s, int qubit, double theta) { apply_matrix(s, qubit, ry_matrix(theta)); }
inline void apply_rz(Statevector& s, int qubit, double theta) { apply_matrix(s, qubit, rz_matrix(theta)); }

inline void apply_rot(Statevector& s, int qubit, double phi, double theta, double omega) {
  apply_matrix(s, qubit, rot_matrix(phi, theta, omega));
}

inline void apply_cnot(Statevector& s, int control, int target) {
  check_qubit(s, control);
  check_qubit(s, target);
  if (control == target) detail::fail(ErrorCode::ControlEqualsTarget, "CNOT control equals target");
  const int n = s.n_qubits();
  const std::size_t cmask = std::size_t{1} << (n - 1 - control);
  const std::size_t tmask = std::size_t{1} << (n - 1 - target);
  auto amps = s.amplitudes();
  for (std::size_t i = 0; i < s.size(); ++i) {
    // visit each swapped pair once, from its target-bit-0 member
    if ((i & cmask) && !(i & tmask)) std::swap(amps[i], amps[i | tmask]);
  }
}

// ---------------------------------------------------------------------------
// Observables

inline double expect_z(const Statevector& s, int qubit) {
  check_qubit(s, qubit);
  double e = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = std::norm(s[i]);
    e += bit_of(i, qubit, s.n_qubits()) ? -p : p;
  }
  return e;
}

inline std::vector<double> expect_all_z(const Statevector& s) {
  const int n = s.n_qubits();
  std::vector<double> e(static_cast<std::size_t>(n), 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = std::norm(s[i]);
    for (int q = 0; q < n; ++q) e[q] += bit_of(i, q, n) ? -p : p;
  }
  return e;
}

/// sum_q weights[q] * <Z_q>.
inline double expect_weighted_z(const Statevector& s, std::span<const double> weights) {
  if (weights.size() != static_cast<std::size_t>(s.n_qubits())) {
    detail::fail(ErrorCode::ShapeMismatch, "observable weights must have one entry per qubit");
  }
  const auto e = expect_all_z(s);
  double acc = 0.0;
  for (std::size_t q = 0; q < e.size(); ++q) acc += weights[q] * e[q];
  return acc;
}

// ---------------------------------------------------------------------------
// Ansatz description

enum class AnsatzKind { Basic, Strongly, Random };

inline std::string_view to_string(AnsatzKind k) noexcept {
  switch (k) {
    case AnsatzKind::Basic: return "basic";
    case AnsatzKind::Strongly: return "strongly";
    case AnsatzKind::Random: return "random";
  }
  return "unknown";
}

inline std::optional<AnsatzKind> parse_ansatz_kind(std::string_view s) {
  if (s == "basic") return AnsatzKind::Basic;
  if (s == "strongly") return AnsatzKind::Strongly;
  if (s == "random") return AnsatzKind::Random;
  return std::nullopt;
}

/// ranges[l] = (l mod (n_qubits - 1)) + 1; empty for a single qubit.
inline std::vector<int> default_ranges(int n_layers, int n_qubits) {
  std::vector<int> r;
  if (n_qubits <= 1) return r;
  r.reserve(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) r.push_back(l % (n_qubits - 1) + 1);
  return r;
}

struct AnsatzSpec {
  AnsatzKind kind = AnsatzKind::Strongly;
  int n_layers = 4;
  int n_qubits = 6;
  std::uint64_t seed = 0;
  std::vector<int> ranges;  // Strongly only; empty means default_ranges

  static AnsatzSpec basic(int layers, int qubits) { return {AnsatzKind::Basic, layers, qubits, 0, {}}; }
  static AnsatzSpec strongly(int layers, int qubits) {
    return {AnsatzKind::Strongly, layers, qubits, 0, default_ranges(layers, qubits)};
  }
  static AnsatzSpec random(int layers, int qubits, std::uint64_t seed) {
    return {AnsatzKind::Random, layers, qubits, seed, {}};
  }

  /// Entangling offsets actually used by the Strongly kind.
  std::vector<int> effective_ranges() const { return ranges.empty() ? default_ranges(n_layers, n_qubits) : ranges; }

  bool operator==(const AnsatzSpec&) const = default;
};

inline void validate(const AnsatzSpec& spec) {
  if (spec.n_qubits < 1 || spec.n_qubits > kMaxQubits) detail::fail(ErrorCode::InvalidSpec, "n_qubits out of [1, 20]");
  if (spec.n_layers < 1) detail::fail(ErrorCode::InvalidSpec, "n_layers must be >= 1");
  if (spec.kind == AnsatzKind::Strongly && spec.n_qubits > 1) {
    const auto r = spec.effective_ranges();
    if (r.size() != static_cast<std::size_t>(spec.n_layers)) {
      detail::fail(ErrorCode::InvalidRange, "ranges must have one entry per layer");
    }
    for (int v : r) {
      if (v < 1 || v > spec.n_qubits - 1) {
        detail::fail(ErrorCode::InvalidRange, "range " + std::to_string(v) + " outside [1, n_qubits-1]");
      }
    }
  }
}

enum class GateType { RX, RY, RZ, Rot, CNOT };

inline std::string_view to_string(GateType g) noexcept {
  switch (g) {
    case GateType::RX: return "RX";
    case GateType::RY: return "RY";
    case GateType::RZ: return "RZ";
    case GateType::Rot: return "Rot";
    case GateType::CNOT: return "CNOT";
  }
  return "?";
}

struct Gate {
  GateType type;
  int qubit;   // control for CNOT
  int target;  // CNOT only, -1 otherwise
  std::array<int, 3> params;  // Rot uses all three, RX/RY/RZ use params[0], CNOT none (-1)

  static Gate rotation(GateType t, int q, int p) { return {t, q, -1, {p, -1, -1}}; }
  static Gate rot(int q, int p0) { return {GateType::Rot, q, -1, {p0, p0 + 1, p0 + 2}}; }
  static Gate cnot(int c, int t) { return {GateType::CNOT, c, t, {-1, -1, -1}}; }

  int param_arity() const noexcept {
    switch (type) {
      case GateType::Rot: return 3;
      case GateType::CNOT: return 0;
      default: return 1;
    }
  }

  bool operator==(const Gate&) const = default;
};

struct GateSequence {
  int n_qubits = 0;
  int param_count = 0;
  std::vector<Gate> gates;

  bool operator==(const GateSequence&) const = default;
};

/// Materializes the circuit. Parameter indices are dense and assigned in first-use order.
///
/// Random kind, per layer and per slot s = 0..n-1 (one SplitMix64 stream seeded with spec.seed):
///   u = uniform()
///   if n > 1 and u < 0.3:  c = below(n); t = (c + 1 + below(n - 1)) mod n; emit CNOT(c, t)
///   else:                  g = below(3) -> {RX, RY, RZ}; q = below(n); emit g(q) with next param
inline GateSequence build_sequence(const AnsatzSpec& spec) {
  validate(spec);
  const int n = spec.n_qubits;
  GateSequence seq;
  seq.n_qubits = n;
  int next_param = 0;
  switch (spec.kind) {
    case AnsatzKind::Basic:
      for (int l = 0; l < spec.n_layers; ++l) {
        for (int q = 0; q < n; ++q) seq.gates.push_back(Gate::rotation(GateType::RX, q, next_param++));
        if (n == 2) {
          seq.gates.push_back(Gate::cnot(0, 1));
        } else if (n >= 3) {
          for (int q = 0; q < n; ++q) seq.gates.push_back(Gate::cnot(q, (q + 1) % n));
        }
      }
      break;
    case AnsatzKind::Strongly: {
      const auto ranges = spec.effective_ranges();
      for (int l = 0; l < spec.n_layers; ++l) {
        for (int q = 0; q < n; ++q) {
          seq.gates.push_back(Gate::rot(q, next_param));
          next_param += 3;
        }
        if (n >= 2) {
          for (int q = 0; q < n; ++q) seq.gates.push_back(Gate::cnot(q, (q + ranges[l]) % n));
        }
      }
      break;
    }
    case AnsatzKind::Random: {
      SplitMix64 rng(spec.seed);
      constexpr std::array<GateType, 3> kRotations{GateType::RX, GateType::RY, GateType::RZ};
      const auto nq = static_cast<std::uint64_t>(n);
      for (int l = 0; l < spec.n_layers; ++l) {
        for (int slot = 0; slot < n; ++slot) {
          const double u = rng.uniform();
          if (n > 1 && u < kRandomCnotProbability) {
            const auto c = rng.below(nq);
            const auto t = (c + 1 + rng.below(nq - 1)) % nq;
            seq.gates.push_back(Gate::cnot(static_cast<int>(c), static_cast<int>(t)));
          } else {
            const auto g = kRotations[rng.below(3)];
            const auto q = static_cast<int>(rng.below(nq));
            seq.gates.push_back(Gate::rotation(g, q, next_param++));
          }
        }
      }
      break;
    }
  }
  seq.param_count = next_param;
  return seq;
}

inline int param_count(const AnsatzSpec& spec) {
  switch (spec.kind) {
    case AnsatzKind::Basic: return spec.n_layers * spec.n_qubits;
    case AnsatzKind::Strongly: return spec.n_layers * spec.n_qubits * 3;
    case AnsatzKind::Random: return build_sequence(spec).param_count;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Circuit execution

/// Applies one gate with bound angles; `adjoint` applies its inverse.
inline void apply_gate(Statevector& s, const Gate& g, std::span<const double> params, bool adjoint = false) {
  const double sign = adjoint ? -1.0 : 1.0;
  switch (g.type) {
    case GateType::RX: apply_rx(s, g.qubit, sign * params[g.params[0]]); break;
    case GateType::RY: apply_ry(s, g.qubit, sign * params[g.params[0]]); break;
    case GateType::RZ: apply_rz(s, g.qubit, sign * params[g.params[0]]); break;
    case GateType::Rot: {
      const double phi = params[g.params[0]], theta = params[g.params[1]], omega = params[g.params[2]];
      // (RZ(w) RY(t) RZ(p))^-1 = RZ(-p) RY(-t) RZ(-w)
      if (adjoint) {
        apply_rot(s, g.qubit, -omega, -theta, -phi);
      } else {
        apply_rot(s, g.qubit, phi, theta, omega);
      }
      break;
    }
    case GateType::CNOT: apply_cnot(s, g.qubit, g.target); break;
  }
}

inline void check_binding(const Statevector& s, const GateSequence& seq, std::span<const double> params) {
  if (params.size() != static_cast<std::size_t>(seq.param_count)) {
    detail::fail(ErrorCode::ParamLengthMismatch, "expected " + std::to_string(seq.param_count) + " parameters, got " +
                                                     std::to_string(params.size()));
  }
  if (s.n_qubits() != seq.n_qubits) detail::fail(ErrorCode::QubitCountMismatch, "state and circuit qubit counts differ");
}

inline void run_sequence(Statevector& s, const GateSequence& seq, std::span<const double> params) {
  check_binding(s, seq, params);
  for (const auto& g : seq.gates) apply_gate(s, g, params);
}

/// U^dagger: the sequence reversed, each gate inverted.
inline void run_sequence_adjoint(Statevector& s, const GateSequence& seq, std::span<const double> params) {
  check_binding(s, seq, params);
  for (auto it = seq.gates.rbegin(); it != seq.gates.rend(); ++it) apply_gate(s, *it, params, /*adjoint=*/true);
}

inline void run_ansatz(Statevector& s, const AnsatzSpec& spec, std::span<const double> params) {
  run_sequence(s, build_sequence(spec), params);
}

// ---------------------------------------------------------------------------
// Gradients

/// d/dtheta_k of sum_q weights[q] <Z_q> via the two-term shift rule (exact: every
/// generator has eigenvalues +-1/2).
inline std::vector<double> param_shift_grad(const GateSequence& seq, std::span<const double> params,
                                            const Statevector& input, std::span<const double> weights) {
  check_binding(input, seq, params);
  std::vector<double> shifted(params.begin(), params.end());
  std::vector<double> grad(params.size(), 0.0);
  constexpr double kShift = std::numbers::pi / 2;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double orig = shifted[k];
    shifted[k] = orig + kShift;
    Statevector plus = input;
    run_sequence(plus, seq, shifted);
    shifted[k] = orig - kShift;
    Statevector minus = input;
    run_sequence(minus, seq, shifted);
    shifted[k] = orig;
    grad[k] = 0.5 * (expect_weighted_z(plus, weights) - expect_weighted_z(minus, weights));
  }
  return grad;
}

inline std::vector<double> param_shift_grad(const AnsatzSpec& spec, std::span<const double> params,
                                            const Statevector& input, int qubit) {
  check_qubit(input, qubit);
  std::vector<double> w(static_cast<std::size_t>(input.n_qubits()), 0.0);
  w[static_cast<std::size_t>(qubit)] = 1.0;
  return param_shift_grad(build_sequence(spec), params, input, w);
}

/// Gradient of sum_q weights[q] <Z_q> (after encode + circuit) with respect to the raw
/// encoder input x. Uses one forward and one adjoint pass; the observable matrix
/// U^dagger O U is never formed.
inline std::vector<double> input_grad(const GateSequence& seq, std::span<const double> params,
                                      std::span<const double> x, std::span<const double> weights) {
  const Statevector a = amplitude_encode(x, seq.n_qubits);
  Statevector psi = a;
  run_sequence(psi, seq, params);
  if (weights.size() != static_cast<std::size_t>(seq.n_qubits)) {
    detail::fail(ErrorCode::ShapeMismatch, "observable weights must have one entry per qubit");
  }
  const int n = seq.n_qubits;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double d = 0.0;
    for (int q = 0; q < n; ++q) d += bit_of(i, q, n) ? -weights[q] : weights[q];
    psi[i] *= d;
  }
  run_sequence_adjoint(psi, seq, params);  // psi = M a

  double sq = 0.0;
  for (double v : x) sq += v * v;
  const double nrm = std::sqrt(sq);
  const std::size_t m = x.size();
  // dE/da = 2 Re(M a); chain through a = x/||x||: (I - a a^T) / ||x||
  std::vector<double> g(m);
  double proj = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    g[i] = 2.0 * psi[i].real();
    proj += a[i].real() * g[i];
  }
  for (std::size_t i = 0; i < m; ++i) g[i] = (g[i] - a[i].real() * proj) / nrm;
  return g;
}

inline std::vector<double> input_grad(const AnsatzSpec& spec, std::span<const double> params,
                                      std::span<const double> x, int n_qubits, int qubit) {
  if (n_qubits != spec.n_qubits) detail::fail(ErrorCode::QubitCountMismatch, "encoder and ansatz qubit counts differ");
  if (qubit < 0 || qubit >= n_qubits) detail::fail(ErrorCode::QubitOutOfRange, "readout qubit out of range");
  std::vector<double> w(static_cast<std::size_t>(n_qubits), 0.0);
  w[static_cast<std::size_t>(qubit)] = 1.0;
  return input_grad(build_sequence(spec), params, x, w);
}

// ---------------------------------------------------------------------------
// JSON form used by `qgraphino inspect`

inline nlohmann::json to_json(const GateSequence& seq) {
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : seq.gates) {
    nlohmann::json j;
    j["gate"] = std::string(to_string(g.type));
    if (g.type == GateType::CNOT) {
      j["control"] = g.qubit;
      j["target"] = g.target;
    } else {
      j["qubit"] = g.qubit;
      std::vector<int> p(g.params.begin(), g.params.begin() + g.param_arity());
      j["params"] = p;
    }
    gates.push_back(std::move(j));
  }
  return {{"n_qubits", seq.n_qubits}, {"param_count", seq.param_count}, {"gates", std::move(gates)}};
}

inline nlohmann::json to_json(const AnsatzSpec& spec) {
  nlohmann::json j{{"kind", std::string(to_string(spec.kind))},
                   {"n_layers", spec.n_layers},
                   {"n_qubits", spec.n_qubits},
                   {"seed", spec.seed}};
  if (spec.kind == AnsatzKind::Strongly) j["ranges"] = spec.effective_ranges();
  return j;
}

inline AnsatzSpec ansatz_from_json(const nlohmann::json& j) {
  const auto kind = parse_ansatz_kind(j.at("kind").get<std::string>());
  if (!kind) detail::fail(ErrorCode::InvalidSpec, "unknown ansatz kind");
  AnsatzSpec spec{*kind, j.at("n_layers").get<int>(), j.at("n_qubits").get<int>(),
                  j.value("seed", std::uint64_t{0}), {}};
  if (j.contains("ranges")) spec.ranges = j.at("ranges").get<std::vector<int>>();
  validate(spec);
  return spec;
}

}  // namespace qgraphino::qsim
