#pragma once

#include <cmath>
#include <complex>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qroute/errors.hpp"

// Dense statevector simulation of the hardware-efficient QNN circuits used by
// the encoder and critic. Qubit q corresponds to bit q of the basis index.
namespace qroute::qsim {

enum class Axis { X, Y, Z };

inline constexpr int kMaxQubits = 20;

template <typename Scalar>
using Complex = std::complex<Scalar>;
template <typename Scalar>
using Amplitudes = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;
/// Many states at once, one per column. Row-major so gate updates touch
/// contiguous rows.
template <typename Scalar>
using AmplitudeBatch = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Gate2 = Eigen::Matrix<Complex<Scalar>, 2, 2>;

template <typename Scalar>
Gate2<Scalar> rotation(Axis axis, Scalar angle) {
  using C = Complex<Scalar>;
  const Scalar c = std::cos(angle / 2), s = std::sin(angle / 2);
  Gate2<Scalar> g;
  switch (axis) {
    case Axis::X: g << C(c, 0), C(0, -s), C(0, -s), C(c, 0); break;
    case Axis::Y: g << C(c, 0), C(-s, 0), C(s, 0), C(c, 0); break;
    case Axis::Z: g << C(c, -s), C(0, 0), C(0, 0), C(c, s); break;
  }
  return g;
}

struct Gate {
  enum class Kind { RX, RY, RZ, CNOT, SDG };
  Kind kind;
  int qubit = 0;    // target of single-qubit gates, control of CNOT
  int target = -1;  // CNOT target
  int param = -1;   // index into theta, -1 for fixed gates
};

inline Axis axis_of(Gate::Kind k) {
  return k == Gate::Kind::RX ? Axis::X : k == Gate::Kind::RY ? Axis::Y : Axis::Z;
}

template <typename Derived, typename Scalar>
void apply_single_qubit(Eigen::MatrixBase<Derived>& amps, const Gate2<Scalar>& u, int qubit) {
  const Eigen::Index stride = Eigen::Index(1) << qubit;
  const Eigen::Index dim = amps.rows();
  using Row = Eigen::Matrix<typename Derived::Scalar, 1, Eigen::Dynamic>;
  Row r0, r1;
  for (Eigen::Index base = 0; base < dim; base += 2 * stride) {
    for (Eigen::Index off = 0; off < stride; ++off) {
      const Eigen::Index i0 = base + off, i1 = i0 + stride;
      r0 = amps.row(i0);
      r1 = amps.row(i1);
      amps.row(i0) = u(0, 0) * r0 + u(0, 1) * r1;
      amps.row(i1) = u(1, 0) * r0 + u(1, 1) * r1;
    }
  }
}

template <typename Derived>
void apply_cnot(Eigen::MatrixBase<Derived>& amps, int control, int target) {
  const Eigen::Index cmask = Eigen::Index(1) << control, tmask = Eigen::Index(1) << target;
  for (Eigen::Index i = 0; i < amps.rows(); ++i)
    if ((i & cmask) && !(i & tmask)) amps.row(i).swap(amps.row(i | tmask));
}

/// diag(1, -i) on one qubit; maps an R_y embedding onto an R_x embedding.
template <typename Derived>
void apply_sdg(Eigen::MatrixBase<Derived>& amps, int qubit) {
  using C = typename Derived::Scalar;
  const Eigen::Index mask = Eigen::Index(1) << qubit;
  for (Eigen::Index i = 0; i < amps.rows(); ++i)
    if (i & mask) amps.row(i) *= C(0, -1);
}

template <typename Derived>
void apply_gate(Eigen::MatrixBase<Derived>& amps, const Gate& g, const Eigen::VectorXd& theta, bool inverse = false) {
  using Real = typename Derived::Scalar::value_type;
  switch (g.kind) {
    case Gate::Kind::CNOT: apply_cnot(amps, g.qubit, g.target); break;
    case Gate::Kind::SDG:
      if (inverse) {
        Gate2<Real> s;
        s << Complex<Real>(1, 0), Complex<Real>(0, 0), Complex<Real>(0, 0), Complex<Real>(0, 1);
        apply_single_qubit(amps, s, g.qubit);
      } else {
        apply_sdg(amps, g.qubit);
      }
      break;
    default: {
      const Real angle = static_cast<Real>(theta(g.param));
      apply_single_qubit(amps, rotation<Real>(axis_of(g.kind), inverse ? -angle : angle), g.qubit);
    }
  }
}

/// Structure and angles of one trainable circuit: per layer, R_x R_y R_z on
/// every qubit followed by the entangler CNOTs.
struct CircuitSpec {
  static constexpr int kRotationsPerQubit = 3;

  int n_qubits = 6;
  int n_layers = 5;
  std::vector<Axis> embedding;                   // per qubit, X or Y
  std::vector<std::pair<int, int>> entanglers;   // (control, target)
  Eigen::VectorXd theta;

  /// topology: "ring" (q -> q+1 mod n), "line" (q -> q+1), or "none".
  static CircuitSpec hardware_efficient(int n_qubits, int n_layers, std::string_view topology = "ring");

  Eigen::Index parameter_count() const {
    return Eigen::Index(n_layers) * n_qubits * kRotationsPerQubit;
  }
  Eigen::Index dimension() const { return Eigen::Index(1) << n_qubits; }

  /// Throws ConfigError / ShapeError on inconsistent structure.
  void validate() const;

  /// Fixed prefix that turns R_y product states into the configured embedding.
  std::vector<Gate> embedding_prefix() const;
  /// The trainable part U_pqc(theta).
  std::vector<Gate> gates() const;
};

template <typename Scalar = double>
class StateVector {
 public:
  explicit StateVector(int n_qubits) : n_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) throw ConfigError("qubit count outside [1, 20]");
    amps_ = Amplitudes<Scalar>::Zero(Eigen::Index(1) << n_qubits);
    amps_(0) = 1;
  }

  explicit StateVector(Amplitudes<Scalar> amps) : amps_(std::move(amps)) {
    n_ = 0;
    while ((Eigen::Index(1) << n_) < amps_.size()) ++n_;
    if ((Eigen::Index(1) << n_) != amps_.size() || n_ < 1) throw ShapeError("amplitude count is not a power of two");
  }

  int n_qubits() const { return n_; }
  Eigen::Index dimension() const { return amps_.size(); }
  const Amplitudes<Scalar>& amplitudes() const { return amps_; }
  Amplitudes<Scalar>& amplitudes() { return amps_; }
  Scalar norm_squared() const { return amps_.squaredNorm(); }

 private:
  int n_;
  Amplitudes<Scalar> amps_;
};

/// R_axis(z_i) on qubit i of |0...0>.
template <typename Scalar>
StateVector<Scalar> embed(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z, const CircuitSpec& spec) {
  if (z.size() != spec.n_qubits) throw ShapeError("embedding input length differs from qubit count");
  StateVector<Scalar> state(spec.n_qubits);
  for (int q = 0; q < spec.n_qubits; ++q) {
    const Axis axis = spec.embedding.empty() ? Axis::Y : spec.embedding[q];
    apply_single_qubit(state.amplitudes(), rotation<Scalar>(axis, z(q)), q);
  }
  return state;
}

template <typename Scalar>
StateVector<Scalar> embed(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& z) {
  CircuitSpec spec;
  spec.n_qubits = static_cast<int>(z.size());
  return embed(z, spec);
}

template <typename Derived>
void apply_circuit(Eigen::MatrixBase<Derived>& amps, const CircuitSpec& spec) {
  for (const auto& g : spec.gates()) apply_gate(amps, g, spec.theta);
}

template <typename Derived>
void apply_circuit_inverse(Eigen::MatrixBase<Derived>& amps, const CircuitSpec& spec) {
  const auto gates = spec.gates();
  for (auto it = gates.rbegin(); it != gates.rend(); ++it) apply_gate(amps, *it, spec.theta, true);
}

template <typename Scalar>
StateVector<Scalar> apply_pqc(StateVector<Scalar> state, const CircuitSpec& spec) {
  if (state.dimension() != spec.dimension()) throw ShapeError("state dimension differs from circuit dimension");
  apply_circuit(state.amplitudes(), spec);
  return state;
}

template <typename Scalar>
StateVector<Scalar> apply_pqc_inverse(StateVector<Scalar> state, const CircuitSpec& spec) {
  if (state.dimension() != spec.dimension()) throw ShapeError("state dimension differs from circuit dimension");
  apply_circuit_inverse(state.amplitudes(), spec);
  return state;
}

/// Single-qubit Pauli-Z observables.
struct ObservableSet {
  std::vector<int> qubits;
  static ObservableSet pauli_z(int n_qubits) {
    ObservableSet o;
    for (int q = 0; q < n_qubits; ++q) o.qubits.push_back(q);
    return o;
  }
};

inline constexpr double kNormTolerance = 1e-9;

template <typename Scalar>
Eigen::VectorXd measure(const StateVector<Scalar>& state, const ObservableSet& obs) {
  const double norm = static_cast<double>(state.norm_squared());
  if (std::abs(norm - 1.0) > kNormTolerance) throw NumericalError("state norm drifted from 1");
  Eigen::VectorXd out(obs.qubits.size());
  const auto& a = state.amplitudes();
  for (std::size_t k = 0; k < obs.qubits.size(); ++k) {
    const Eigen::Index mask = Eigen::Index(1) << obs.qubits[k];
    double e = 0;
    for (Eigen::Index b = 0; b < a.size(); ++b) e += (b & mask ? -1.0 : 1.0) * static_cast<double>(std::norm(a(b)));
    out(k) = e;
  }
  return out;
}

/// y = W x + b.
struct AffineMap {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const {
    if (x.size() != weight.cols() || bias.size() != weight.rows()) throw ShapeError("affine map shape mismatch");
    return weight * x + bias;
  }
};

/// out_proj(<Z>(U_pqc U_enc(pi * tanh(in_proj(z))) |0>)).
Eigen::VectorXd qnn_forward(const Eigen::VectorXd& z, const CircuitSpec& spec, const AffineMap& in_proj,
                            const AffineMap& out_proj);

/// d<Z_observable>/d theta by the two-term shift rule, for embedding angles
/// `angles` fed directly to the circuit.
Eigen::VectorXd param_shift_grad(const Eigen::VectorXd& angles, const CircuitSpec& spec, int observable);

/// Expectation <Z_observable> for embedding angles fed directly to the circuit.
double expectation(const Eigen::VectorXd& angles, const CircuitSpec& spec, int observable);

// ---------------------------------------------------------------------------
// Batched evaluation used during training. An R_y product state psi is real,
// so <Z_k> = psi^T Re(U^dag Z_k U) psi with U the full circuit unitary.

/// Re(U^dag Z_k U) for k = 0..n-1 stacked vertically: (n * dim) x dim.
Eigen::MatrixXd compiled_observables(const CircuitSpec& spec);

/// R_y product states for each row of `angles` (P x n): dim x P.
Eigen::MatrixXd product_states(const Eigen::MatrixXd& angles);

/// Gradient w.r.t. theta of sum_c <phi_c| U^dag O_c U |phi_c>, where phi_c are
/// the columns of `states` (given before the embedding prefix) and
/// O_c = sum_k weights(c, k) Z_k. Computed with one adjoint sweep.
Eigen::VectorXd adjoint_theta_gradient(const AmplitudeBatch<double>& states, const CircuitSpec& spec,
                                       const Eigen::MatrixXd& weights);

/// Gradient w.r.t. theta of sum_k tr(Re(U^dag Z_k U) R_k) for real symmetric
/// R_k (one per qubit), by eigendecomposing each R_k into a weighted ensemble.
Eigen::VectorXd ensemble_theta_gradient(const CircuitSpec& spec, const std::vector<Eigen::MatrixXd>& densities);

}  // namespace qroute::qsim
