#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qroute/config.hpp"
#include "qroute/nn.hpp"
#include "qroute/qsim.hpp"

namespace qroute::nn {

/// Projection -> R_y embedding of pi * tanh(.) -> one or more PQCs -> Pauli-Z
/// expectations -> projection. All circuits read the same embedded angles;
/// their measurements are concatenated before the output projection.
///
/// Expectations are evaluated in bulk through the compiled observables
/// Re(U^dag Z_k U) of each circuit. The circuit-angle gradient is deferred:
/// backward accumulates per-qubit densities and the store's finalizer turns
/// them into theta gradients with one adjoint sweep per circuit.
class QnnLayer {
 public:
  QnnLayer() = default;
  QnnLayer(ParamStore& store, const std::string& name, int in, int out, int circuits, const QsimConfig& qsim,
           Rng& rng);

  ag::Var operator()(const ag::Var& x) const { return out_proj(expectations(in_proj(x))); }
  /// Measurements for pre-activations `pre` (rows x n_qubits):
  /// rows x (circuits * n_qubits), circuit-major.
  ag::Var expectations(const ag::Var& pre) const;

  int n_qubits() const { return spec_.n_qubits; }
  int circuits() const { return static_cast<int>(thetas.size()); }
  /// The circuit structure with the current angles of circuit c.
  qsim::CircuitSpec spec(int c) const;

  Linear in_proj, out_proj;
  std::vector<ag::Var> thetas;  // one column vector per circuit

 private:
  struct Shared;
  qsim::CircuitSpec spec_;
  std::shared_ptr<Shared> shared_;
};

}  // namespace qroute::nn
