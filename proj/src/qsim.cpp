#include "qroute/qsim.hpp"

#include <string>

#include <Eigen/Eigenvalues>

namespace qroute::qsim {

CircuitSpec CircuitSpec::hardware_efficient(int n_qubits, int n_layers, std::string_view topology) {
  CircuitSpec spec;
  spec.n_qubits = n_qubits;
  spec.n_layers = n_layers;
  spec.embedding.assign(std::max(n_qubits, 0), Axis::Y);
  if (topology == "ring") {
    if (n_qubits == 2) spec.entanglers = {{0, 1}};
    else if (n_qubits > 2)
      for (int q = 0; q < n_qubits; ++q) spec.entanglers.emplace_back(q, (q + 1) % n_qubits);
  } else if (topology == "line") {
    for (int q = 0; q + 1 < n_qubits; ++q) spec.entanglers.emplace_back(q, q + 1);
  } else if (topology != "none") {
    throw ConfigError("unknown entangler topology '" + std::string(topology) + "'");
  }
  spec.theta = Eigen::VectorXd::Zero(spec.parameter_count());
  return spec;
}

void CircuitSpec::validate() const {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw ConfigError("qubit count outside [1, 20]");
  if (n_layers < 0) throw ConfigError("negative layer count");
  if (!embedding.empty() && embedding.size() != static_cast<std::size_t>(n_qubits))
    throw ShapeError("embedding axes differ from qubit count");
  for (Axis a : embedding)
    if (a == Axis::Z) throw ConfigError("R_z embedding of |0> carries no input information");
  for (auto [c, t] : entanglers)
    if (c < 0 || t < 0 || c >= n_qubits || t >= n_qubits || c == t) throw ConfigError("invalid entangler placement");
  if (theta.size() != parameter_count()) throw ShapeError("theta length differs from layers x qubits x 3");
}

std::vector<Gate> CircuitSpec::embedding_prefix() const {
  std::vector<Gate> out;
  for (int q = 0; q < static_cast<int>(embedding.size()); ++q)
    if (embedding[q] == Axis::X) out.push_back({Gate::Kind::SDG, q});
  return out;
}

std::vector<Gate> CircuitSpec::gates() const {
  std::vector<Gate> out;
  out.reserve(n_layers * (n_qubits * kRotationsPerQubit + entanglers.size()));
  int p = 0;
  for (int l = 0; l < n_layers; ++l) {
    for (int q = 0; q < n_qubits; ++q) {
      out.push_back({Gate::Kind::RX, q, -1, p++});
      out.push_back({Gate::Kind::RY, q, -1, p++});
      out.push_back({Gate::Kind::RZ, q, -1, p++});
    }
    for (auto [c, t] : entanglers) out.push_back({Gate::Kind::CNOT, c, t, -1});
  }
  return out;
}

Eigen::VectorXd qnn_forward(const Eigen::VectorXd& z, const CircuitSpec& spec, const AffineMap& in_proj,
                            const AffineMap& out_proj) {
  if (in_proj.weight.rows() != spec.n_qubits) throw ShapeError("input projection must map onto the qubits");
  if (out_proj.weight.cols() != spec.n_qubits) throw ShapeError("output projection must read the qubits");
  const Eigen::VectorXd angles = in_proj(z).array().tanh() * M_PI;
  const auto state = apply_pqc(embed<double>(angles, spec), spec);
  return out_proj(measure(state, ObservableSet::pauli_z(spec.n_qubits)));
}

double expectation(const Eigen::VectorXd& angles, const CircuitSpec& spec, int observable) {
  const auto state = apply_pqc(embed<double>(angles, spec), spec);
  ObservableSet obs;
  obs.qubits = {observable};
  return measure(state, obs)(0);
}

Eigen::VectorXd param_shift_grad(const Eigen::VectorXd& angles, const CircuitSpec& spec, int observable) {
  Eigen::VectorXd grad(spec.theta.size());
  CircuitSpec shifted = spec;
  for (Eigen::Index k = 0; k < spec.theta.size(); ++k) {
    shifted.theta(k) = spec.theta(k) + M_PI / 2;
    const double plus = expectation(angles, shifted, observable);
    shifted.theta(k) = spec.theta(k) - M_PI / 2;
    const double minus = expectation(angles, shifted, observable);
    shifted.theta(k) = spec.theta(k);
    grad(k) = 0.5 * (plus - minus);
  }
  return grad;
}

Eigen::MatrixXd compiled_observables(const CircuitSpec& spec) {
  const Eigen::Index dim = spec.dimension();
  AmplitudeBatch<double> u = AmplitudeBatch<double>::Identity(dim, dim);
  for (const auto& g : spec.embedding_prefix()) apply_gate(u, g, spec.theta);
  apply_circuit(u, spec);
  Eigen::MatrixXd out(spec.n_qubits * dim, dim);
  const Eigen::MatrixXcd uc = u;
  for (int k = 0; k < spec.n_qubits; ++k) {
    Eigen::VectorXd z(dim);
    for (Eigen::Index b = 0; b < dim; ++b) z(b) = (b >> k) & 1 ? -1.0 : 1.0;
    out.middleRows(k * dim, dim) = (uc.adjoint() * (z.asDiagonal() * uc)).real();
  }
  return out;
}

Eigen::MatrixXd product_states(const Eigen::MatrixXd& angles) {
  const auto n = angles.cols();
  const Eigen::Index dim = Eigen::Index(1) << n;
  Eigen::MatrixXd psi = Eigen::MatrixXd::Ones(dim, angles.rows());
  for (Eigen::Index q = 0; q < n; ++q) {
    const Eigen::RowVectorXd c = (angles.col(q).array() / 2).cos().matrix().transpose();
    const Eigen::RowVectorXd s = (angles.col(q).array() / 2).sin().matrix().transpose();
    for (Eigen::Index b = 0; b < dim; ++b) psi.row(b).array() *= ((b >> q) & 1 ? s : c).array();
  }
  return psi;
}

namespace {

// <a| P |b> summed over columns, for the Pauli generator of a rotation gate.
double generator_term(const AmplitudeBatch<double>& lambda, const AmplitudeBatch<double>& phi, Gate::Kind kind,
                      int qubit) {
  const Eigen::Index stride = Eigen::Index(1) << qubit;
  std::complex<double> acc = 0;
  for (Eigen::Index base = 0; base < phi.rows(); base += 2 * stride) {
    for (Eigen::Index off = 0; off < stride; ++off) {
      const Eigen::Index i0 = base + off, i1 = i0 + stride;
      switch (kind) {
        case Gate::Kind::RX:  // X swaps the pair
          acc += (lambda.row(i0).conjugate().cwiseProduct(phi.row(i1))).sum() +
                 (lambda.row(i1).conjugate().cwiseProduct(phi.row(i0))).sum();
          break;
        case Gate::Kind::RY:  // Y = [[0, -i], [i, 0]]
          acc += std::complex<double>(0, -1) * (lambda.row(i0).conjugate().cwiseProduct(phi.row(i1))).sum() +
                 std::complex<double>(0, 1) * (lambda.row(i1).conjugate().cwiseProduct(phi.row(i0))).sum();
          break;
        default:  // Z
          acc += (lambda.row(i0).conjugate().cwiseProduct(phi.row(i0))).sum() -
                 (lambda.row(i1).conjugate().cwiseProduct(phi.row(i1))).sum();
      }
    }
  }
  return acc.imag();
}

}  // namespace

Eigen::VectorXd adjoint_theta_gradient(const AmplitudeBatch<double>& states, const CircuitSpec& spec,
                                       const Eigen::MatrixXd& weights) {
  const Eigen::Index dim = spec.dimension();
  if (states.rows() != dim) throw ShapeError("state dimension differs from circuit dimension");
  if (weights.rows() != states.cols() || weights.cols() != spec.n_qubits)
    throw ShapeError("observable weights must be columns x qubits");

  AmplitudeBatch<double> phi = states;
  for (const auto& g : spec.embedding_prefix()) apply_gate(phi, g, spec.theta);
  const auto gates = spec.gates();
  for (const auto& g : gates) apply_gate(phi, g, spec.theta);

  // lambda = O phi with O diagonal per column.
  Eigen::MatrixXd zsign(dim, spec.n_qubits);
  for (Eigen::Index b = 0; b < dim; ++b)
    for (int k = 0; k < spec.n_qubits; ++k) zsign(b, k) = (b >> k) & 1 ? -1.0 : 1.0;
  const Eigen::MatrixXd diag = zsign * weights.transpose();  // dim x columns
  AmplitudeBatch<double> lambda = phi.cwiseProduct(diag.cast<std::complex<double>>());

  // d/dtheta <phi|O|phi> = Im <lambda_j| P |phi_j> with both states taken
  // right after gate j (factor 2 from the bra and ket cancels the 1/2 of the
  // rotation generator).
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(spec.theta.size());
  for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
    if (it->param >= 0) grad(it->param) += generator_term(lambda, phi, it->kind, it->qubit);
    apply_gate(phi, *it, spec.theta, true);
    apply_gate(lambda, *it, spec.theta, true);
  }
  return grad;
}

Eigen::VectorXd ensemble_theta_gradient(const CircuitSpec& spec, const std::vector<Eigen::MatrixXd>& densities) {
  const Eigen::Index dim = spec.dimension();
  if (densities.size() != static_cast<std::size_t>(spec.n_qubits)) throw ShapeError("one density per qubit expected");
  AmplitudeBatch<double> states(dim, dim * spec.n_qubits);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(dim * spec.n_qubits, spec.n_qubits);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  for (int k = 0; k < spec.n_qubits; ++k) {
    solver.compute(densities[k]);
    states.middleCols(k * dim, dim) = solver.eigenvectors().cast<std::complex<double>>();
    weights.block(k * dim, k, dim, 1) = solver.eigenvalues();
  }
  return adjoint_theta_gradient(states, spec, weights);
}

}  // namespace qroute::qsim
