#include <doctest.h>

#include <cmath>
#include <complex>

#include "qroute/errors.hpp"
#include "qroute/qsim.hpp"
#include "qroute/random.hpp"

using namespace qroute;
using namespace qroute::qsim;
using C = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

// Dense oracle: every gate as a full 2^n x 2^n matrix built by Kronecker
// products (qubit 0 is the least significant bit).
MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

MatrixXcd lift(const Eigen::Matrix2cd& g, int q, int n) {
  MatrixXcd out = MatrixXcd::Identity(1, 1);
  for (int k = n - 1; k >= 0; --k) out = kron(out, k == q ? MatrixXcd(g) : MatrixXcd::Identity(2, 2));
  return out;
}

Eigen::Matrix2cd dense_rotation(char axis, double a) {
  const double c = std::cos(a / 2), s = std::sin(a / 2);
  Eigen::Matrix2cd g;
  if (axis == 'x') g << c, C(0, -s), C(0, -s), c;
  if (axis == 'y') g << c, -s, s, c;
  if (axis == 'z') g << std::exp(C(0, -a / 2)), 0, 0, std::exp(C(0, a / 2));
  return g;
}

MatrixXcd dense_cnot(int control, int target, int n) {
  const Eigen::Index dim = Eigen::Index(1) << n;
  MatrixXcd out = MatrixXcd::Zero(dim, dim);
  for (Eigen::Index b = 0; b < dim; ++b) {
    const Eigen::Index to = (b >> control & 1) ? b ^ (Eigen::Index(1) << target) : b;
    out(to, b) = 1;
  }
  return out;
}

MatrixXcd dense_unitary(const CircuitSpec& spec) {
  const int n = spec.n_qubits;
  MatrixXcd u = MatrixXcd::Identity(Eigen::Index(1) << n, Eigen::Index(1) << n);
  int p = 0;
  for (int l = 0; l < spec.n_layers; ++l) {
    for (int q = 0; q < n; ++q)
      for (char axis : {'x', 'y', 'z'}) u = lift(dense_rotation(axis, spec.theta(p++)), q, n) * u;
    for (auto [c, t] : spec.entanglers) u = dense_cnot(c, t, n) * u;
  }
  return u;
}

VectorXcd dense_embed(const VectorXd& z) {
  const int n = static_cast<int>(z.size());
  VectorXcd psi = VectorXcd::Zero(Eigen::Index(1) << n);
  psi(0) = 1;
  for (int q = 0; q < n; ++q) psi = lift(dense_rotation('y', z(q)), q, n) * psi;
  return psi;
}

double dense_z(const VectorXcd& psi, int q) {
  double e = 0;
  for (Eigen::Index b = 0; b < psi.size(); ++b) e += ((b >> q) & 1 ? -1.0 : 1.0) * std::norm(psi(b));
  return e;
}

CircuitSpec random_spec(int n, int layers, Rng& rng, std::string_view topology = "ring") {
  auto spec = CircuitSpec::hardware_efficient(n, layers, topology);
  for (Eigen::Index k = 0; k < spec.theta.size(); ++k) spec.theta(k) = rng.uniform(-M_PI, M_PI);
  return spec;
}

VectorXd random_angles(int n, Rng& rng) {
  VectorXd z(n);
  for (int q = 0; q < n; ++q) z(q) = rng.uniform(-M_PI, M_PI);
  return z;
}

}  // namespace

TEST_CASE("embedding examples") {
  const auto zero = embed<double>(VectorXd::Zero(3));
  CHECK(std::abs(zero.amplitudes()(0) - C(1)) < 1e-15);
  CHECK(zero.amplitudes().tail(7).norm() < 1e-15);

  VectorXd pi(1);
  pi << M_PI;
  CHECK(std::abs(std::abs(embed<double>(pi).amplitudes()(1)) - 1.0) < 1e-15);

  VectorXd half(1);
  half << M_PI / 2;
  const auto s = embed<double>(half);
  CHECK(s.amplitudes()(0).real() == doctest::Approx(std::cos(M_PI / 4)));
  CHECK(s.amplitudes()(1).real() == doctest::Approx(std::sin(M_PI / 4)));

  CircuitSpec spec = CircuitSpec::hardware_efficient(3, 1);
  CHECK_THROWS_AS(embed<double>(VectorXd::Zero(2), spec), ShapeError);
  CHECK_THROWS_AS(StateVector<double>(21), ConfigError);
}

TEST_CASE("pqc examples and unitarity") {
  auto spec = CircuitSpec::hardware_efficient(4, 3);
  const auto out = apply_pqc(StateVector<double>(4), spec);
  CHECK(std::abs(out.amplitudes()(0) - C(1)) < 1e-15);

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 5));
    const auto s = random_spec(n, 1 + static_cast<int>(rng.uniform_int(0, 4)), rng);
    const auto in = embed<double>(random_angles(n, rng), s);
    const auto after = apply_pqc(in, s);
    CHECK(std::abs(after.norm_squared() - 1.0) < 1e-12);
    const auto back = apply_pqc_inverse(after, s);
    CHECK((back.amplitudes() - in.amplitudes()).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(apply_pqc(StateVector<double>(3), spec), ShapeError);
}

TEST_CASE("norm is preserved gate by gate") {
  Rng rng(2);
  const auto spec = random_spec(5, 3, rng);
  auto state = embed<double>(random_angles(5, rng), spec);
  for (const auto& g : spec.gates()) {
    apply_gate(state.amplitudes(), g, spec.theta);
    CHECK(std::abs(state.norm_squared() - 1.0) < 1e-12);
  }
}

TEST_CASE("circuit matches the dense matrix-chain oracle") {
  Rng rng(3);
  SUBCASE("n=2, one layer") {
    const auto spec = random_spec(2, 1, rng);
    const VectorXd z = random_angles(2, rng);
    const VectorXcd expected = dense_unitary(spec) * dense_embed(z);
    const auto got = apply_pqc(embed<double>(z, spec), spec);
    CHECK((got.amplitudes() - expected).cwiseAbs().maxCoeff() < 1e-13);
  }
  SUBCASE("larger circuits, all topologies") {
    for (auto topo : {"ring", "line", "none"}) {
      const auto spec = random_spec(4, 3, rng, topo);
      const VectorXd z = random_angles(4, rng);
      const VectorXcd expected = dense_unitary(spec) * dense_embed(z);
      CHECK((apply_pqc(embed<double>(z, spec), spec).amplitudes() - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("ring topology") {
  const auto ring = CircuitSpec::hardware_efficient(4, 1);
  REQUIRE(ring.entanglers.size() == 4);
  CHECK(ring.entanglers[3] == std::pair<int, int>{3, 0});
  CHECK(CircuitSpec::hardware_efficient(2, 1).entanglers.size() == 1);
  CHECK(ring.parameter_count() == 12);
  CHECK(CircuitSpec::hardware_efficient(6, 5).parameter_count() == 90);
  CHECK_THROWS_AS(CircuitSpec::hardware_efficient(3, 1, "star"), ConfigError);
  auto bad = ring;
  bad.entanglers.push_back({0, 7});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ring;
  bad.theta.resize(3);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("measurement") {
  const auto zero = StateVector<double>(1);
  CHECK(measure(zero, ObservableSet::pauli_z(1))(0) == doctest::Approx(1.0));
  VectorXd half(1);
  half << M_PI / 2;
  CHECK(std::abs(measure(embed<double>(half), ObservableSet::pauli_z(1))(0)) < 1e-15);

  Rng rng(4);
  VectorXcd amps(8);
  for (int i = 0; i < 8; ++i) amps(i) = C(rng.normal(), rng.normal());
  amps.normalize();
  const StateVector<double> s(amps);
  const auto got = measure(s, ObservableSet::pauli_z(3));
  for (int q = 0; q < 3; ++q) {
    // psi^dagger Z_q psi with Z_q as a dense matrix.
    Eigen::Matrix2cd z;
    z << 1, 0, 0, -1;
    const double expected = (amps.adjoint() * lift(z, q, 3) * amps)(0).real();
    CHECK(got(q) == doctest::Approx(expected).epsilon(1e-13));
    CHECK(std::abs(got(q)) <= 1.0);
  }
  VectorXcd off = amps * 1.001;
  CHECK_THROWS_AS(measure(StateVector<double>(off), ObservableSet::pauli_z(3)), NumericalError);
}

TEST_CASE("single precision statevectors") {
  Rng rng(5);
  const auto spec = random_spec(3, 2, rng);
  const VectorXd z = random_angles(3, rng);
  const auto d = measure(apply_pqc(embed<double>(z, spec), spec), ObservableSet::pauli_z(3));
  const auto f = apply_pqc(embed<float>(z.cast<float>(), spec), spec);
  CHECK(std::abs(f.norm_squared() - 1.0f) < 1e-5f);
  for (int q = 0; q < 3; ++q) {
    double e = 0;
    for (int b = 0; b < 8; ++b) e += ((b >> q) & 1 ? -1.0 : 1.0) * std::norm(f.amplitudes()(b));
    CHECK(e == doctest::Approx(d(q)).epsilon(1e-4));
  }
}

TEST_CASE("qnn_forward") {
  auto spec = CircuitSpec::hardware_efficient(3, 2);
  AffineMap in{Eigen::MatrixXd::Zero(3, 5), VectorXd::Zero(3)};
  AffineMap out{Eigen::MatrixXd::Random(4, 3), VectorXd::Zero(4)};
  const VectorXd y = qnn_forward(VectorXd::Zero(5), spec, in, out);
  CHECK((y - out.weight * VectorXd::Ones(3)).norm() < 1e-13);

  // Second implementation: dense matrices end to end.
  Rng rng(6);
  spec = random_spec(3, 2, rng);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) in.weight(i, j) = rng.uniform(-1, 1);
  in.bias << 0.1, -0.2, 0.3;
  out.bias << 1, 2, 3, 4;
  VectorXd x(5);
  for (int j = 0; j < 5; ++j) x(j) = rng.uniform(-2, 2);
  const VectorXd ang = (in.weight * x + in.bias).array().tanh() * M_PI;
  const VectorXcd psi = dense_unitary(spec) * dense_embed(ang);
  VectorXd h(3);
  for (int q = 0; q < 3; ++q) h(q) = dense_z(psi, q);
  CHECK((qnn_forward(x, spec, in, out) - (out.weight * h + out.bias)).norm() < 1e-12);

  // Bounded by the output weights, finite for extreme inputs.
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd big(5);
    for (int j = 0; j < 5; ++j) big(j) = rng.normal() * std::pow(10.0, rng.uniform(-3, 12));
    const VectorXd o = qnn_forward(big, spec, in, out);
    CHECK(o.allFinite());
    CHECK(((o - out.bias).array().abs() <= out.weight.cwiseAbs().rowwise().sum().array() + 1e-12).all());
  }
  AffineMap wrong{Eigen::MatrixXd::Zero(2, 5), VectorXd::Zero(2)};
  CHECK_THROWS_AS(qnn_forward(x, spec, wrong, out), ShapeError);
}

TEST_CASE("parameter shift") {
  CircuitSpec one;
  one.n_qubits = 1;
  one.n_layers = 1;
  one.embedding = {Axis::Y};
  one.theta = VectorXd::Zero(3);
  // Only the R_y angle moves: <Z> = cos(theta_y).
  const VectorXd z = VectorXd::Zero(1);
  CHECK(std::abs(param_shift_grad(z, one, 0)(1)) < 1e-15);
  one.theta(1) = M_PI / 2;
  CHECK(param_shift_grad(z, one, 0)(1) == doctest::Approx(-1.0).epsilon(1e-14));

  Rng rng(7);
  const auto spec = random_spec(3, 2, rng);
  const VectorXd a = random_angles(3, rng);
  const double h = 1e-5;
  for (int obs = 0; obs < 3; ++obs) {
    const VectorXd g = param_shift_grad(a, spec, obs);
    auto s = spec;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      s.theta(k) += h;
      const double p = expectation(a, s, obs);
      s.theta(k) -= 2 * h;
      const double m = expectation(a, s, obs);
      s.theta(k) += h;
      CHECK(std::abs(g(k) - (p - m) / (2 * h)) < 1e-5);
    }
  }
}

TEST_CASE("compiled observables reproduce direct simulation") {
  Rng rng(8);
  for (auto axis : {Axis::Y, Axis::X}) {
    auto spec = random_spec(4, 2, rng);
    spec.embedding.assign(4, axis);
    Eigen::MatrixXd angles(5, 4);
    for (int r = 0; r < 5; ++r) angles.row(r) = random_angles(4, rng).transpose();
    const Eigen::MatrixXd obs = compiled_observables(spec);
    const Eigen::MatrixXd psi = product_states(angles);
    for (int r = 0; r < 5; ++r) {
      const auto direct = measure(apply_pqc(embed<double>(angles.row(r).transpose(), spec), spec),
                                  ObservableSet::pauli_z(4));
      for (int k = 0; k < 4; ++k) {
        const double fast = psi.col(r).dot(obs.middleRows(k * 16, 16) * psi.col(r));
        CHECK(fast == doctest::Approx(direct(k)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("adjoint gradient agrees with parameter shift") {
  Rng rng(9);
  auto spec = random_spec(3, 3, rng);
  Eigen::MatrixXd angles(2, 3), w(2, 3);
  for (int r = 0; r < 2; ++r) {
    angles.row(r) = random_angles(3, rng).transpose();
    for (int q = 0; q < 3; ++q) w(r, q) = rng.uniform(-1, 1);
  }
  VectorXd expected = VectorXd::Zero(spec.theta.size());
  for (int r = 0; r < 2; ++r)
    for (int q = 0; q < 3; ++q) expected += w(r, q) * param_shift_grad(angles.row(r).transpose(), spec, q);
  const AmplitudeBatch<double> states = product_states(angles).cast<C>();
  CHECK((adjoint_theta_gradient(states, spec, w) - expected).cwiseAbs().maxCoeff() < 1e-12);
}
