#include <doctest.h>

#include <cmath>

#include "qroute/errors.hpp"
#include "qroute/nn.hpp"
#include "qroute/qnn.hpp"

using namespace qroute;
using ag::Matrix;

TEST_CASE("linear layer") {
  nn::ParamStore store;
  Rng rng(1);
  nn::Linear lin(store, "lin", 3, 2, true, rng);
  CHECK(store.count().classical == 8);
  CHECK(lin.weight.value().cwiseAbs().maxCoeff() <= 1 / std::sqrt(3.0));
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  const Matrix expected = (x * lin.weight.value().transpose()).rowwise() + lin.bias.value().row(0);
  CHECK((lin(ag::constant(x)).value() - expected).norm() < 1e-14);
  nn::Linear nob(store, "nob", 3, 2, false, rng);
  CHECK(store.count().classical == 14);
  CHECK_FALSE(static_cast<bool>(nob.bias));
}

TEST_CASE("batch normalization") {
  nn::ParamStore store;
  nn::BatchNorm bn(store, "bn", 2, 0.1);
  Matrix x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  SUBCASE("training statistics") {
    const Matrix y = bn(ag::constant(x), nn::BnMode::Train).value();
    CHECK(y.colwise().mean().norm() < 1e-12);
    const Eigen::RowVectorXd var = y.array().square().colwise().mean();
    CHECK(var(0) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(bn.running_mean.value().isZero());
  }
  SUBCASE("tracking updates running statistics") {
    bn(ag::constant(x), nn::BnMode::TrainTrack);
    CHECK(bn.running_mean.value()(0, 0) == doctest::Approx(0.1 * 2.5));
    // Unbiased variance of {1,2,3,4} is 5/3.
    CHECK(bn.running_var.value()(0, 0) == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
  }
  SUBCASE("inference with unit statistics is scale and shift") {
    bn.gamma.mutable_value() << 2.0, 3.0;
    bn.beta.mutable_value() << -1.0, 0.5;
    const Matrix y = bn(ag::constant(x), nn::BnMode::Eval).value();
    const double s = 1 / std::sqrt(1 + bn.eps);
    CHECK(y(2, 0) == doctest::Approx(2.0 * 3 * s - 1.0));
    CHECK(y(1, 1) == doctest::Approx(3.0 * 20 * s + 0.5));
  }
  SUBCASE("a single row cannot be normalized in training") {
    CHECK_THROWS_AS(bn(ag::constant(x.topRows(1)), nn::BnMode::Train), ShapeError);
    CHECK_NOTHROW(bn(ag::constant(x.topRows(1)), nn::BnMode::Eval));
  }
  SUBCASE("gradient") {
    Rng rng(3);
    Matrix in(5, 2);
    for (Eigen::Index i = 0; i < in.size(); ++i) in.data()[i] = rng.normal();
    Matrix w(5, 2);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
    bn.gamma.mutable_value() << 1.5, -0.7;
    const ag::Var xv = ag::parameter(in);
    ag::backward(ag::sum(ag::cmul(bn(xv, nn::BnMode::Train), ag::constant(w))));
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < in.size(); ++i) {
      Matrix p = in, m = in;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (bn(ag::constant(p), nn::BnMode::Train).value().cwiseProduct(w).sum() -
                         bn(ag::constant(m), nn::BnMode::Train).value().cwiseProduct(w).sum()) /
                        (2 * h);
      CHECK(xv.grad().data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("adam step") {
  nn::ParamStore store;
  ag::Var p = store.add("p", Matrix::Constant(1, 2, 1.0));
  nn::Adam adam(store, 0.1, 0.0);
  p.grad_buffer() << 0.5, -2.0;
  adam.step();
  // First bias-corrected step moves each coordinate by lr * sign(g).
  CHECK(p.value()(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(p.value()(0, 1) == doctest::Approx(1.1).epsilon(1e-7));

  nn::Adam clipped(store, 0.1, 1.0);
  store.zero_grad();
  p.grad_buffer() << 3.0, 4.0;
  CHECK(clipped.step() == doctest::Approx(5.0));
  p.grad_buffer() << std::nan(""), 0.0;
  CHECK_THROWS_AS(clipped.step(), NumericalError);
}

TEST_CASE("flat parameter views") {
  nn::ParamStore store;
  store.add("a", Matrix::Constant(2, 2, 1.0));
  store.add("b", Matrix::Constant(1, 3, 2.0), nn::ParamKind::Quantum);
  CHECK(store.count().classical == 4);
  CHECK(store.count().quantum == 3);
  Eigen::VectorXd v = store.flat_values();
  CHECK(v.size() == 7);
  v(6) = -1;
  store.set_flat_values(v);
  CHECK(store.find("b").value()(0, 2) == -1);
}

TEST_CASE("qnn layer matches the reference forward and counts its angles as quantum") {
  nn::ParamStore store;
  Rng rng(4);
  QsimConfig q;
  q.n_qubits = 3;
  q.n_layers = 2;
  nn::QnnLayer layer(store, "qnn", 5, 2, 2, q, rng);
  CHECK(store.count().quantum == 2 * 18);
  CHECK(store.count().classical == (5 * 3 + 3) + (6 * 2 + 2));

  Matrix x(3, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  const Matrix y = layer(ag::constant(x)).value();
  qsim::AffineMap in{layer.in_proj.weight.value(), layer.in_proj.bias.value().row(0).transpose()};
  for (int r = 0; r < 3; ++r) {
    Eigen::VectorXd h(6);
    for (int c = 0; c < 2; ++c) {
      qsim::AffineMap id{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)};
      h.segment(c * 3, 3) = qsim::qnn_forward(x.row(r).transpose(), layer.spec(c), in, id);
    }
    const Eigen::VectorXd expected =
        layer.out_proj.weight.value() * h + layer.out_proj.bias.value().row(0).transpose();
    CHECK((y.row(r).transpose() - expected).norm() < 1e-12);
  }
}
