#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "qroute/autograd.hpp"
#include "qroute/errors.hpp"
#include "qroute/random.hpp"

using namespace qroute;
using ag::Matrix;
using ag::Var;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1);
  return m;
}

// Checks d(sum(w .* f(inputs)))/d(inputs) against central differences.
void check_op(std::vector<Matrix> inputs, const std::function<Var(const std::vector<Var>&)>& f, Rng& rng,
              double tol = 1e-7) {
  std::vector<Var> vars;
  for (auto& m : inputs) vars.push_back(ag::parameter(m));
  const Var out = f(vars);
  const Matrix w = random_matrix(out.rows(), out.cols(), rng);
  ag::backward(ag::sum(ag::cmul(out, ag::constant(w))));
  const double h = 1e-6;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> vs;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Matrix m = inputs[j];
          if (j == k) m.data()[i] += delta;
          vs.push_back(ag::constant(m));
        }
        return f(vs).value().cwiseProduct(w).sum();
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      const double an = vars[k].grad().size() ? vars[k].grad().data()[i] : 0.0;
      CHECK(std::abs(an - fd) <= tol * std::max(1.0, std::abs(fd)));
    }
  }
}

ag::Mask random_mask(Eigen::Index r, Eigen::Index c, Rng& rng) {
  ag::Mask m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform() < 0.6;
    m(i, rng.uniform_int(0, c - 1)) = true;
  }
  return m;
}

}  // namespace

TEST_CASE("op gradients match finite differences") {
  Rng rng(1);
  const Matrix a = random_matrix(4, 3, rng), b = random_matrix(3, 5, rng), c = random_matrix(4, 3, rng);
  check_op({a, b}, [](const auto& v) { return ag::matmul(v[0], v[1]); }, rng);
  check_op({a, c}, [](const auto& v) { return ag::matmul_nt(v[0], v[1]); }, rng);
  check_op({a}, [](const auto& v) { return ag::transpose(v[0]); }, rng);
  check_op({a, c}, [](const auto& v) { return v[0] + v[1]; }, rng);
  check_op({a, c}, [](const auto& v) { return v[0] - v[1]; }, rng);
  check_op({a, c}, [](const auto& v) { return ag::cmul(v[0], v[1]); }, rng);
  check_op({a}, [](const auto& v) { return v[0] * 2.5; }, rng);
  check_op({a, random_matrix(1, 3, rng)}, [](const auto& v) { return ag::add_bias(v[0], v[1]); }, rng);
  check_op({a, random_matrix(1, 1, rng)}, [](const auto& v) { return ag::add_scalar(v[0], v[1]); }, rng);
  check_op({a, random_matrix(1, 1, rng)}, [](const auto& v) { return ag::mul_scalar(v[0], v[1]); }, rng);
  check_op({a}, [](const auto& v) { return ag::tanh(v[0]); }, rng);
  check_op({a}, [](const auto& v) { return ag::relu(v[0]); }, rng);
  check_op({a}, [](const auto& v) { return ag::leaky_relu(v[0], 0.2); }, rng);
  check_op({a}, [](const auto& v) { return ag::square(v[0]); }, rng);
  check_op({a, c}, [](const auto& v) { return ag::concat_cols({v[0], v[1]}); }, rng);
  check_op({b}, [](const auto& v) { return ag::slice_cols(v[0], 1, 3); }, rng);
  check_op({a}, [](const auto& v) { return ag::gather_rows(v[0], {3, 0, 3, 1}); }, rng);
  check_op({random_matrix(1, 3, rng)}, [](const auto& v) { return ag::repeat_rows(v[0], 4); }, rng);
  check_op({a}, [](const auto& v) { return ag::reshape(v[0], 2, 6); }, rng);
  check_op({a, c}, [](const auto& v) { return ag::pair_sum(v[0], v[1]); }, rng);
  check_op({a}, [](const auto& v) { return ag::shift_rows(v[0], 1); }, rng);
  check_op({a}, [](const auto& v) { return ag::shift_rows(v[0], -2); }, rng);
  check_op({a}, [](const auto& v) { return ag::sum(v[0]); }, rng);
  check_op({a}, [](const auto& v) { return ag::mean(v[0]); }, rng);
  check_op({a}, [](const auto& v) { return ag::mean_rows(v[0]); }, rng);
  check_op({a}, [](const auto& v) { return ag::softmax_rows(v[0]); }, rng);
  const ag::Mask mask = random_mask(4, 3, rng);
  check_op({a}, [&](const auto& v) { return ag::masked_softmax_rows(v[0], mask); }, rng);
  std::vector<int> allowed_pick;
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    Eigen::Index j = 0;
    while (!mask(i, j)) ++j;
    allowed_pick.push_back(static_cast<int>(j));
  }
  check_op({a}, [&](const auto& v) { return ag::pick(ag::masked_log_softmax_rows(v[0], mask), allowed_pick); }, rng);
  check_op({a}, [&](const auto& v) { return ag::masked_entropy_rows(ag::masked_log_softmax_rows(v[0], mask), mask); },
           rng);
}

TEST_CASE("masked distributions") {
  ag::Mask mask(1, 4);
  mask << true, false, true, false;
  Matrix x(1, 4);
  x << 0.3, 100.0, 0.3, -5.0;
  const Var p = ag::masked_softmax_rows(ag::constant(x), mask);
  CHECK(p.value()(0, 1) == 0.0);
  CHECK(p.value()(0, 3) == 0.0);
  CHECK(p.value()(0, 0) == doctest::Approx(0.5));
  const Var lp = ag::masked_log_softmax_rows(ag::constant(x), mask);
  CHECK(std::isinf(lp.value()(0, 1)));
  CHECK(lp.value()(0, 2) == doctest::Approx(std::log(0.5)));
  const Var h = ag::masked_entropy_rows(lp, mask);
  CHECK(h.value()(0, 0) == doctest::Approx(std::log(2.0)));

  ag::Mask none(1, 4);
  none.setConstant(false);
  CHECK_THROWS_AS(ag::masked_softmax_rows(ag::constant(x), none), NoFeasibleActionError);
}

TEST_CASE("graph bookkeeping") {
  Var a = ag::parameter(Matrix::Constant(2, 2, 1.0));
  {
    ag::NoGradGuard guard;
    CHECK_FALSE(ag::grad_enabled());
    const Var b = ag::matmul(a, a);
    CHECK_FALSE(b.requires_grad());
  }
  CHECK(ag::grad_enabled());
  // A value used twice receives both contributions.
  const Var y = ag::sum(a + a);
  ag::backward(y);
  CHECK(a.grad().isApproxToConstant(2.0));
  a.zero_grad();
  CHECK(a.grad().size() == 0);
  CHECK_THROWS_AS(ag::backward(a), ShapeError);
  CHECK_THROWS_AS(ag::matmul(a, ag::constant(Matrix::Zero(3, 1))), ShapeError);
}
