#include "qroute/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qroute/errors.hpp"
#include "qroute/model.hpp"
#include "qroute/ppo.hpp"
#include "qroute/qsim.hpp"

namespace qroute::gradcheck {

namespace {

constexpr double kEndToEndStep = 1e-5;
constexpr double kEndToEndTolerance = 1e-4;

void note(Result& r, double err, const std::string& label) {
  if (std::isnan(err)) err = std::numeric_limits<double>::infinity();
  if (r.checked++ == 0 || err > r.worst) {
    r.worst = err;
    r.worst_label = label;
  }
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

Result compare_with_finite_differences(nn::ParamStore& store, const std::function<double()>& f, double h,
                                       double tolerance, const std::string& suite) {
  Result r;
  r.suite = suite;
  r.tolerance = tolerance;
  for (const auto& p : store.params()) {
    ag::Var var = p.var;
    const ag::Matrix analytic = var.grad().size() ? var.grad() : ag::Matrix::Zero(var.rows(), var.cols());
    for (Eigen::Index i = 0; i < var.value().size(); ++i) {
      double& x = var.mutable_value().data()[i];
      const double saved = x;
      x = saved + h;
      const double plus = f();
      x = saved - h;
      const double minus = f();
      x = saved;
      note(r, relative_error(analytic.data()[i], (plus - minus) / (2 * h)), p.name + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

Config tiny_config(Variant variant) {
  Config c;
  c.instance.m = 5;
  c.instance.capacity = 15;
  c.encoder.d_x = 8;
  c.encoder.variant = variant;
  c.decoder.heads = 2;
  c.ppo.seed = 3;
  c.validate();
  return c;
}

Result param_shift_suite(std::uint64_t seed) {
  Result r;
  r.suite = "qsim/parameter-shift";
  r.tolerance = 1e-5;
  Rng rng(seed);
  const double h = 1e-5;
  for (int c = 0; c < 50; ++c) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 5));
    const int layers = 1 + static_cast<int>(rng.uniform_int(0, 4));
    auto spec = qsim::CircuitSpec::hardware_efficient(n, layers, "ring");
    for (Eigen::Index k = 0; k < spec.theta.size(); ++k) spec.theta(k) = rng.uniform(-M_PI, M_PI);
    Eigen::VectorXd z(n);
    for (int q = 0; q < n; ++q) z(q) = rng.uniform(-M_PI, M_PI);
    const int obs = static_cast<int>(rng.uniform_int(0, n - 1));
    const Eigen::VectorXd shift = qsim::param_shift_grad(z, spec, obs);
    auto shifted = spec;
    for (Eigen::Index k = 0; k < spec.theta.size(); ++k) {
      shifted.theta(k) = spec.theta(k) + h;
      const double plus = qsim::expectation(z, shifted, obs);
      shifted.theta(k) = spec.theta(k) - h;
      const double minus = qsim::expectation(z, shifted, obs);
      shifted.theta(k) = spec.theta(k);
      note(r, std::abs(shift(k) - (plus - minus) / (2 * h)),
           "circuit " + std::to_string(c) + " theta[" + std::to_string(k) + "]");
    }
  }
  return r;
}

Result adjoint_suite(std::uint64_t seed) {
  Result r;
  r.suite = "qsim/adjoint";
  r.tolerance = 1e-9;
  Rng rng(seed);
  for (int c = 0; c < 20; ++c) {
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 5));
    const int layers = static_cast<int>(rng.uniform_int(1, 5));
    auto spec = qsim::CircuitSpec::hardware_efficient(n, layers, c % 2 ? "ring" : "line");
    if (c % 3 == 0) spec.embedding.assign(n, qsim::Axis::X);
    for (Eigen::Index k = 0; k < spec.theta.size(); ++k) spec.theta(k) = rng.uniform(-M_PI, M_PI);
    const int samples = 3;
    Eigen::MatrixXd angles(samples, n), weights(samples, n);
    for (int s = 0; s < samples; ++s)
      for (int q = 0; q < n; ++q) {
        angles(s, q) = rng.uniform(-M_PI, M_PI);
        weights(s, q) = rng.uniform(-1, 1);
      }
    // Reference: weighted sum of parameter-shift gradients of every expectation.
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(spec.theta.size());
    for (int s = 0; s < samples; ++s)
      for (int q = 0; q < n; ++q)
        expected += weights(s, q) * qsim::param_shift_grad(angles.row(s).transpose(), spec, q);
    const Eigen::MatrixXd psi = qsim::product_states(angles);
    std::vector<Eigen::MatrixXd> densities(n, Eigen::MatrixXd::Zero(psi.rows(), psi.rows()));
    for (int q = 0; q < n; ++q) densities[q] = psi * weights.col(q).asDiagonal() * psi.transpose();
    const Eigen::VectorXd got = qsim::ensemble_theta_gradient(spec, densities);
    for (Eigen::Index k = 0; k < got.size(); ++k)
      note(r, std::abs(got(k) - expected(k)), "circuit " + std::to_string(c) + " theta[" + std::to_string(k) + "]");
  }
  return r;
}

Result encoder_suite(Variant variant, std::uint64_t seed) {
  const Config cfg = tiny_config(variant);
  Model model(cfg);
  Rng rng(seed);
  const Instance inst = generate_instance(cfg.instance.m, cfg.instance.capacity, rng);
  auto f = [&] {
    ag::NoGradGuard guard;
    return model.encoder(inst, nn::BnMode::Train).graph.value().sum();
  };
  model.store().zero_grad();
  ag::backward(ag::sum(model.encoder(inst, nn::BnMode::Train).graph));
  model.store().finalize_gradients();
  const std::string name = variant == Variant::Quantum ? "encoder/quantum" : "encoder/classical";
  return compare_with_finite_differences(model.store(), f, kEndToEndStep, kEndToEndTolerance, name);
}

Result critic_suite(Variant variant, std::uint64_t seed) {
  const Config cfg = tiny_config(variant);
  Model model(cfg);
  Rng rng(seed);
  const Instance inst = generate_instance(cfg.instance.m, cfg.instance.capacity, rng);
  auto f = [&] {
    ag::NoGradGuard guard;
    return model.critic(model.encoder(inst, nn::BnMode::Train)).scalar();
  };
  model.store().zero_grad();
  ag::backward(model.critic(model.encoder(inst, nn::BnMode::Train)));
  model.store().finalize_gradients();
  const std::string name = variant == Variant::Quantum ? "critic/quantum" : "critic/classical";
  return compare_with_finite_differences(model.store(), f, kEndToEndStep, kEndToEndTolerance, name);
}

Result ppo_suite(Variant variant, std::uint64_t seed) {
  const Config cfg = tiny_config(variant);
  Model model(cfg);
  const std::vector<Instance> pool = generate_instances(cfg.instance.m, cfg.instance.capacity, 2, seed);
  RolloutBuffer buffer = collect(model, pool, {0, 1}, {seed, 0, 0, 1});
  normalize_rewards(buffer);
  compute_advantages(buffer);
  // Move the first record off ratio 1 so both clip branches are exercised.
  buffer.records[0].old_log_prob -= 0.5;
  const std::vector<int> all{0, 1};
  auto f = [&] { return minibatch_loss(model, buffer, all, nn::BnMode::Train, false).total; };
  model.store().zero_grad();
  minibatch_loss(model, buffer, all, nn::BnMode::Train, true);
  const std::string name = variant == Variant::Quantum ? "ppo/quantum" : "ppo/classical";
  return compare_with_finite_differences(model.store(), f, kEndToEndStep, kEndToEndTolerance, name);
}

std::vector<Result> run(const std::string& scope, std::ostream* log) {
  static const std::vector<std::string> scopes{"qsim", "encoder", "critic", "ppo", "all"};
  if (std::find(scopes.begin(), scopes.end(), scope) == scopes.end())
    throw ConfigError("unknown gradcheck scope '" + scope + "' (expected qsim, encoder, critic, ppo or all)");
  std::vector<Result> out;
  auto add = [&](Result r) {
    if (log)
      *log << (r.passed() ? "ok   " : "FAIL ") << r.suite << ": " << r.checked << " components, worst " << r.worst
           << " at " << r.worst_label << " (tolerance " << r.tolerance << ")\n";
    out.push_back(std::move(r));
  };
  const bool all = scope == "all";
  if (all || scope == "qsim") {
    add(param_shift_suite());
    add(adjoint_suite());
  }
  for (Variant v : {Variant::Classical, Variant::Quantum}) {
    if (all || scope == "encoder") add(encoder_suite(v));
    if (all || scope == "critic") add(critic_suite(v));
    if (all || scope == "ppo") add(ppo_suite(v));
  }
  return out;
}

}  // namespace qroute::gradcheck
