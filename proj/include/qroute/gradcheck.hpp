#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "qroute/config.hpp"
#include "qroute/nn.hpp"

namespace qroute::gradcheck {

/// Outcome of one suite: the worst discrepancy over every checked component.
struct Result {
  std::string suite;
  long checked = 0;
  double worst = 0;
  std::string worst_label;
  double tolerance = 0;
  bool passed() const { return worst <= tolerance; }
};

/// Relative error with a floor on the scale: |a - f| / max(|a|, |f|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-4);

/// Central differences of f with respect to every trainable scalar of `store`,
/// compared with the gradients already accumulated in the store.
Result compare_with_finite_differences(nn::ParamStore& store, const std::function<double()>& f, double h,
                                       double tolerance, const std::string& suite);

/// Small model used by the end-to-end suites: m=5 instances, d_x=8, 2 heads.
Config tiny_config(Variant variant);

/// Parameter-shift vs central differences (h=1e-5) on 50 random circuits with
/// up to 6 qubits and 5 layers; absolute tolerance 1e-5.
Result param_shift_suite(std::uint64_t seed = 7);
/// Batched adjoint/ensemble theta gradient used in training vs parameter-shift.
Result adjoint_suite(std::uint64_t seed = 8);
/// d(sum of graph embedding)/d(params) on a 5-customer instance.
Result encoder_suite(Variant variant, std::uint64_t seed = 9);
/// d(value)/d(params) on a 5-customer instance.
Result critic_suite(Variant variant, std::uint64_t seed = 10);
/// d(total PPO loss)/d(params) on 2 sampled episodes.
Result ppo_suite(Variant variant, std::uint64_t seed = 11);

/// scope: qsim | encoder | critic | ppo | all. Throws ConfigError otherwise.
std::vector<Result> run(const std::string& scope, std::ostream* log = nullptr);

}  // namespace qroute::gradcheck
