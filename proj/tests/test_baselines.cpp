#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "helpers.hpp"
#include "qroute/baselines.hpp"
#include "qroute/errors.hpp"

using namespace qroute;
using qroute::test::make_instance;

namespace {

// Exhaustive oracle: every customer order combined with every way of cutting
// it into trips; infeasible cuts are skipped.
double brute_force(const Instance& inst) {
  const int m = static_cast<int>(inst.customer_count());
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 1);
  double best = std::numeric_limits<double>::infinity();
  do {
    for (unsigned cuts = 0; cuts < (1u << (m - 1)); ++cuts) {
      double len = 0;
      int load = 0, prev = 0;
      bool ok = true;
      for (int t = 0; t < m && ok; ++t) {
        if (t > 0 && (cuts >> (t - 1) & 1)) {
          len += inst.distance(prev, 0);
          prev = 0;
          load = 0;
        }
        load += inst.demands()[perm[t]];
        ok = load <= inst.capacity();
        len += inst.distance(prev, perm[t]);
        prev = perm[t];
      }
      if (ok) best = std::min(best, len + inst.distance(prev, 0));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

TEST_CASE("nearest neighbor") {
  const auto one = make_instance({{0, 0}, {0.5, 0.5}}, {0, 3}, 9);
  CHECK(nearest_neighbor(one).sequence == std::vector<int>{0, 1, 0});

  const auto line = make_instance({{0, 0}, {0.4, 0}, {0.1, 0}, {0.3, 0}, {0.2, 0}}, {0, 1, 1, 1, 1}, 30);
  CHECK(nearest_neighbor(line).sequence == std::vector<int>{0, 2, 4, 3, 1, 0});

  Rng rng(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto inst = generate_instance(1 + static_cast<int>(rng.uniform_int(0, 29)), 30, rng);
    CHECK(validate_solution(inst, nearest_neighbor(inst)).feasible);
  }
}

TEST_CASE("random policy") {
  const auto one = make_instance({{0, 0}, {0.5, 0.5}}, {0, 3}, 9);
  Rng r0(1);
  CHECK(random_policy(one, r0).sequence == std::vector<int>{0, 1, 0});

  Rng a(9), b(9);
  Rng gen(4);
  const auto inst = generate_instance(15, 30, gen);
  CHECK(random_policy(inst, a) == random_policy(inst, b));

  // Mean random length exceeds the nearest-neighbour length by more than 3 sigma.
  Rng rng(10);
  std::vector<double> lens;
  for (int i = 0; i < 1000; ++i) {
    const auto route = random_policy(inst, rng);
    CHECK(validate_solution(inst, route).feasible);
    lens.push_back(route_length(inst, route));
  }
  const double mean = std::accumulate(lens.begin(), lens.end(), 0.0) / lens.size();
  double var = 0;
  for (double l : lens) var += (l - mean) * (l - mean);
  const double se = std::sqrt(var / (lens.size() - 1) / lens.size());
  CHECK(mean - route_length(inst, nearest_neighbor(inst)) > 3 * se);
}

TEST_CASE("exact_small") {
  const auto one = make_instance({{0, 0}, {0.3, 0.4}}, {0, 5}, 9);
  const auto e1 = exact_small(one);
  CHECK(e1.length == doctest::Approx(2 * 0.5).epsilon(1e-15));
  CHECK(e1.route.sequence == std::vector<int>{0, 1, 0});

  const double h = std::sqrt(3.0) / 2;
  const auto tri = make_instance({{0, 0}, {1, 0}, {0.5, h}, {-0.5, h}}, {0, 4, 4, 4}, 8);
  const auto e3 = exact_small(tri);
  CHECK(e3.length == doctest::Approx(brute_force(tri)).epsilon(1e-12));
  CHECK(validate_solution(tri, e3.route).feasible);

  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 1 + static_cast<int>(rng.uniform_int(0, 6));
    const auto inst = generate_instance(m, static_cast<int>(rng.uniform_int(9, 25)), rng);
    const auto e = exact_small(inst);
    CHECK(validate_solution(inst, e.route).feasible);
    CHECK(std::abs(e.length - route_length(inst, e.route)) < 1e-12);
    CHECK(std::abs(e.length - brute_force(inst)) < 1e-9);
  }

  Rng big(2);
  CHECK_THROWS_AS(exact_small(generate_instance(11, 30, big)), RefusalError);
  CHECK_NOTHROW(exact_small(generate_instance(10, 30, big)));
}

TEST_CASE("exact never loses to heuristics or random routes") {
  Rng rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto inst = generate_instance(7, 20, rng);
    CHECK(exact_small(inst).length <= route_length(inst, nearest_neighbor(inst)) + 1e-12);
  }
  const auto inst = generate_instance(8, 20, rng);
  const double opt = exact_small(inst).length;
  for (int i = 0; i < 1000; ++i) CHECK(opt <= route_length(inst, random_policy(inst, rng)) + 1e-12);
}
