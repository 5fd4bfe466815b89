#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "helpers.hpp"
#include "qroute/errors.hpp"
#include "qroute/vrp.hpp"

using namespace qroute;
using qroute::test::make_instance;

namespace {

// Independent checker: builds arc multiplicities x_ij from the sequence and
// tests visit-once and per-trip load directly.
bool arc_feasible(const Instance& inst, const std::vector<int>& seq) {
  const int n = static_cast<int>(inst.node_count());
  if (seq.empty() || seq.front() != 0 || seq.back() != 0) return false;
  std::map<std::pair<int, int>, int> x;
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    if (seq[t] < 0 || seq[t] >= n || seq[t + 1] < 0 || seq[t + 1] >= n) return false;
    ++x[{seq[t], seq[t + 1]}];
  }
  for (int j = 1; j < n; ++j) {
    int in = 0, out = 0;
    for (const auto& [arc, k] : x) {
      if (arc.second == j) in += k;
      if (arc.first == j) out += k;
    }
    if (in != 1 || out != 1) return false;
  }
  int load = 0;
  for (int v : seq) {
    load = v == 0 ? 0 : load + inst.demands()[v];
    if (load > inst.capacity()) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("route length examples") {
  const auto a = make_instance({{0, 0}, {0.3, 0.4}}, {0, 1}, 10);
  CHECK(route_length(a, Route({0, 1, 0})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(route_length(a, Route({0})) == 0.0);

  const auto sq = make_instance({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {0, 1, 1, 1}, 10);
  CHECK(route_length(sq, Route({0, 1, 2, 3, 0})) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK_THROWS_AS(route_length(sq, Route({0, 7, 0})), InvalidRouteError);
}

TEST_CASE("route structure is enforced") {
  CHECK_THROWS_AS(Route({1, 0}), InvalidRouteError);
  CHECK_THROWS_AS(Route({0, 1}), InvalidRouteError);
  CHECK_THROWS_AS(Route({0, 1, 1, 0}), InvalidRouteError);
  CHECK_THROWS_AS(Route(std::vector<int>{}), InvalidRouteError);
}

TEST_CASE("instance invariants") {
  CHECK_THROWS_AS(make_instance({{0, 0}, {1, 1}}, {0, 0}, 10), DomainError);
  CHECK_THROWS_AS(make_instance({{0, 0}, {1, 1}}, {1, 1}, 10), DomainError);
  CHECK_THROWS_AS(make_instance({{0, 0}, {1, 1}}, {0, 11}, 10), DomainError);
  CHECK_THROWS_AS(make_instance({{0, 0}}, {0}, 10), DomainError);
  CHECK_THROWS_AS(make_instance({{0, 0}, {1, 1}}, {0, 1, 2}, 10), DomainError);
}

TEST_CASE("reversal leaves the length unchanged") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = generate_instance(8, 20, rng);
    std::vector<int> perm{1, 2, 3, 4, 5, 6, 7, 8};
    rng.shuffle(perm.begin(), perm.end());
    std::vector<int> seq{0};
    for (int v : perm) {
      seq.push_back(v);
      if (rng.uniform() < 0.3) seq.push_back(0);
    }
    if (seq.back() != 0) seq.push_back(0);
    std::vector<int> rev(seq.rbegin(), seq.rend());
    CHECK(route_length(inst, Route(seq)) == doctest::Approx(route_length(inst, Route(rev))).epsilon(1e-13));
  }
}

TEST_CASE("validate_solution examples") {
  SUBCASE("capacity violation") {
    const auto inst = make_instance({{0, 0}, {0.1, 0}, {0.2, 0}, {0.3, 0}, {0.4, 0}}, {0, 9, 8, 7, 7}, 30);
    const auto r = validate_solution(inst, Route({0, 1, 2, 3, 4, 0}));
    CHECK_FALSE(r.feasible);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == Violation::Kind::CapacityExceeded);
    CHECK(r.violations[0].segment == 0);
  }
  SUBCASE("customer visited twice") {
    const auto inst = make_instance({{0, 0}, {0.1, 0}, {0.2, 0}}, {0, 1, 1}, 10);
    const auto r = validate_solution(inst, Route({0, 1, 2, 1, 0}));
    CHECK_FALSE(r.feasible);
    CHECK(std::any_of(r.violations.begin(), r.violations.end(),
                      [](const Violation& v) { return v.kind == Violation::Kind::RepeatedCustomer && v.node == 1; }));
  }
  SUBCASE("hand-built feasible solution with two trips") {
    const auto inst = make_instance({{0, 0}, {0.1, 0.5}, {0.2, 0.6}, {0.7, 0.1}, {0.8, 0.2}}, {0, 4, 5, 6, 3}, 10);
    // Trips {1, 2} (load 9) and {3, 4} (load 9).
    const auto r = validate_solution(inst, Route({0, 1, 2, 0, 3, 4, 0}));
    CHECK(r.feasible);
    CHECK(r.violations.empty());
    CHECK(r.vehicle_count == 2);
    const auto segs = route_segments(Route({0, 1, 2, 0, 3, 4, 0}));
    REQUIRE(segs.size() == 2);
    CHECK(segs[0] == std::vector<int>{1, 2});
    CHECK(segs[1] == std::vector<int>{3, 4});
  }
  SUBCASE("missing customer and invalid node are both reported") {
    const auto inst = make_instance({{0, 0}, {0.1, 0}, {0.2, 0}}, {0, 1, 1}, 10);
    const auto r = validate_solution(inst, Route({0, 1, 5, 0}));
    CHECK_FALSE(r.feasible);
    CHECK(r.violations.size() >= 2);
  }
}

TEST_CASE("validator agrees with an arc-based checker on random routes") {
  Rng rng(11);
  int feasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 2 + static_cast<int>(rng.uniform_int(0, 6));
    const auto inst = generate_instance(m, 12, rng);
    std::vector<int> seq{0};
    const int len = static_cast<int>(rng.uniform_int(1, 2 * m + 2));
    for (int t = 0; t < len; ++t) {
      int v = static_cast<int>(rng.uniform_int(0, m));
      if (rng.uniform() < 0.5) {
        // Bias towards permutations so feasible routes occur too.
        std::vector<int> left;
        for (int j = 1; j <= m; ++j)
          if (std::find(seq.begin(), seq.end(), j) == seq.end()) left.push_back(j);
        if (!left.empty()) v = left[rng.uniform_int(0, static_cast<std::int64_t>(left.size()) - 1)];
      }
      if (v != seq.back()) seq.push_back(v);
    }
    if (seq.back() != 0) seq.push_back(0);
    if (seq.size() == 2 && seq[1] == 0) seq.pop_back();
    const auto report = validate_solution(inst, Route(seq));
    CHECK(report.feasible == arc_feasible(inst, seq));
    CHECK(report.feasible == report.violations.empty());
    if (report.feasible) {
      ++feasible;
      int departures = 0;
      for (std::size_t t = 0; t + 1 < seq.size(); ++t) departures += seq[t] == 0 && seq[t + 1] != 0;
      CHECK(report.vehicle_count == departures);
    }
  }
  CHECK(feasible > 20);
}

TEST_CASE("instance generation") {
  Rng a(42), b(42);
  const auto i1 = generate_instance(20, 30, a);
  CHECK(i1.node_count() == 21);
  CHECK(i1 == generate_instance(20, 30, b));
  Rng c(1);
  const auto tiny = generate_instance(1, 9, c);
  CHECK(tiny.node_count() == 2);
  CHECK_THROWS_AS(generate_instance(5, 8, c), ConfigError);
  CHECK_THROWS_AS(generate_instance(0, 30, c), ConfigError);
  for (int i = 0; i <= 20; ++i) {
    CHECK(i1.coords()(i, 0) >= 0.0);
    CHECK(i1.coords()(i, 0) < 1.0);
    CHECK(i1.coords()(i, 1) >= 0.0);
    CHECK(i1.coords()(i, 1) < 1.0);
  }
}

TEST_CASE("demand histogram is uniform on 1..9") {
  Rng rng(2024);
  std::vector<long> hist(10, 0);
  long draws = 0;
  while (draws < 100000) {
    const auto inst = generate_instance(100, 30, rng);
    for (int i = 1; i <= 100; ++i) ++hist[inst.demands()[i]];
    draws += 100;
  }
  CHECK(hist[0] == 0);
  const double p = 1.0 / 9.0;
  const double expected = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int d = 1; d <= 9; ++d) CHECK(std::abs(hist[d] - expected) < 3 * sigma);
}

TEST_CASE("optimality gap") {
  CHECK(optimality_gap(21.49, 20.82) == doctest::Approx(3.218).epsilon(1e-3));
  CHECK(optimality_gap(11.82, 11.54) == doctest::Approx(2.426).epsilon(1e-3));
  CHECK(optimality_gap(7.5, 7.5) == 0.0);
  CHECK_THROWS_AS(optimality_gap(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(optimality_gap(1.0, -2.0), DomainError);
}

TEST_CASE("instance files round trip") {
  const auto path = qroute::test::tmp_path("roundtrip.jsonl");
  const auto insts = generate_instances(7, 15, 10, 3);
  write_instances(path, insts);
  CHECK(read_instances(path) == insts);

  std::ofstream(path) << "";
  CHECK(read_instances(path).empty());

  std::ofstream(path) << instance_to_json_line(insts[0]) << "\n"
                      << R"({"coords":[[0,0],[0.5,0.5]],"demands":[0,0],"capacity":10})" << "\n";
  try {
    read_instances(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("solution files round trip") {
  const auto path = qroute::test::tmp_path("solutions.jsonl");
  std::vector<SolutionRecord> sols{{0, Route({0, 1, 2, 0}), 1.25}, {1, Route({0, 2, 0, 1, 0}), 2.5}};
  write_solutions(path, sols);
  const auto back = read_solutions(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].route == sols[1].route);
  CHECK(back[1].length == 2.5);
}
