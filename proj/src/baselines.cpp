#include "qroute/baselines.hpp"

#include <limits>

#include "qroute/env.hpp"
#include "qroute/errors.hpp"

namespace qroute {

Route nearest_neighbor(const Instance& instance) {
  EnvState s = reset(instance);
  const int n = static_cast<int>(instance.node_count());
  while (!s.terminal()) {
    const auto allowed = feasible_mask(s);
    int best = -1;
    for (int j = 1; j < n; ++j) {
      if (!allowed[j]) continue;
      if (best < 0 || instance.distance(s.current_node, j) < instance.distance(s.current_node, best)) best = j;
    }
    s = step(s, best < 0 ? 0 : best).state;
  }
  return Route(s.partial);
}

Route random_policy(const Instance& instance, Rng& rng) {
  EnvState s = reset(instance);
  std::vector<int> choices;
  while (!s.terminal()) {
    const auto allowed = feasible_mask(s);
    choices.clear();
    for (int j = 0; j < static_cast<int>(allowed.size()); ++j)
      if (allowed[j]) choices.push_back(j);
    s = step(s, choices[rng.uniform_int(0, static_cast<std::int64_t>(choices.size()) - 1)]).state;
  }
  return Route(s.partial);
}

ExactSolution exact_small(const Instance& instance) {
  const int m = static_cast<int>(instance.customer_count());
  if (m > kExactMaxCustomers) throw RefusalError("exact_small handles at most 10 customers");
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t full = (std::size_t(1) << m) - 1;

  // path[S][j]: shortest depot -> (all of S) -> customer j path ending at j (j in S).
  std::vector<double> path((full + 1) * m, inf);
  std::vector<int> prev((full + 1) * m, -1);
  std::vector<int> load(full + 1, 0);
  for (std::size_t s = 1; s <= full; ++s)
    for (int j = 0; j < m; ++j)
      if (s >> j & 1) {
        load[s] = load[s & ~(std::size_t(1) << j)] + instance.demands()[j + 1];
        break;
      }
  for (int j = 0; j < m; ++j) path[(std::size_t(1) << j) * m + j] = instance.distance(0, j + 1);
  for (std::size_t s = 1; s <= full; ++s) {
    if (load[s] > instance.capacity()) continue;
    for (int j = 0; j < m; ++j) {
      const double here = path[s * m + j];
      if (!(s >> j & 1) || here == inf) continue;
      for (int k = 0; k < m; ++k) {
        if (s >> k & 1) continue;
        const std::size_t t = s | (std::size_t(1) << k);
        if (load[t] > instance.capacity()) continue;
        const double cand = here + instance.distance(j + 1, k + 1);
        if (cand < path[t * m + k]) {
          path[t * m + k] = cand;
          prev[t * m + k] = j;
        }
      }
    }
  }
  // tour[S]: best closed single-vehicle tour through S, with its last customer.
  std::vector<double> tour(full + 1, inf);
  std::vector<int> tour_end(full + 1, -1);
  for (std::size_t s = 1; s <= full; ++s) {
    if (load[s] > instance.capacity()) continue;
    for (int j = 0; j < m; ++j) {
      if (!(s >> j & 1)) continue;
      const double cand = path[s * m + j] + instance.distance(j + 1, 0);
      if (cand < tour[s]) {
        tour[s] = cand;
        tour_end[s] = j;
      }
    }
  }
  // best[S]: cheapest partition of S into tours; the tour holding the lowest
  // customer of S is enumerated explicitly to avoid counting orders twice.
  std::vector<double> best(full + 1, inf);
  std::vector<std::size_t> pick(full + 1, 0);
  best[0] = 0;
  for (std::size_t s = 1; s <= full; ++s) {
    const std::size_t low = s & (~s + 1);
    const std::size_t rest = s & ~low;
    for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
      const std::size_t part = sub | low;
      if (tour[part] < inf && best[s & ~part] < inf) {
        const double cand = tour[part] + best[s & ~part];
        if (cand < best[s]) {
          best[s] = cand;
          pick[s] = part;
        }
      }
      if (sub == 0) break;
    }
  }
  if (best[full] == inf) throw InternalError("no feasible partition found");

  std::vector<int> seq{0};
  for (std::size_t s = full; s != 0; s &= ~pick[s]) {
    std::size_t part = pick[s];
    std::vector<int> rev;
    for (int j = tour_end[part]; j >= 0;) {
      rev.push_back(j + 1);
      const int p = prev[part * m + j];
      part &= ~(std::size_t(1) << j);
      j = p;
    }
    seq.insert(seq.end(), rev.rbegin(), rev.rend());
    seq.push_back(0);
  }
  if (m == 0) seq.push_back(0);
  Route route(seq);
  return {route, route_length(instance, route)};
}

}  // namespace qroute
