#pragma once

#include "qroute/random.hpp"
#include "qroute/vrp.hpp"

namespace qroute {

inline constexpr int kExactMaxCustomers = 10;

/// From the current node, the nearest unserved customer that fits the
/// remaining load (lowest index on ties), else back to the depot.
Route nearest_neighbor(const Instance& instance);

/// Uniform choice among the feasible actions at every step.
Route random_policy(const Instance& instance, Rng& rng);

struct ExactSolution {
  Route route;
  double length = 0;
};

/// Optimal solution by dynamic programming: the cheapest single-vehicle tour
/// of every capacity-feasible customer subset (Held-Karp), then the cheapest
/// partition of all customers into such subsets. Throws RefusalError for
/// m > kExactMaxCustomers.
ExactSolution exact_small(const Instance& instance);

}  // namespace qroute
