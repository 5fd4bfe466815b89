#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qroute/random.hpp"

namespace qroute {

/// A CVRP instance. Node 0 is the depot; nodes 1..m are customers.
/// Coordinates live in the unit square and distances are Euclidean.
class Instance {
 public:
  Instance() = default;

  /// Throws DomainError when the invariants (matching lengths, depot demand 0,
  /// customer demands in [1, capacity], m >= 1) do not hold.
  Instance(Eigen::MatrixX2d coords, std::vector<int> demands, int capacity);

  std::size_t node_count() const { return demands_.size(); }
  std::size_t customer_count() const { return demands_.size() - 1; }
  const Eigen::MatrixX2d& coords() const { return coords_; }
  const std::vector<int>& demands() const { return demands_; }
  int capacity() const { return capacity_; }

  double distance(std::size_t i, std::size_t j) const {
    return (coords_.row(i) - coords_.row(j)).norm();
  }

  bool operator==(const Instance& other) const {
    return capacity_ == other.capacity_ && demands_ == other.demands_ && coords_ == other.coords_;
  }

 private:
  Eigen::MatrixX2d coords_;
  std::vector<int> demands_;
  int capacity_ = 0;
};

/// Giant-tour solution: a node sequence that starts and ends at the depot and
/// encodes every vehicle trip through intermediate depot visits.
struct Route {
  std::vector<int> sequence;

  Route() = default;
  /// Throws InvalidRouteError unless the sequence begins and ends at 0 and
  /// contains no zero-length hops.
  explicit Route(std::vector<int> seq);

  bool operator==(const Route&) const = default;
};

struct Violation {
  enum class Kind { InvalidNode, StartNotDepot, EndNotDepot, MissingCustomer, RepeatedCustomer, CapacityExceeded };
  Kind kind;
  int node = -1;     // offending node, when applicable
  int segment = -1;  // offending depot-to-depot segment, when applicable
  std::string detail;
};

struct SolutionReport {
  double length = 0.0;
  int vehicle_count = 0;
  bool feasible = true;
  std::vector<Violation> violations;
};

/// Sum of Euclidean hop lengths. Throws InvalidRouteError for out-of-range nodes.
double route_length(const Instance& instance, const Route& route);

/// Checks the route against the CVRP constraints and reports every failure.
/// Subtour elimination needs no check: a single depot-anchored sequence cannot
/// contain a cycle disconnected from the depot.
SolutionReport validate_solution(const Instance& instance, const Route& route);

/// Customer subsequences between consecutive depot visits.
std::vector<std::vector<int>> route_segments(const Route& route);

/// m customers uniform in [0,1]^2, demands uniform in {1..9}.
Instance generate_instance(int m, int capacity, Rng& rng);
std::vector<Instance> generate_instances(int m, int capacity, std::size_t count, std::uint64_t seed);

/// Percent excess of `length` over `reference_length`.
double optimality_gap(double length, double reference_length);

// One JSON object per line; see README for the record layout.
std::string instance_to_json_line(const Instance& instance);
Instance instance_from_json_line(const std::string& line);
std::vector<Instance> read_instances(const std::filesystem::path& path);
void write_instances(const std::filesystem::path& path, const std::vector<Instance>& instances);

struct SolutionRecord {
  std::size_t instance_id = 0;
  Route route;
  double length = 0.0;
};
void write_solutions(const std::filesystem::path& path, const std::vector<SolutionRecord>& solutions);
std::vector<SolutionRecord> read_solutions(const std::filesystem::path& path);

}  // namespace qroute
