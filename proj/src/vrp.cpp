#include "qroute/vrp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qroute/errors.hpp"

namespace qroute {

using nlohmann::json;

Instance::Instance(Eigen::MatrixX2d coords, std::vector<int> demands, int capacity)
    : coords_(std::move(coords)), demands_(std::move(demands)), capacity_(capacity) {
  if (capacity_ <= 0) throw DomainError("capacity must be positive");
  if (static_cast<std::size_t>(coords_.rows()) != demands_.size())
    throw DomainError("coords and demands differ in length");
  if (demands_.size() < 2) throw DomainError("instance needs at least one customer");
  if (demands_[0] != 0) throw DomainError("depot demand must be 0");
  for (std::size_t i = 1; i < demands_.size(); ++i) {
    if (demands_[i] < 1) throw DomainError("customer " + std::to_string(i) + " has demand < 1");
    if (demands_[i] > capacity_)
      throw DomainError("customer " + std::to_string(i) + " demand exceeds capacity");
  }
  if (!coords_.allFinite()) throw DomainError("non-finite coordinate");
}

Route::Route(std::vector<int> seq) : sequence(std::move(seq)) {
  if (sequence.empty()) throw InvalidRouteError("empty route");
  if (sequence.front() != 0 || sequence.back() != 0)
    throw InvalidRouteError("route must start and end at the depot");
  for (std::size_t t = 1; t < sequence.size(); ++t)
    if (sequence[t] == sequence[t - 1]) throw InvalidRouteError("zero-length hop at position " + std::to_string(t));
}

double route_length(const Instance& instance, const Route& route) {
  const auto n = static_cast<int>(instance.node_count());
  for (int v : route.sequence)
    if (v < 0 || v >= n) throw InvalidRouteError("node index " + std::to_string(v) + " out of range");
  double total = 0.0;
  for (std::size_t t = 1; t < route.sequence.size(); ++t)
    total += instance.distance(route.sequence[t - 1], route.sequence[t]);
  return total;
}

std::vector<std::vector<int>> route_segments(const Route& route) {
  std::vector<std::vector<int>> segments;
  std::vector<int> current;
  for (std::size_t t = 1; t < route.sequence.size(); ++t) {
    const int v = route.sequence[t];
    if (v == 0) {
      if (!current.empty()) segments.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(v);
    }
  }
  if (!current.empty()) segments.push_back(std::move(current));
  return segments;
}

SolutionReport validate_solution(const Instance& instance, const Route& route) {
  SolutionReport report;
  const auto n = static_cast<int>(instance.node_count());
  const auto& seq = route.sequence;

  bool indices_ok = true;
  for (int v : seq) {
    if (v < 0 || v >= n) {
      indices_ok = false;
      report.violations.push_back({Violation::Kind::InvalidNode, v, -1, "node index out of range"});
    }
  }
  if (seq.empty() || seq.front() != 0)
    report.violations.push_back({Violation::Kind::StartNotDepot, seq.empty() ? -1 : seq.front(), -1,
                                 "route does not start at the depot"});
  if (seq.empty() || seq.back() != 0)
    report.violations.push_back({Violation::Kind::EndNotDepot, seq.empty() ? -1 : seq.back(), -1,
                                 "route does not end at the depot"});

  // Out-of-range nodes are skipped below so the remaining checks still run.
  {
    std::vector<int> visits(n, 0);
    for (int v : seq)
      if (v > 0 && v < n) ++visits[v];
    for (int i = 1; i < n; ++i) {
      if (visits[i] == 0)
        report.violations.push_back({Violation::Kind::MissingCustomer, i, -1, "customer never visited"});
      else if (visits[i] > 1)
        report.violations.push_back({Violation::Kind::RepeatedCustomer, i, -1,
                                     "customer visited " + std::to_string(visits[i]) + " times"});
    }

    // Segments are delimited by depot visits; a trailing segment without a
    // closing depot visit is still load-checked.
    int segment = 0;
    int load = 0;
    bool open = false;
    auto close_segment = [&] {
      if (open && load > instance.capacity())
        report.violations.push_back({Violation::Kind::CapacityExceeded, -1, segment,
                                     "segment demand " + std::to_string(load) + " exceeds capacity " +
                                         std::to_string(instance.capacity())});
      if (open) ++segment;
      load = 0;
      open = false;
    };
    for (int v : seq) {
      if (v < 0 || v >= n) continue;
      if (v == 0) {
        close_segment();
      } else {
        load += instance.demands()[v];
        open = true;
      }
    }
    close_segment();
    report.vehicle_count = segment;
    if (indices_ok) report.length = route_length(instance, route);
  }

  report.feasible = report.violations.empty();
  return report;
}

Instance generate_instance(int m, int capacity, Rng& rng) {
  constexpr int kMaxDemand = 9;
  if (m < 1) throw ConfigError("customer count must be >= 1");
  if (capacity < kMaxDemand) throw ConfigError("capacity must be >= 9 (the largest possible demand)");
  Eigen::MatrixX2d coords(m + 1, 2);
  for (int i = 0; i <= m; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  std::vector<int> demands(m + 1, 0);
  for (int i = 1; i <= m; ++i) demands[i] = static_cast<int>(rng.uniform_int(1, kMaxDemand));
  return Instance(std::move(coords), std::move(demands), capacity);
}

std::vector<Instance> generate_instances(int m, int capacity, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_instance(m, capacity, rng));
  return out;
}

double optimality_gap(double length, double reference_length) {
  if (!(reference_length > 0.0)) throw DomainError("reference length must be positive");
  return 100.0 * (length - reference_length) / reference_length;
}

std::string instance_to_json_line(const Instance& instance) {
  json j;
  json coords = json::array();
  for (Eigen::Index i = 0; i < instance.coords().rows(); ++i)
    coords.push_back({instance.coords()(i, 0), instance.coords()(i, 1)});
  j["coords"] = std::move(coords);
  j["demands"] = instance.demands();
  j["capacity"] = instance.capacity();
  return j.dump();
}

Instance instance_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  const auto& coords = j.at("coords");
  Eigen::MatrixX2d xy(coords.size(), 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (coords[i].size() != 2) throw DomainError("coordinate must be an [x, y] pair");
    xy(i, 0) = coords[i][0].get<double>();
    xy(i, 1) = coords[i][1].get<double>();
  }
  return Instance(std::move(xy), j.at("demands").get<std::vector<int>>(), j.at("capacity").get<int>());
}

std::vector<Instance> read_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json_line(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_instances(const std::filesystem::path& path, const std::vector<Instance>& instances) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& inst : instances) out << instance_to_json_line(inst) << '\n';
}

void write_solutions(const std::filesystem::path& path, const std::vector<SolutionRecord>& solutions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  for (const auto& s : solutions) {
    json j;
    j["instance_id"] = s.instance_id;
    j["sequence"] = s.route.sequence;
    j["length"] = s.length;
    out << j.dump() << '\n';
  }
}

std::vector<SolutionRecord> read_solutions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<SolutionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("instance_id").get<std::size_t>(), Route(j.at("sequence").get<std::vector<int>>()),
                     j.at("length").get<double>()});
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace qroute
