#include "qroute/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "qroute/errors.hpp"

namespace qroute {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

ReferenceTable read_references(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open references file " + path.string());
  ReferenceTable t;
  std::map<std::string, std::vector<bool>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(trim(cell));
    if (lineno == 1 && !f.empty() && f[0] == "instance_id") continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 3) throw ParseError(where + "expected instance_id,method,length");
    long id;
    double len;
    try {
      std::size_t used = 0;
      id = std::stol(f[0], &used);
      if (used != f[0].size()) throw std::invalid_argument("id");
      len = std::stod(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("length");
    } catch (const std::exception&) {
      throw ParseError(where + "malformed instance_id or length");
    }
    if (id < 0 || static_cast<std::size_t>(id) >= count)
      throw ConfigError(where + "instance_id " + f[0] + " outside the " + std::to_string(count) + " instances");
    if (!(len > 0)) throw ParseError(where + "length must be positive");
    const std::string& method = f[1];
    if (!t.lengths.count(method)) {
      t.methods.push_back(method);
      t.lengths[method].assign(count, 0.0);
      seen[method].assign(count, false);
    }
    if (seen[method][id]) throw ConfigError(where + "duplicate entry for instance " + f[0]);
    seen[method][id] = true;
    t.lengths[method][id] = len;
  }
  if (t.methods.empty()) throw ConfigError("references file " + path.string() + " has no entries");
  for (const auto& m : t.methods) {
    const auto n = std::count(seen[m].begin(), seen[m].end(), true);
    if (static_cast<std::size_t>(n) != count)
      throw ConfigError("references for '" + m + "' cover " + std::to_string(n) + " of " + std::to_string(count) +
                        " instances");
  }
  return t;
}

double ResultRow::mean() const {
  if (lengths.empty()) return 0.0;
  return std::accumulate(lengths.begin(), lengths.end(), 0.0) / static_cast<double>(lengths.size());
}

void attach_gaps(std::vector<ResultRow>& rows, double reference_mean) {
  for (auto& r : rows) r.gap = optimality_gap(r.mean(), reference_mean);
}

std::string format_table(const std::vector<ResultRow>& rows) {
  std::size_t wm = 6, wt = 4;
  for (const auto& r : rows) {
    wm = std::max(wm, r.method.size());
    wt = std::max(wt, r.type.size());
  }
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(wm)) << "Method" << "  " << std::setw(static_cast<int>(wt)) << "Type"
    << "  " << std::right << std::setw(8) << "Length" << "  " << std::setw(8) << "Gap" << '\n';
  for (const auto& r : rows) {
    s << std::left << std::setw(static_cast<int>(wm)) << r.method << "  " << std::setw(static_cast<int>(wt)) << r.type
      << "  " << std::right << std::fixed << std::setprecision(2) << std::setw(8) << r.mean() << "  ";
    if (r.gap) {
      std::ostringstream g;
      g << std::fixed << std::setprecision(2) << *r.gap << '%';
      s << std::setw(8) << g.str();
    } else {
      s << std::setw(8) << "-";
    }
    s << '\n';
  }
  return s.str();
}

std::string table_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream s;
  s << "method,type,length,gap_percent\n" << std::setprecision(12);
  for (const auto& r : rows) {
    s << r.method << ',' << r.type << ',' << r.mean() << ',';
    if (r.gap) s << *r.gap;
    s << '\n';
  }
  return s.str();
}

}  // namespace qroute
