#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qroute/vrp.hpp"

namespace qroute {

/// External reference lengths (CSV: instance_id,method,length), one complete
/// column per method in first-appearance order. Throws ConfigError when a
/// method does not cover exactly instances 0..count-1, ParseError on bad rows.
struct ReferenceTable {
  std::vector<std::string> methods;
  std::map<std::string, std::vector<double>> lengths;
};
ReferenceTable read_references(const std::filesystem::path& path, std::size_t count);

struct ResultRow {
  std::string method;
  std::string type;
  std::vector<double> lengths;  // per instance
  double mean() const;
  std::optional<double> gap;  // percent, against the reference mean
};

/// Fills every row's gap from the unrounded means against `reference`.
void attach_gaps(std::vector<ResultRow>& rows, double reference_mean);

/// Method / Type / Length / Gap table, lengths to 2 decimals, gaps as percent.
std::string format_table(const std::vector<ResultRow>& rows);
std::string table_csv(const std::vector<ResultRow>& rows);

}  // namespace qroute
