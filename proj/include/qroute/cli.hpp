#pragma once

#include <iosfwd>

namespace qroute {

/// Exit codes: 0 success, 1 check failure, 2 usage or configuration error,
/// 3 numerical abort.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qroute
