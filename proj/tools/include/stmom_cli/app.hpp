#pragma once

#include <iosfwd>

namespace stmom::cli {

/// Parses arguments and runs a subcommand. Returns the process exit code:
/// 0 success, 2 usage or input error, 3 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stmom::cli
