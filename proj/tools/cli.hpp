#ifndef DRVAR_TOOLS_CLI_HPP
#define DRVAR_TOOLS_CLI_HPP

#include <ostream>

namespace drvar::cli {

/// Parses arguments and dispatches a subcommand; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace drvar::cli

#endif // DRVAR_TOOLS_CLI_HPP
