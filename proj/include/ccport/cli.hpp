#pragma once

#include <iosfwd>

namespace ccport {

/// The `ccport` command line: graph, port and eval subcommands.
/// Exit codes: 0 completed, 1 fatal error, 2 usage or unreadable input.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace ccport
