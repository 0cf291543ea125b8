#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace elicit::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 1;
inline constexpr int kBackendError = 2;

/// Entry point behind the `elicit` binary. `args` excludes the program name.
/// Subcommands: simulate, chat, evaluate, report, serve.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace elicit::cli
