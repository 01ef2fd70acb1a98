#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctxcrf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Command-line entry point. args excludes the program name. One JSON status
/// line goes to `out`; logs and help text go to `err` (help goes to `out`).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxcrf
