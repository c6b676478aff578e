#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace multida::cli {

// Exit codes: 0 success, 2 usage or validation failure, 3 internal numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace multida::cli
