#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace asymgraph::cli {

inline constexpr const char* kArtifactVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Runs one subcommand. `args` excludes the program name. Data goes to `out`,
/// diagnostics to `err` and the shared logger.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);

}  // namespace asymgraph::cli
