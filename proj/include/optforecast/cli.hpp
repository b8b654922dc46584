#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace optforecast::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kNonConvergence = 4,
};

/// Runs one invocation; `args` excludes the program name. Every successful
/// subcommand writes `<out-dir>/<command>.manifest.json`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace optforecast::cli
