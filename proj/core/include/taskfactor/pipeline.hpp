#pragma once

#include "taskfactor/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace taskfactor {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;

struct RunOutcome {
  int exit_code = kExitOk;
  std::filesystem::path report_dir;
  std::vector<std::filesystem::path> written; ///< in write order, relative to report_dir
  std::string message;
};

/// Runs every analysis stage and writes the report tree. Errors are caught
/// and mapped to exit codes; the message names the failing stage.
RunOutcome run_pipeline(const RunConfig& config, std::ostream* log = nullptr);

/// Human-readable schema of every file the tool reads or writes.
std::string describe_formats();

std::string version_string();

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

} // namespace taskfactor
