#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nglare/error.hpp"

namespace nglare::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kData = 3, kNumeric = 4 };

int exit_code(ErrorKind kind);

// Runs one command. `args` excludes the program name, e.g. {"jss", "--input", "dir"}.
// The report directory is printed to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Directory name for a report: "<command>-<first 16 hex digits of sha256(config)>".
std::string report_dir_name(const std::string& command, const nlohmann::json& config);

}  // namespace nglare::cli
