// cchsh - subcommand execution against a parsed config
//
// Each command produces one JSON report plus zero or more CSV tables, all
// assembled in memory; writing them out is a separate step so callers can
// inspect results without touching the filesystem. Reports contain no
// timestamps, so a rerun with the same config and seed is byte-identical.

#ifndef CCHSH_RUNNER_HPP_
#define CCHSH_RUNNER_HPP_

#include <string>
#include <utility>
#include <vector>

#include "config.hpp"
#include "error.hpp"

namespace cchsh {

struct RunResult {
  std::string command;
  std::string report_json;
  std::vector<std::pair<std::string, std::string>> tables;  // filename -> CSV text
  std::string summary;  // one line per result, for the terminal
};

// Commands: validate, geometry, probabilities, inverse, sweep, worldviews.
// Throws Error; the caller maps codes to exit codes via exit_code_for.
RunResult run_command(const Config& config, const std::string& command);

// Writes report.json and the CSV tables under the directory, creating it
// when missing. Formats toggle which of the two kinds are written.
void write_outputs(const RunResult& result, const std::string& directory, bool write_json,
                   bool write_csv);

// Stable exit code mapping: 2 config and io, 3 geometry construction,
// 4 dynamics sampling, 5 inverse solving, 6 worldview analysis, 7 sweep
// failure budget, 1 internal.
int exit_code_for(ErrorCode code);

// One-line machine-readable error payload for stderr.
std::string error_json(const Error& e);

}  // namespace cchsh

#endif  // CCHSH_RUNNER_HPP_
