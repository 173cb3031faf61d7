#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace rcfm::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,
  kNumericalFailure = 2,
  kConfigError = 3,
};

/// Default output root: $RCFM_OUT, else ./rcfm-runs.
std::filesystem::path default_output_root();

/// Writes through a temporary sibling file and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Next unused <root>/<hash>/run-NNN, created empty.
std::filesystem::path create_run_dir(const std::filesystem::path& root, const std::string& hash);

/// CSV text with a leading "# config_hash=... seed=..." line and a header.
std::string csv_document(const std::string& hash, std::uint64_t seed,
                         const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

/// Shortest decimal form that round-trips the double.
std::string num(double v);

int run(int argc, char** argv);

}  // namespace rcfm::cli
