#pragma once

// Config-driven experiment runner behind the `homest` executable.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "homest/csv.hpp"

namespace homest::cli {

using Json = nlohmann::ordered_json;

/// Invalid or incomplete experiment configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kFlaggedStudy = 4,
};

const std::vector<std::string>& subcommands();

struct RunOptions {
  std::string subcommand;
  std::filesystem::path config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::filesystem::path out_dir = "out";
};

struct RunOutput {
  std::string run_id;
  /// Input config with every default filled in, as echoed in the manifest.
  Json effective_config;
  std::string config_hash;
  std::map<std::string, CsvTable> tables;
  bool flagged = false;
  std::string notes;
};

/// Reads a config file; a manifest (object with a "config" member) is
/// unwrapped so runs can be replayed from their manifests.
Json load_config(const std::filesystem::path& path);

/// Hex SHA-256 of the compact JSON dump.
std::string sha256_hex(const std::string& data);

/// Runs one experiment in memory.  Throws ConfigError or homest::Error.
RunOutput execute(const std::string& subcommand, Json config,
                  std::optional<std::uint64_t> seed_override);

/// Writes <out>/<run_id>/<table>.csv and manifest.json.
void write_outputs(const RunOutput& out, const std::filesystem::path& out_dir);

/// Full invocation with error mapping to exit codes; diagnostics go to
/// stderr and, for numerical failures, to <run dir>/diagnostic.txt.
int run(const RunOptions& opts);

}  // namespace homest::cli
