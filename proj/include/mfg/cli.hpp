#pragma once

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mfg/errors.hpp"

namespace mfg::cli {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of `mfg run` and `mfg validate`.
enum ExitCode : int {
  kOk = 0,
  kSchema = 2,
  kNonConvergence = 3,
  kIo = 4,
};

/// Config that does not match the scenario schema; `field()` is the dotted
/// path of the offending key.
class SchemaError : public Error {
 public:
  SchemaError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// File that could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

struct ScenarioConfig {
  std::string scenario;
  /// Scenario-specific keys; absent keys take their defaults.
  json params = json::object();
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  std::optional<int> steps;
  std::optional<int> paths;
  std::optional<double> tol;
  std::optional<double> damping;

  /// Echo with every numeric control that was set.
  json to_json() const;
};

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<int> paths;
  std::optional<int> steps;
  std::optional<double> tol;
};

struct ScenarioInfo {
  std::string name;
  std::string summary;
};

const std::vector<ScenarioInfo>& scenarios();

/// Top-level checks only (known keys, types, scenario name).
ScenarioConfig parse_config(const json& document);

/// Reads and parses a JSON file. Throws IoError if it cannot be read and
/// SchemaError if it is not valid JSON or fails the top-level checks.
ScenarioConfig load_config(const std::filesystem::path& file);

ScenarioConfig apply_overrides(ScenarioConfig config, const Overrides& overrides);

/// Full schema check: every scenario key is known, well typed and accepted
/// by the model. Throws SchemaError.
void validate_config(const ScenarioConfig& config);

struct RunResult {
  int exit_code = kOk;
  /// Empty when no manifest was written.
  json manifest;
  std::string message;
};

/// Validates, runs the scenario and writes CSV files, summary.json and
/// manifest.json under config.out_dir. Never throws.
RunResult run_scenario(const ScenarioConfig& config);

/// Formats a double with 17 significant digits.
std::string format_double(double x);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& file);

/// Entry point of the `mfg` executable.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfg::cli
