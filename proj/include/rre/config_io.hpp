#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rre/model.hpp"
#include "rre/stats.hpp"

namespace rre {

inline constexpr const char* kToolVersion = "rre 0.1.0";
/// Environment variable naming the directory under which outputs go when no
/// explicit output directory is given.
inline constexpr const char* kOutputRootEnv = "RRE_OUTPUT_ROOT";

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

struct ExperimentConfig {
  enum class SystemSource { kInline, kFile, kExample };

  SystemSource source = SystemSource::kExample;
  /// File path (kFile) or preset name (kExample); empty for kInline.
  std::string system_ref = "scalar";
  SystemModel system = scalar_example();

  std::vector<double> gamma_bar{0.8};
  std::vector<std::uint64_t> seeds{1};
  int horizon = 100000;
  int burn_in = kDefaultBurnIn;
  int replicates = 10000;
  int depth = 12;
  std::string output_dir;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Malformed JSON; the message carries line and column.
class ConfigParseError : public ValidationError {
 public:
  ConfigParseError(const std::string& where, std::size_t line, std::size_t column,
                   const std::string& detail);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Resolves built-in presets: "scalar" and "random10" (10 states, 5 outputs).
SystemModel example_system(const std::string& name);

/**
 * Parses and validates a configuration. Relative system_file paths resolve
 * against `base_dir`. Throws ConfigParseError for malformed JSON and
 * ValidationError listing every invalid field otherwise.
 */
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

struct OutputFile {
  std::string name;  // relative to the output directory
  std::string content;
  double seconds = 0.0;  // time spent producing the content
};

struct ResultSet {
  std::vector<OutputFile> files;
};

struct ManifestEntry {
  std::string file;
  std::string sha256;
  std::size_t bytes = 0;
};

struct Manifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::vector<ManifestEntry> outputs;
  std::map<std::string, double> timings;

  nlohmann::json to_json() const;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string sha256_hex(const std::string& data);

/**
 * Writes each output under `dir` (created if needed), then manifest.json
 * last. `config` may be null, in which case the config hash is empty.
 * Throws std::runtime_error naming the path on any I/O failure.
 */
Manifest write_outputs(const ResultSet& results, const std::filesystem::path& dir,
                       const ExperimentConfig* config = nullptr);

/// value,cdf with one row per distinct sample value.
std::string cdf_csv(const EmpiricalDistribution& dist);
/// t,N,frequency.
std::string exceedance_csv(const ExceedanceTable& table);

}  // namespace rre
