#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cwescan {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognized configuration key with its built-in default.
const std::vector<ConfigKey>& config_keys();

/// CWESCAN_ prefix, dots become underscores, upper case: backend.url ->
/// CWESCAN_BACKEND_URL.
std::string env_var_for(const std::string& key);

/// Flat "key = value" document; '#' starts a comment line. Unknown keys are
/// rejected with the line number.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

/// Resolution order: flags > environment > file > built-in defaults.
class ConfigLayers {
 public:
  using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

  ConfigLayers(std::map<std::string, std::string> file, EnvLookup env,
               std::map<std::string, std::string> flags);

  /// Loads `config_path` when given and reads the process environment.
  static ConfigLayers load(const std::optional<std::filesystem::path>& config_path,
                           std::map<std::string, std::string> flags);

  std::string get(const std::string& key) const;
  /// "flag" | "env" | "file" | "default"
  std::string source_of(const std::string& key) const;

  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::optional<std::string> get_optional(const std::string& key) const;  // empty -> nullopt

 private:
  std::map<std::string, std::string> file_;
  EnvLookup env_;
  std::map<std::string, std::string> flags_;
};

/// The resolved settings used by the CLI.
struct ToolConfig {
  // Model backend: an http:// URL, or mock:<script.json> for the scripted mock.
  std::string backend_url;
  std::string backend_dialect = "native";
  std::string backend_api_key_env;
  std::optional<std::string> backend_model;
  double backend_timeout_seconds = 300.0;
  std::string mock_clock = "virtual";

  std::string instruction;
  std::optional<std::filesystem::path> catalog_path;
  std::filesystem::path store_dir;
  std::filesystem::path dataset_dir;

  std::string generator_url;  // http:// URL or fixture:<dir>
  std::string generator_api_key_env;
  std::string generator_sampling_json;
  int generator_max_output_length = 4096;
  int generator_parallelism = 1;
  int generator_max_retries = 2;
  int pairs_per_cwe = 10;

  std::size_t test_size = 100;
  std::uint64_t seed = 7;

  std::size_t scan_max_bytes = 65536;
  std::size_t scan_workers = 4;

  int eval_max_new_tokens = 16;
  std::size_t eval_concurrency = 1;
  double eval_max_error_rate = 0.0;

  std::size_t bench_warmup = 2;
  std::size_t bench_measured = 5;
  int bench_max_new_tokens = 64;
  std::size_t bench_max_failures = 0;
  std::string bench_host_description;

  std::string reviewer;
  std::string review_bind;
  std::optional<std::filesystem::path> review_static_dir;

  /// Builds the typed view. `instruction` comes from `instruction_file` when
  /// that key is set. Throws ConfigError on malformed values.
  static ToolConfig resolve(const ConfigLayers& layers);
};

}  // namespace cwescan
