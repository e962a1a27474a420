#include "cwescan/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "cwescan/dataset.hpp"
#include "cwescan/error.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> kKeys = {
      {"backend.url", "", "model endpoint (http://...) or mock:<script.json>"},
      {"backend.dialect", "native", "native | openai"},
      {"backend.api_key_env", "CWESCAN_API_KEY", "environment variable holding the backend bearer token"},
      {"backend.model", "", "model name sent by the openai dialect"},
      {"backend.timeout_seconds", "300", "per-request timeout"},
      {"mock.clock", "virtual", "virtual | real timing for mock: backends"},
      {"instruction", std::string(kDefaultInstruction), "instruction text shared by training and inference"},
      {"instruction_file", "", "file whose contents replace the instruction"},
      {"catalog", "", "CWE catalog override (JSONL)"},
      {"store.dir", "review_store", "review store directory"},
      {"dataset.dir", "dataset", "assembled dataset output directory"},
      {"generator.url", "", "generation endpoint (http://...) or fixture:<dir>"},
      {"generator.api_key_env", "CWESCAN_GENERATOR_API_KEY", "environment variable holding the generator token"},
      {"generator.sampling", "{\"temperature\": 0.9}", "sampling parameters passed through as JSON"},
      {"generator.max_output_length", "4096", "generation length limit"},
      {"generator.parallelism", "1", "CWEs generated concurrently"},
      {"generator.max_retries", "2", "shortfall re-requests per CWE"},
      {"pairs_per_cwe", "10", "vulnerable/fixed pairs requested per CWE"},
      {"split.test_size", "100", "held-out test instances"},
      {"split.seed", "7", "split seed"},
      {"scan.max_bytes", "65536", "files larger than this are skipped"},
      {"scan.workers", "4", "concurrent scan requests"},
      {"eval.max_new_tokens", "16", "tokens requested per evaluation answer"},
      {"eval.concurrency", "1", "concurrent evaluation requests"},
      {"eval.max_error_rate", "0", "fraction of failed requests tolerated"},
      {"bench.warmup", "2", "warmup requests (discarded)"},
      {"bench.measured", "5", "measured requests"},
      {"bench.max_new_tokens", "64", "tokens requested per bench request"},
      {"bench.max_failures", "0", "failed measured requests tolerated"},
      {"bench.host_description", "", "free-form host description recorded in the report"},
      {"reviewer", "reviewer", "reviewer identity recorded in the audit log"},
      {"review.bind", "127.0.0.1:8765", "review API bind address"},
      {"review.static_dir", "", "review UI assets served at /"},
  };
  return kKeys;
}

namespace {

bool is_known_key(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
}

const std::string& default_for(const std::string& key) {
  for (const auto& k : config_keys()) {
    if (k.name == key) return k.default_value;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

std::string env_var_for(const std::string& key) {
  std::string out = "CWESCAN_";
  for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(t.substr(0, eq)));
    if (!is_known_key(key)) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    out[key] = std::string(trim(t.substr(eq + 1)));
  }
  return out;
}

ConfigLayers::ConfigLayers(std::map<std::string, std::string> file, EnvLookup env,
                           std::map<std::string, std::string> flags)
    : file_(std::move(file)), env_(std::move(env)), flags_(std::move(flags)) {
  for (const auto& [key, _] : flags_) {
    if (!is_known_key(key)) throw ConfigError("unknown configuration key '" + key + "'");
  }
}

ConfigLayers ConfigLayers::load(const std::optional<std::filesystem::path>& config_path,
                                std::map<std::string, std::string> flags) {
  auto file = config_path ? parse_config_file(*config_path) : std::map<std::string, std::string>{};
  EnvLookup env = [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
  return ConfigLayers(std::move(file), std::move(env), std::move(flags));
}

std::string ConfigLayers::get(const std::string& key) const {
  if (auto it = flags_.find(key); it != flags_.end()) return it->second;
  if (env_) {
    if (auto v = env_(env_var_for(key))) return *v;
  }
  if (auto it = file_.find(key); it != file_.end()) return it->second;
  return default_for(key);
}

std::string ConfigLayers::source_of(const std::string& key) const {
  if (flags_.count(key)) return "flag";
  if (env_ && env_(env_var_for(key))) return "env";
  if (file_.count(key)) return "file";
  default_for(key);
  return "default";
}

std::int64_t ConfigLayers::get_int(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw ConfigError("configuration key '" + key + "' must be an integer, got '" + v + "'");
}

double ConfigLayers::get_double(const std::string& key) const {
  const std::string v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("configuration key '" + key + "' must be a number, got '" + v + "'");
}

std::optional<std::string> ConfigLayers::get_optional(const std::string& key) const {
  std::string v = get(key);
  if (v.empty()) return std::nullopt;
  return v;
}

namespace {

std::size_t non_negative(const ConfigLayers& l, const std::string& key) {
  const auto v = l.get_int(key);
  if (v < 0) throw ConfigError("configuration key '" + key + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

int positive_int(const ConfigLayers& l, const std::string& key) {
  const auto v = l.get_int(key);
  if (v < 1 || v > 1'000'000'000) throw ConfigError("configuration key '" + key + "' must be >= 1");
  return static_cast<int>(v);
}

}  // namespace

ToolConfig ToolConfig::resolve(const ConfigLayers& l) {
  ToolConfig c;
  c.backend_url = l.get("backend.url");
  c.backend_dialect = l.get("backend.dialect");
  if (c.backend_dialect != "native" && c.backend_dialect != "openai") {
    throw ConfigError("backend.dialect must be native or openai");
  }
  c.backend_api_key_env = l.get("backend.api_key_env");
  c.backend_model = l.get_optional("backend.model");
  c.backend_timeout_seconds = l.get_double("backend.timeout_seconds");
  c.mock_clock = l.get("mock.clock");
  if (c.mock_clock != "virtual" && c.mock_clock != "real") throw ConfigError("mock.clock must be virtual or real");

  if (auto file = l.get_optional("instruction_file")) {
    std::ifstream in(*file, std::ios::binary);
    if (!in) throw ConfigError("cannot read instruction file " + *file);
    std::ostringstream ss;
    ss << in.rdbuf();
    c.instruction = ss.str();
    // A single trailing newline from the editor is not part of the instruction.
    if (!c.instruction.empty() && c.instruction.back() == '\n') c.instruction.pop_back();
  } else {
    c.instruction = l.get("instruction");
  }
  if (trim(c.instruction).empty()) throw ConfigError("instruction is empty");

  if (auto p = l.get_optional("catalog")) c.catalog_path = *p;
  c.store_dir = l.get("store.dir");
  c.dataset_dir = l.get("dataset.dir");

  c.generator_url = l.get("generator.url");
  c.generator_api_key_env = l.get("generator.api_key_env");
  c.generator_sampling_json = l.get("generator.sampling");
  c.generator_max_output_length = positive_int(l, "generator.max_output_length");
  c.generator_parallelism = positive_int(l, "generator.parallelism");
  c.generator_max_retries = static_cast<int>(non_negative(l, "generator.max_retries"));
  c.pairs_per_cwe = positive_int(l, "pairs_per_cwe");

  c.test_size = non_negative(l, "split.test_size");
  c.seed = static_cast<std::uint64_t>(non_negative(l, "split.seed"));

  c.scan_max_bytes = non_negative(l, "scan.max_bytes");
  c.scan_workers = static_cast<std::size_t>(positive_int(l, "scan.workers"));

  c.eval_max_new_tokens = positive_int(l, "eval.max_new_tokens");
  c.eval_concurrency = static_cast<std::size_t>(positive_int(l, "eval.concurrency"));
  c.eval_max_error_rate = l.get_double("eval.max_error_rate");

  c.bench_warmup = non_negative(l, "bench.warmup");
  c.bench_measured = non_negative(l, "bench.measured");
  c.bench_max_new_tokens = positive_int(l, "bench.max_new_tokens");
  c.bench_max_failures = non_negative(l, "bench.max_failures");
  c.bench_host_description = l.get("bench.host_description");

  c.reviewer = l.get("reviewer");
  c.review_bind = l.get("review.bind");
  if (auto p = l.get_optional("review.static_dir")) c.review_static_dir = *p;
  return c;
}

}  // namespace cwescan
