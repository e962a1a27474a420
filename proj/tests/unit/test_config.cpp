#include <doctest.h>

#include "cwescan/config.hpp"
#include "cwescan/dataset.hpp"
#include "cwescan/error.hpp"
#include "test_support.hpp"

using namespace cwescan;

namespace {

ConfigLayers::EnvLookup env_from(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    if (auto it = vars.find(name); it != vars.end()) return it->second;
    return std::nullopt;
  };
}

}  // namespace

TEST_CASE("environment variable names") {
  CHECK(env_var_for("backend.url") == "CWESCAN_BACKEND_URL");
  CHECK(env_var_for("pairs_per_cwe") == "CWESCAN_PAIRS_PER_CWE");
}

TEST_CASE("precedence holds for every key: flag > env > file > default") {
  for (const auto& key : config_keys()) {
    CAPTURE(key.name);
    const std::map<std::string, std::string> file = {{key.name, "from-file"}};
    const std::map<std::string, std::string> env = {{env_var_for(key.name), "from-env"}};
    const std::map<std::string, std::string> flags = {{key.name, "from-flag"}};

    const ConfigLayers all(file, env_from(env), flags);
    CHECK(all.get(key.name) == "from-flag");
    CHECK(all.source_of(key.name) == "flag");

    const ConfigLayers no_flag(file, env_from(env), {});
    CHECK(no_flag.get(key.name) == "from-env");
    CHECK(no_flag.source_of(key.name) == "env");

    const ConfigLayers file_only(file, env_from({}), {});
    CHECK(file_only.get(key.name) == "from-file");
    CHECK(file_only.source_of(key.name) == "file");

    const ConfigLayers nothing({}, env_from({}), {});
    CHECK(nothing.get(key.name) == key.default_value);
    CHECK(nothing.source_of(key.name) == "default");
  }
}

TEST_CASE("config files are flat key = value documents") {
  TempDir dir;
  spit(dir / "c.conf", "# comment\n\nbackend.url = http://127.0.0.1:9/x \npairs_per_cwe=7\nreviewer =\n");
  const auto kv = parse_config_file(dir / "c.conf");
  CHECK(kv.at("backend.url") == "http://127.0.0.1:9/x");
  CHECK(kv.at("pairs_per_cwe") == "7");
  CHECK(kv.at("reviewer").empty());

  spit(dir / "bad.conf", "backend.url = x\nbogus.key = 1\n");
  CHECK_THROWS_WITH_AS(parse_config_file(dir / "bad.conf"), doctest::Contains(":2: unknown key"), ConfigError);
  spit(dir / "bad2.conf", "just words\n");
  CHECK_THROWS_AS(parse_config_file(dir / "bad2.conf"), ConfigError);
  CHECK_THROWS_AS(parse_config_file(dir / "absent.conf"), ConfigError);
  CHECK_THROWS_AS(ConfigLayers({}, env_from({}), {{"no.such", "1"}}), ConfigError);
}

TEST_CASE("typed resolution") {
  const ToolConfig defaults = ToolConfig::resolve(ConfigLayers({}, env_from({}), {}));
  CHECK(defaults.instruction == kDefaultInstruction);
  CHECK(defaults.pairs_per_cwe == 10);
  CHECK(defaults.test_size == 100);
  CHECK(defaults.seed == 7);
  CHECK(defaults.backend_url.empty());
  CHECK_FALSE(defaults.catalog_path.has_value());
  CHECK(defaults.mock_clock == "virtual");

  CHECK_THROWS_AS(ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"pairs_per_cwe", "ten"}})), ConfigError);
  CHECK_THROWS_AS(ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"pairs_per_cwe", "0"}})), ConfigError);
  CHECK_THROWS_AS(ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"split.seed", "-1"}})), ConfigError);
  CHECK_THROWS_AS(ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"backend.dialect", "grpc"}})), ConfigError);
  CHECK_THROWS_AS(ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"instruction", "  "}})), ConfigError);

  const ToolConfig from_env =
      ToolConfig::resolve(ConfigLayers({}, env_from({{"CWESCAN_SCAN_MAX_BYTES", "1024"}}), {}));
  CHECK(from_env.scan_max_bytes == 1024);
}

TEST_CASE("instruction file replaces the instruction text") {
  TempDir dir;
  spit(dir / "instr.txt", "Classify this snippet.\n");
  const ToolConfig c =
      ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"instruction_file", (dir / "instr.txt").string()}}));
  CHECK(c.instruction == "Classify this snippet.");
  CHECK_THROWS_AS(
      ToolConfig::resolve(ConfigLayers({}, env_from({}), {{"instruction_file", (dir / "none.txt").string()}})),
      ConfigError);
}
