#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/config.hpp"
#include "cwescan/cwe_catalog.hpp"
#include "cwescan/evaluator.hpp"
#include "cwescan/model_backend.hpp"
#include "cwescan/synth_generator.hpp"

namespace cwescan {

struct BackendHandle {
  std::unique_ptr<ModelBackend> backend;
  // Clock the backend stamps with; benchmarks measure wall time on it too.
  std::shared_ptr<MonotonicClock> clock;
};

/// backend.url is http://... or mock:<script.json>. Throws ConfigError when unset.
BackendHandle make_model_backend(const ToolConfig& config);

/// generator.url is http://... or fixture:<dir>. Throws ConfigError when unset.
std::unique_ptr<GenerationBackend> make_generation_backend(const ToolConfig& config);

/// Writes `doc` via a temporary file and rename.
void write_json_artifact(const nlohmann::json& doc, const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct GenerateOptions {
  std::optional<CweId> cwe;  // all catalog entries when unset
  std::optional<std::filesystem::path> report_path;  // default <store>/generation-report.json
};

struct GenerateRow {
  CweId cwe{1};
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  std::size_t enqueued = 0;
  int attempts = 0;
  bool incomplete = false;
  std::optional<std::string> error;
};

/// Exit code 0, or 1 when any selected CWE produced zero candidates.
int cmd_generate(const ToolConfig& config, const GenerateOptions& options, std::ostream& out,
                 std::ostream& err);

struct ReviewServeOptions {
  std::function<void(int port)> on_ready;
  std::stop_token stop;  // in addition to SIGINT/SIGTERM
  bool handle_signals = true;
};

int cmd_review_serve(const ToolConfig& config, const ReviewServeOptions& options,
                     std::ostream& out, std::ostream& err);

/// Writes train.jsonl, test.jsonl, manifest.json and prompt_layout.json into
/// config.dataset_dir.
int cmd_assemble(const ToolConfig& config, std::ostream& out, std::ostream& err);

struct EvalCommandOptions {
  std::filesystem::path test_path;
  std::filesystem::path out_dir = "eval-out";
  bool baseline = false;
};

/// Writes <out_dir>/report.json and <out_dir>/raw_outputs.jsonl, then prints
/// the summary table.
int cmd_eval(const ToolConfig& config, const EvalCommandOptions& options, std::ostream& out,
             std::ostream& err);

struct BenchCommandOptions {
  std::optional<std::filesystem::path> workload_path;  // instance JSONL; built-in snippets otherwise
  std::filesystem::path report_path = "bench-report.json";
  bool dry_run = false;  // warmup only
};

int cmd_bench(const ToolConfig& config, const BenchCommandOptions& options, std::ostream& out,
              std::ostream& err);

struct ScanFinding {
  enum class Status { kOk, kSkipped, kError };
  std::string path;
  Status status = Status::kOk;
  std::optional<ParsedOutput> verdict;
  std::string message;
  double elapsed_seconds = 0.0;
};

nlohmann::json to_json(const ScanFinding& finding);

struct ScanOptions {
  std::vector<std::string> paths;  // files, directories (*.py, recursive) or "-" for stdin
  std::string output = "cwescan-findings.json";  // "-" prints the JSON to stdout
};

/// 1 if any finding is vulnerable; otherwise 2 if any error occurred or every
/// input was skipped; otherwise 0.
int scan_exit_code(const std::vector<ScanFinding>& findings);

/// Scanned code is only ever sent to the model, never executed.
int cmd_scan(const ToolConfig& config, const ScanOptions& options, std::istream& in,
             std::ostream& out, std::ostream& err);

}  // namespace cwescan
