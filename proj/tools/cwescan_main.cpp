// cwescan: dataset generation, review, assembly, evaluation, benchmarking and
// scanning for the CWE detector.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cwescan/commands.hpp"
#include "cwescan/config.hpp"
#include "cwescan/error.hpp"

using namespace cwescan;

namespace {

// Maps an optional CLI value onto a configuration key.
struct FlagBinding {
  CLI::Option* option;
  std::string key;
  std::string* value;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CWE detection toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<FlagBinding> bindings;
  std::vector<std::unique_ptr<std::string>> storage;
  auto bind = [&](CLI::App* target, const std::string& flag, const std::string& key, const std::string& help) {
    storage.push_back(std::make_unique<std::string>());
    CLI::Option* opt = target->add_option(flag, *storage.back(), help);
    bindings.push_back({opt, key, storage.back().get()});
    return opt;
  };

  app.add_option("--config", config_path, "flat key = value configuration file");
  bind(&app, "--backend-url", "backend.url", "model endpoint (http://...) or mock:<script.json>");
  bind(&app, "--instruction-file", "instruction_file", "file holding the instruction text");
  app.add_option("--set", overrides, "key=value configuration override (repeatable)");

  // generate
  auto* gen = app.add_subcommand("generate", "generate candidate pairs and enqueue them for review");
  std::string gen_cwe, gen_report;
  gen->add_option("--cwe", gen_cwe, "only this CWE, e.g. CWE-79");
  bind(gen, "--pairs", "pairs_per_cwe", "pairs requested per CWE");
  bind(gen, "--generator-url", "generator.url", "http://... or fixture:<dir>");
  bind(gen, "--store", "store.dir", "review store directory");
  gen->add_option("--report", gen_report, "generation report path");

  // review-serve
  auto* serve = app.add_subcommand("review-serve", "serve the review API and UI");
  bind(serve, "--bind", "review.bind", "host:port");
  bind(serve, "--store", "store.dir", "review store directory");
  bind(serve, "--static-dir", "review.static_dir", "UI assets directory");
  bind(serve, "--reviewer", "reviewer", "default reviewer identity");

  // assemble
  auto* assemble = app.add_subcommand("assemble", "export accepted pairs and write the train/test split");
  bind(assemble, "--store", "store.dir", "review store directory");
  bind(assemble, "--out", "dataset.dir", "output directory");
  bind(assemble, "--test-size", "split.test_size", "held-out test instances");
  bind(assemble, "--seed", "split.seed", "split seed");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate the backend on a test file");
  EvalCommandOptions eval_opts;
  std::string eval_test, eval_out = "eval-out";
  eval->add_option("test", eval_test, "test instances (JSONL)")->required();
  eval->add_option("--out", eval_out, "output directory");
  eval->add_flag("--baseline", eval_opts.baseline, "mark the run as the untuned baseline");
  bind(eval, "--concurrency", "eval.concurrency", "concurrent requests");
  bind(eval, "--max-error-rate", "eval.max_error_rate", "tolerated failed-request fraction");

  // bench
  auto* bench = app.add_subcommand("bench", "measure TTFT, TPS and inter-token latency");
  BenchCommandOptions bench_opts;
  std::string bench_workload, bench_report = "bench-report.json";
  bench->add_option("--workload", bench_workload, "instance JSONL used as prompts");
  bench->add_option("--report", bench_report, "report path");
  bench->add_flag("--dry-run", bench_opts.dry_run, "warmup only, no statistics");
  bind(bench, "--warmup", "bench.warmup", "warmup requests");
  bind(bench, "--measured", "bench.measured", "measured requests");
  bind(bench, "--max-new-tokens", "bench.max_new_tokens", "tokens per request");
  bind(bench, "--host", "bench.host_description", "host description for the report");

  // scan
  auto* scan = app.add_subcommand("scan", "classify files with the model");
  ScanOptions scan_opts;
  scan->add_option("paths", scan_opts.paths, "files, directories or - for stdin")->required();
  scan->add_option("--output", scan_opts.output, "findings JSON path, - for stdout");
  bind(scan, "--max-bytes", "scan.max_bytes", "skip files larger than this");
  bind(scan, "--workers", "scan.workers", "concurrent requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    std::map<std::string, std::string> flags;
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      flags[o.substr(0, eq)] = o.substr(eq + 1);
    }
    for (const auto& b : bindings) {
      if (b.option->count() > 0) flags[b.key] = *b.value;
    }
    const ConfigLayers layers = ConfigLayers::load(
        config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), flags);
    const ToolConfig config = ToolConfig::resolve(layers);

    if (gen->parsed()) {
      GenerateOptions opts;
      if (!gen_cwe.empty()) opts.cwe = parse_cwe_id(gen_cwe);
      if (!gen_report.empty()) opts.report_path = gen_report;
      return cmd_generate(config, opts, std::cout, std::cerr);
    }
    if (serve->parsed()) return cmd_review_serve(config, {}, std::cout, std::cerr);
    if (assemble->parsed()) return cmd_assemble(config, std::cout, std::cerr);
    if (eval->parsed()) {
      eval_opts.test_path = eval_test;
      eval_opts.out_dir = eval_out;
      return cmd_eval(config, eval_opts, std::cout, std::cerr);
    }
    if (bench->parsed()) {
      if (!bench_workload.empty()) bench_opts.workload_path = bench_workload;
      bench_opts.report_path = bench_report;
      return cmd_bench(config, bench_opts, std::cout, std::cerr);
    }
    if (scan->parsed()) return cmd_scan(config, scan_opts, std::cin, std::cout, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
