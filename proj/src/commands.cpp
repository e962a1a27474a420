#include "cwescan/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cwescan/bench_harness.hpp"
#include "cwescan/dataset.hpp"
#include "cwescan/error.hpp"
#include "cwescan/http_backend.hpp"
#include "cwescan/mock_backend.hpp"
#include "cwescan/review_engine.hpp"
#include "cwescan/review_server.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kMockPrefix = "mock:";
constexpr std::string_view kFixturePrefix = "fixture:";

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

CweCatalog catalog_for(const ToolConfig& config) { return load_catalog(config.catalog_path); }

json parse_sampling(const std::string& text) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("generator.sampling must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator.sampling is not valid JSON: ") + e.what());
  }
}

}  // namespace

BackendHandle make_model_backend(const ToolConfig& config) {
  const std::string& url = config.backend_url;
  if (url.empty()) throw ConfigError("no model backend configured (set --backend-url or backend.url)");
  if (starts_with(url, kMockPrefix)) {
    std::shared_ptr<MonotonicClock> clock;
    if (config.mock_clock == "real") {
      clock = std::make_shared<SteadyClock>();
    } else {
      clock = std::make_shared<VirtualClock>();
    }
    auto script = MockScript::load(url.substr(kMockPrefix.size()));
    return {std::make_unique<ScriptedMockBackend>(std::move(script), clock), clock};
  }
  if (starts_with(url, "http://")) {
    HttpBackendOptions opts;
    opts.url = url;
    opts.dialect = parse_dialect(config.backend_dialect);
    opts.api_key_env = config.backend_api_key_env.empty() ? std::nullopt
                                                          : std::optional<std::string>(config.backend_api_key_env);
    opts.model = config.backend_model;
    opts.timeout_seconds = config.backend_timeout_seconds;
    auto clock = std::make_shared<SteadyClock>();
    return {std::make_unique<HttpModelBackend>(std::move(opts), clock), clock};
  }
  throw ConfigError("unsupported backend url '" + url + "' (expected http://... or mock:<script>)");
}

std::unique_ptr<GenerationBackend> make_generation_backend(const ToolConfig& config) {
  const std::string& url = config.generator_url;
  if (url.empty()) throw ConfigError("no generation backend configured (set generator.url)");
  if (starts_with(url, kFixturePrefix)) {
    const fs::path dir = url.substr(kFixturePrefix.size());
    if (!fs::is_directory(dir)) throw ConfigError("fixture directory not found: " + dir.string());
    return std::make_unique<FixtureGenerationBackend>(dir);
  }
  if (starts_with(url, "http://")) {
    std::optional<std::string> key_env;
    if (!config.generator_api_key_env.empty()) key_env = config.generator_api_key_env;
    return std::make_unique<HttpGenerationBackend>(url, key_env);
  }
  throw ConfigError("unsupported generator url '" + url + "' (expected http://... or fixture:<dir>)");
}

void write_json_artifact(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << doc.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
    if (!f.flush()) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// generate

namespace {

json batch_to_json(const GenerationBatch& b) {
  json rejected = json::array();
  for (const auto& r : b.rejected_candidates) {
    rejected.push_back({{"record_index", r.record_index}, {"vulnerable", r.vulnerable}, {"fixed", r.fixed},
                        {"reason", r.reason}});
  }
  return {{"schema_version", 1},
          {"cwe", b.cwe.str()},
          {"attempts", b.attempts},
          {"incomplete", b.incomplete},
          {"parsed", b.parsed.size()},
          {"raw_responses", b.raw_responses},
          {"rejected_candidates", rejected}};
}

}  // namespace

int cmd_generate(const ToolConfig& config, const GenerateOptions& options, std::ostream& out,
                 std::ostream& err) {
  // Fail on configuration before touching anything.
  auto backend = make_generation_backend(config);
  const CweCatalog catalog = catalog_for(config);
  const json sampling = parse_sampling(config.generator_sampling_json);

  std::vector<CweEntry> selected;
  if (options.cwe) {
    selected.push_back(catalog.at(*options.cwe));
  } else {
    selected = catalog.entries();
  }

  ReviewStore store(config.store_dir, catalog);
  const SyntaxChecker checker;
  GenerationOptions gen_opts;
  gen_opts.max_output_length = config.generator_max_output_length;
  gen_opts.sampling = sampling;
  gen_opts.checker = &checker;

  const fs::path raw_dir = config.store_dir / "generation";
  std::vector<GenerateRow> rows(selected.size());
  std::atomic<std::size_t> next{0};
  std::mutex enqueue_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < selected.size(); i = next++) {
      GenerateRow& row = rows[i];
      row.cwe = selected[i].id;
      try {
        // Raw responses are kept for audit before anything reaches the queue.
        auto persist = [&](const GenerationBatch& b) {
          write_json_artifact(batch_to_json(b), raw_dir / (b.cwe.str() + ".json"));
        };
        const GenerationBatch batch =
            generate_for_cwe(*backend, selected[i], config.pairs_per_cwe, config.generator_max_retries, gen_opts,
                             persist);
        row.parsed = batch.parsed.size();
        row.rejected = batch.rejected_candidates.size();
        row.attempts = batch.attempts;
        row.incomplete = batch.incomplete;
        std::lock_guard lock(enqueue_mu);
        row.enqueued = store.enqueue(batch);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const std::size_t threads =
      std::clamp<std::size_t>(static_cast<std::size_t>(config.generator_parallelism), 1, selected.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  json report_rows = json::array();
  bool any_empty = false;
  for (const auto& r : rows) {
    any_empty = any_empty || r.parsed == 0;
    report_rows.push_back({{"cwe", r.cwe.str()},
                           {"parsed", r.parsed},
                           {"rejected", r.rejected},
                           {"enqueued", r.enqueued},
                           {"attempts", r.attempts},
                           {"incomplete", r.incomplete},
                           {"error", r.error ? json(*r.error) : json(nullptr)}});
  }
  const fs::path report_path = options.report_path.value_or(config.store_dir / "generation-report.json");
  write_json_artifact({{"schema_version", 1},
                       {"backend", backend->id()},
                       {"pairs_per_cwe", config.pairs_per_cwe},
                       {"timestamp", utc_timestamp()},
                       {"rows", report_rows}},
                      report_path);

  std::size_t total_enqueued = 0;
  out << std::left << std::setw(10) << "CWE" << std::right << std::setw(8) << "parsed" << std::setw(10)
      << "rejected" << std::setw(10) << "enqueued" << std::setw(10) << "attempts" << "\n";
  for (const auto& r : rows) {
    total_enqueued += r.enqueued;
    out << std::left << std::setw(10) << r.cwe.str() << std::right << std::setw(8) << r.parsed << std::setw(10)
        << r.rejected << std::setw(10) << r.enqueued << std::setw(10) << r.attempts;
    if (r.incomplete) out << "  (short of " << config.pairs_per_cwe << ")";
    out << "\n";
    if (r.error) err << r.cwe.str() << ": " << *r.error << "\n";
  }
  out << "enqueued " << total_enqueued << " new candidates; report: " << report_path.string() << "\n";
  if (any_empty) {
    err << "error: at least one CWE produced zero candidates\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// review-serve

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_interrupt(int) { g_interrupted = 1; }

std::pair<std::string, int> split_bind(const std::string& bind) {
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ConfigError("review.bind must be host:port, got '" + bind + "'");
  const std::string host = bind.substr(0, colon);
  try {
    std::size_t used = 0;
    const int port = std::stoi(bind.substr(colon + 1), &used);
    if (used == bind.size() - colon - 1 && port >= 0 && port <= 65535) return {host, port};
  } catch (const std::exception&) {
  }
  throw ConfigError("review.bind has an invalid port: '" + bind + "'");
}

}  // namespace

int cmd_review_serve(const ToolConfig& config, const ReviewServeOptions& options, std::ostream& out,
                     std::ostream& err) {
  const auto [host, port] = split_bind(config.review_bind);
  const CweCatalog catalog = catalog_for(config);
  fs::create_directories(config.store_dir);
  ReviewStore store(config.store_dir, catalog);
  if (store.recovered_on_open()) {
    err << "warning: state snapshot disagreed with the audit log; rebuilt from the audit log\n";
  }

  ReviewServer::Options server_opts;
  server_opts.static_dir = config.review_static_dir;
  server_opts.default_reviewer = config.reviewer;
  ReviewServer server(store, catalog, server_opts);
  const int bound = server.bind(host, port);

  if (options.handle_signals) {
    g_interrupted = 0;
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
  }
  std::jthread serving([&server] { server.run(); });
  out << "review API listening on http://" << host << ":" << bound << "/\n" << std::flush;
  if (options.on_ready) options.on_ready(bound);

  while (!g_interrupted && !options.stop.stop_requested()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  // stop() waits for in-flight handlers; every decision is durable once answered.
  server.stop();
  serving.join();
  if (options.handle_signals) {
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
  }
  const auto counts = store.progress();
  ProgressCounts total;
  for (const auto& [_, c] : counts) {
    total.pending += c.pending;
    total.accepted += c.accepted;
    total.edited_then_accepted += c.edited_then_accepted;
    total.rejected += c.rejected;
  }
  out << "stopped; pending " << total.pending << ", accepted " << total.accepted + total.edited_then_accepted
      << ", rejected " << total.rejected << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// assemble

int cmd_assemble(const ToolConfig& config, std::ostream& out, std::ostream&) {
  const CweCatalog catalog = catalog_for(config);
  if (!fs::is_directory(config.store_dir)) {
    throw IoError("review store not found: " + config.store_dir.string());
  }
  ReviewStore store(config.store_dir, catalog);
  const std::vector<LabeledInstance> instances = store.export_accepted(config.instruction);
  if (instances.empty()) {
    const auto p = store.progress();
    std::size_t pending = 0;
    for (const auto& [_, c] : p) pending += c.pending;
    throw ValidationError("no accepted pairs to assemble (" + std::to_string(pending) +
                          " still pending); finish the review first");
  }
  const DatasetSplit split = split_dataset(instances, config.test_size, config.seed);

  const fs::path& dir = config.dataset_dir;
  fs::create_directories(dir);
  write_jsonl(std::span<const LabeledInstance>(split.train), dir / "train.jsonl");
  write_jsonl(std::span<const LabeledInstance>(split.test), dir / "test.jsonl");
  json manifest = split.manifest.to_json();
  manifest["instances"] = instances.size();
  manifest["instruction_digest"] = sha256_hex(config.instruction);
  write_json_artifact(manifest, dir / "manifest.json");
  write_json_artifact(prompt_layout_json(), dir / "prompt_layout.json");

  std::size_t secure = 0;
  for (const auto& i : instances) secure += i.output == render_label(Verdict::secure()) ? 1 : 0;
  out << "assembled " << instances.size() << " instances (" << instances.size() - secure << " vulnerable, "
      << secure << " secure)\n"
      << "train " << split.train.size() << "  test " << split.test.size() << "  seed " << split.seed << "\n"
      << "train digest " << split.manifest.train_digest << "\n"
      << "test digest  " << split.manifest.test_digest << "\n"
      << "written to " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

int cmd_eval(const ToolConfig& config, const EvalCommandOptions& options, std::ostream& out, std::ostream&) {
  if (!fs::is_regular_file(options.test_path)) {
    throw IoError("test file not found: " + options.test_path.string());
  }
  const auto test_set = read_instances_jsonl(options.test_path);
  if (test_set.empty()) throw ValidationError("test file is empty: " + options.test_path.string());
  BackendHandle handle = make_model_backend(config);

  EvalOptions eval_opts;
  eval_opts.max_new_tokens = config.eval_max_new_tokens;
  eval_opts.concurrency = config.eval_concurrency;
  eval_opts.max_error_rate = config.eval_max_error_rate;
  eval_opts.seed = config.seed;
  eval_opts.baseline = options.baseline;
  const EvalReport report = run_eval(*handle.backend, test_set, config.instruction, eval_opts);

  fs::create_directories(options.out_dir);
  json doc = report.to_json();
  doc["test_file"] = options.test_path.string();
  write_json_artifact(doc, options.out_dir / "report.json");
  write_eval_records(report.records, options.out_dir / "raw_outputs.jsonl");

  out << format_eval_summary(report);
  return 0;
}

// ---------------------------------------------------------------------------
// bench

namespace {

// Small fixed workload used when no instance file is supplied.
const std::vector<std::string>& builtin_bench_snippets() {
  static const std::vector<std::string> kSnippets = {
      "import subprocess\n\ndef ping(host):\n    return subprocess.run('ping -c 1 ' + host, shell=True)\n",
      "import sqlite3\n\ndef find_user(conn, name):\n    cur = conn.cursor()\n"
      "    cur.execute('SELECT * FROM users WHERE name = ?', (name,))\n    return cur.fetchone()\n",
      "import os\n\ndef read_upload(base, name):\n    path = os.path.join(base, name)\n"
      "    with open(path) as f:\n        return f.read()\n",
  };
  return kSnippets;
}

}  // namespace

int cmd_bench(const ToolConfig& config, const BenchCommandOptions& options, std::ostream& out, std::ostream&) {
  if (config.bench_measured < 1) throw ArgumentError("bench.measured must be >= 1");
  BenchConfig bench;
  if (options.workload_path) {
    for (const auto& inst : read_instances_jsonl(*options.workload_path)) {
      bench.workload.push_back(assemble_prompt(inst.instruction, inst.input));
    }
  } else {
    for (const auto& code : builtin_bench_snippets()) {
      bench.workload.push_back(assemble_prompt(config.instruction, code));
    }
  }
  bench.warmup_requests = config.bench_warmup;
  bench.measured_requests = config.bench_measured;
  bench.max_new_tokens = config.bench_max_new_tokens;
  bench.max_failures = config.bench_max_failures;
  bench.host_description = config.bench_host_description;

  BackendHandle handle = make_model_backend(config);
  if (options.dry_run) {
    const std::size_t issued = run_warmup(*handle.backend, bench);
    BenchReport empty;
    empty.warmup_requests = issued;
    empty.host_description = bench.host_description;
    empty.backend_id = handle.backend->id();
    json doc = empty.to_json();
    doc["dry_run"] = true;
    write_json_artifact(doc, options.report_path);
    out << "dry run: " << issued << " warmup requests issued, no statistics collected\n";
    return 0;
  }
  const BenchReport report = run_bench(*handle.backend, bench, *handle.clock);
  json doc = report.to_json();
  doc["dry_run"] = false;
  write_json_artifact(doc, options.report_path);
  out << format_bench_summary(report);
  return 0;
}

// ---------------------------------------------------------------------------
// scan

namespace {

std::string_view status_name(ScanFinding::Status s) {
  switch (s) {
    case ScanFinding::Status::kOk:
      return "ok";
    case ScanFinding::Status::kSkipped:
      return "skipped";
    case ScanFinding::Status::kError:
      return "error";
  }
  return "error";
}

struct ScanInput {
  std::string path;
  std::optional<std::string> content;  // preloaded (stdin)
  std::optional<std::string> problem;  // resolved before scanning
};

std::vector<ScanInput> expand_inputs(const std::vector<std::string>& paths, std::istream& in) {
  std::vector<ScanInput> inputs;
  for (const auto& p : paths) {
    if (p == "-") {
      std::ostringstream ss;
      ss << in.rdbuf();
      inputs.push_back({"<stdin>", ss.str(), std::nullopt});
      continue;
    }
    std::error_code ec;
    const auto status = fs::status(p, ec);
    if (ec || !fs::exists(status)) {
      inputs.push_back({p, std::nullopt, "no such file or directory"});
    } else if (fs::is_directory(status)) {
      std::vector<std::string> found;
      for (auto it = fs::recursive_directory_iterator(p, fs::directory_options::skip_permission_denied, ec);
           !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_regular_file() && it->path().extension() == ".py") found.push_back(it->path().string());
      }
      if (ec) inputs.push_back({p, std::nullopt, "cannot walk directory: " + ec.message()});
      std::sort(found.begin(), found.end());
      for (auto& f : found) inputs.push_back({std::move(f), std::nullopt, std::nullopt});
    } else {
      inputs.push_back({p, std::nullopt, std::nullopt});
    }
  }
  return inputs;
}

ScanFinding scan_one(ModelBackend& backend, const ToolConfig& config, const ScanInput& input) {
  ScanFinding f;
  f.path = input.path;
  if (input.problem) {
    f.status = ScanFinding::Status::kError;
    f.message = *input.problem;
    return f;
  }
  std::string code;
  if (input.content) {
    code = *input.content;
  } else {
    std::error_code ec;
    const auto size = fs::file_size(input.path, ec);
    if (!ec && size > config.scan_max_bytes) {
      f.status = ScanFinding::Status::kSkipped;
      f.message = "file is " + std::to_string(size) + " bytes, above the " + std::to_string(config.scan_max_bytes) +
                  "-byte limit";
      return f;
    }
    std::ifstream file(input.path, std::ios::binary);
    if (ec || !file) {
      f.status = ScanFinding::Status::kError;
      f.message = "cannot read file";
      return f;
    }
    std::ostringstream ss;
    ss << file.rdbuf();
    code = ss.str();
  }
  if (code.size() > config.scan_max_bytes) {
    f.status = ScanFinding::Status::kSkipped;
    f.message = "input is " + std::to_string(code.size()) + " bytes, above the " +
                std::to_string(config.scan_max_bytes) + "-byte limit";
    return f;
  }
  if (trim(code).empty()) {
    f.status = ScanFinding::Status::kSkipped;
    f.message = "empty file";
    return f;
  }
  try {
    CompletionRequest req;
    req.prompt = assemble_prompt(config.instruction, code);
    req.max_new_tokens = config.eval_max_new_tokens;
    const CompletionResult res = backend.complete(req);
    if (!res.trace.token_arrivals.empty()) {
      f.elapsed_seconds = to_seconds(res.trace.token_arrivals.back() - res.trace.request_sent_at);
    }
    f.verdict = parse_model_output(res.text);
  } catch (const std::exception& e) {
    f.status = ScanFinding::Status::kError;
    f.message = e.what();
  }
  return f;
}

}  // namespace

json to_json(const ScanFinding& f) {
  json j = {{"path", f.path}, {"status", status_name(f.status)}, {"elapsed_seconds", f.elapsed_seconds}};
  if (f.verdict) {
    const auto v = f.verdict->verdict();
    if (v) {
      j["verdict"] = render_label(*v);
    } else if (f.verdict->kind == ParsedOutput::Kind::kVulnerableUnknown) {
      j["verdict"] = "Vulnerable";
    } else {
      j["verdict"] = "Unparseable";
    }
    j["vulnerable"] = f.verdict->is_positive();
    j["cwe"] = f.verdict->cwe ? json(f.verdict->cwe->str()) : json(nullptr);
    j["raw_output"] = f.verdict->raw;
  } else {
    j["verdict"] = nullptr;
    j["vulnerable"] = false;
    j["cwe"] = nullptr;
    j["raw_output"] = nullptr;
  }
  j["message"] = f.message.empty() ? json(nullptr) : json(f.message);
  return j;
}

int scan_exit_code(const std::vector<ScanFinding>& findings) {
  bool any_error = false;
  bool all_skipped = true;
  for (const auto& f : findings) {
    if (f.verdict && f.verdict->is_positive()) return 1;
    any_error = any_error || f.status == ScanFinding::Status::kError;
    all_skipped = all_skipped && f.status == ScanFinding::Status::kSkipped;
  }
  return any_error || all_skipped ? 2 : 0;
}

int cmd_scan(const ToolConfig& config, const ScanOptions& options, std::istream& in, std::ostream& out,
             std::ostream& err) {
  if (options.paths.empty()) throw ArgumentError("scan needs at least one path (use - for standard input)");
  BackendHandle handle = make_model_backend(config);
  const std::vector<ScanInput> inputs = expand_inputs(options.paths, in);

  std::vector<ScanFinding> findings(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      findings[i] = scan_one(*handle.backend, config, inputs[i]);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(config.scan_workers, 1, std::max<std::size_t>(1, inputs.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }

  const int code = scan_exit_code(findings);
  json list = json::array();
  for (const auto& f : findings) list.push_back(to_json(f));
  const json doc = {{"schema_version", 1},
                    {"backend", handle.backend->id()},
                    {"instruction_digest", sha256_hex(config.instruction)},
                    {"timestamp", utc_timestamp()},
                    {"exit_code", code},
                    {"findings", list}};
  if (options.output == "-") {
    out << doc.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
  } else {
    write_json_artifact(doc, options.output);
  }

  std::ostream& summary = options.output == "-" ? err : out;
  std::size_t vulnerable = 0;
  for (const auto& f : findings) {
    const json j = to_json(f);
    if (f.status == ScanFinding::Status::kOk) {
      vulnerable += f.verdict && f.verdict->is_positive() ? 1 : 0;
      summary << f.path << ": " << j["verdict"].get<std::string>() << "\n";
    } else {
      summary << f.path << ": " << status_name(f.status) << " (" << f.message << ")\n";
    }
  }
  summary << findings.size() << " inputs, " << vulnerable << " vulnerable";
  if (options.output != "-") summary << "; findings: " << options.output;
  summary << "\n";
  return code;
}

}  // namespace cwescan
