#include "cwescan/evaluator.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "cwescan/error.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Output parsing

std::optional<Verdict> ParsedOutput::verdict() const {
  if (kind == Kind::kSecure) return Verdict::secure();
  if (kind == Kind::kVulnerable && cwe) return Verdict::vulnerable(*cwe);
  return std::nullopt;
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool has_word(std::string_view lowered, std::string_view word) {
  for (std::size_t pos = lowered.find(word); pos != std::string_view::npos; pos = lowered.find(word, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(lowered[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right_ok = end == lowered.size() || !is_word_char(lowered[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::optional<CweId> find_cwe_id(std::string_view lowered) {
  for (std::size_t pos = lowered.find("cwe-"); pos != std::string_view::npos; pos = lowered.find("cwe-", pos + 1)) {
    if (pos > 0 && is_word_char(lowered[pos - 1])) continue;
    std::size_t end = pos + 4;
    while (end < lowered.size() && std::isdigit(static_cast<unsigned char>(lowered[end]))) ++end;
    if (auto id = try_parse_cwe_id(lowered.substr(pos, end - pos))) return id;
  }
  return std::nullopt;
}

}  // namespace

ParsedOutput parse_model_output(std::string_view text) noexcept {
  ParsedOutput out;
  try {
    out.raw = std::string(text);
    const std::string_view trimmed = trim(text);
    try {
      const Verdict v = parse_label_strict(trimmed);
      out.kind = v.is_secure() ? ParsedOutput::Kind::kSecure : ParsedOutput::Kind::kVulnerable;
      out.cwe = v.cwe();
      out.rule = "exact";
      return out;
    } catch (const ParseError&) {
    }

    std::vector<std::string> lines;
    for (auto line : split_lines(text)) {
      if (!trim(line).empty()) lines.push_back(to_lower(trim(line)));
      if (lines.size() == 2) break;
    }
    if (lines.empty()) {
      out.rule = "unparseable";
      return out;
    }
    if (has_word(lines[0], "secure")) {
      out.kind = ParsedOutput::Kind::kSecure;
      out.rule = "secure-word";
      return out;
    }
    const std::string head = lines.size() > 1 ? lines[0] + "\n" + lines[1] : lines[0];
    if (has_word(head, "vulnerable")) {
      if (auto id = find_cwe_id(head)) {
        out.kind = ParsedOutput::Kind::kVulnerable;
        out.cwe = id;
        out.rule = "vulnerable-with-id";
      } else {
        out.kind = ParsedOutput::Kind::kVulnerableUnknown;
        out.rule = "vulnerable-no-id";
      }
      return out;
    }
    out.rule = "unparseable";
  } catch (...) {
    out.kind = ParsedOutput::Kind::kUnparseable;
    out.cwe.reset();
    out.rule = "unparseable";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scoring

ScoredPrediction score(const Verdict& gold, const ParsedOutput& predicted) noexcept {
  const bool predicted_positive = predicted.is_positive();
  if (gold.is_vulnerable()) {
    const bool exact = predicted.kind == ParsedOutput::Kind::kVulnerable && predicted.cwe == gold.cwe();
    return {predicted_positive ? Cell::kTruePositive : Cell::kFalseNegative, exact};
  }
  return {predicted_positive ? Cell::kFalsePositive : Cell::kTrueNegative,
          predicted.kind == ParsedOutput::Kind::kSecure};
}

void ConfusionMatrix::add(Cell cell) noexcept {
  switch (cell) {
    case Cell::kTruePositive: ++tp; break;
    case Cell::kFalsePositive: ++fp; break;
    case Cell::kFalseNegative: ++fn; break;
    case Cell::kTrueNegative: ++tn; break;
  }
}

Metrics compute_metrics(const ConfusionMatrix& m) {
  if (m.total() == 0) throw ArgumentError("cannot compute metrics over an empty confusion matrix");
  Metrics out;
  out.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(m.total());
  if (m.tp + m.fp > 0) out.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  if (m.tp + m.fn > 0) out.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn); the integer form avoids rounding drift.
  if (out.precision && out.recall && (*out.precision + *out.recall) > 0.0) {
    out.f1 = 2.0 * static_cast<double>(m.tp) / static_cast<double>(2 * m.tp + m.fp + m.fn);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

json to_json(const EvalRecord& r) {
  json j = {{"index", r.index}, {"gold", r.gold}, {"elapsed_seconds", r.elapsed_seconds}};
  j["raw_output"] = r.raw_output ? json(*r.raw_output) : json(nullptr);
  j["error"] = r.error ? json(*r.error) : json(nullptr);
  return j;
}

EvalRecord eval_record_from_json(const json& j) {
  EvalRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.gold = j.at("gold").get<std::string>();
  if (j.contains("raw_output") && !j["raw_output"].is_null()) r.raw_output = j["raw_output"].get<std::string>();
  if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
  r.elapsed_seconds = j.value("elapsed_seconds", 0.0);
  return r;
}

void write_eval_records(std::span<const EvalRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  // Model output can split a multi-byte character; store it with U+FFFD rather than fail.
  for (const auto& r : records) {
    out << to_json(r).dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(eval_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

EvalReport rescore(std::span<const EvalRecord> records, RunMetadata metadata) {
  EvalReport report;
  report.metadata = std::move(metadata);
  report.records.assign(records.begin(), records.end());
  for (const auto& r : records) {
    const Verdict gold = parse_label_strict(r.gold);
    if (!r.raw_output) {
      ++report.failed_requests;
      continue;
    }
    const ParsedOutput parsed = parse_model_output(*r.raw_output);
    if (parsed.kind == ParsedOutput::Kind::kUnparseable) ++report.unparseable;
    const ScoredPrediction s = score(gold, parsed);
    report.matrix.add(s.cell);
    CweTally& tally = gold.is_vulnerable() ? report.per_cwe[*gold.cwe()] : report.secure;
    ++tally.instances;
    if (s.exact_match) ++tally.exact_matches;
  }
  if (report.matrix.total() > 0) report.metrics = compute_metrics(report.matrix);
  return report;
}

json EvalReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json per = json::object();
  for (const auto& [cwe, t] : per_cwe) per[cwe.str()] = {{"instances", t.instances}, {"exact_matches", t.exact_matches}};
  const bool evaluated = matrix.total() > 0;
  return {{"schema_version", 1},
          {"kind", "eval_report"},
          {"positive_class", "any Vulnerable verdict"},
          {"matrix", {{"tp", matrix.tp}, {"fp", matrix.fp}, {"fn", matrix.fn}, {"tn", matrix.tn}}},
          {"metrics",
           {{"accuracy", evaluated ? json(metrics.accuracy) : json(nullptr)},
            {"precision", opt(metrics.precision)},
            {"recall", opt(metrics.recall)},
            {"f1", opt(metrics.f1)}}},
          {"positive_predictions", matrix.tp + matrix.fp},
          {"per_cwe", per},
          {"secure", {{"instances", secure.instances}, {"exact_matches", secure.exact_matches}}},
          {"unparseable", unparseable},
          {"failed_requests", failed_requests},
          {"evaluated", matrix.total()},
          {"metadata",
           {{"backend_id", metadata.backend_id},
            {"instruction_digest", metadata.instruction_digest},
            {"seed", metadata.seed ? json(*metadata.seed) : json(nullptr)},
            {"timestamp", metadata.timestamp},
            {"baseline", metadata.baseline}}}};
}

EvalReport run_eval(ModelBackend& backend, std::span<const LabeledInstance> test_set,
                    std::string_view instruction, const EvalOptions& options) {
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    try {
      const Verdict v = parse_label_strict(test_set[i].output);
      if (render_label(v) != test_set[i].output) throw ParseError("non-canonical label");
    } catch (const ParseError&) {
      throw ValidationError("test instance " + std::to_string(i + 1) + " has a non-strict label '" +
                            test_set[i].output + "'");
    }
  }

  std::vector<EvalRecord> records(test_set.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < test_set.size(); i = next++) {
      EvalRecord& rec = records[i];
      rec.index = i;
      rec.gold = test_set[i].output;
      try {
        CompletionRequest req;
        req.prompt = assemble_prompt(instruction, test_set[i].input);
        req.max_new_tokens = options.max_new_tokens;
        const CompletionResult res = backend.complete(req);
        rec.raw_output = res.text;
        if (!res.trace.token_arrivals.empty()) {
          rec.elapsed_seconds = to_seconds(res.trace.token_arrivals.back() - res.trace.request_sent_at);
        }
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.concurrency, test_set.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  RunMetadata meta{backend.id(), sha256_hex(instruction), options.seed, utc_timestamp(), options.baseline};
  EvalReport report = rescore(records, std::move(meta));
  if (!test_set.empty()) {
    const double error_rate = static_cast<double>(report.failed_requests) / static_cast<double>(test_set.size());
    if (error_rate > options.max_error_rate) {
      std::string first;
      for (const auto& r : report.records) {
        if (r.error) {
          first = *r.error;
          break;
        }
      }
      throw EvalError(std::to_string(report.failed_requests) + " of " + std::to_string(test_set.size()) +
                      " requests failed (bound " + std::to_string(options.max_error_rate) + "); first: " + first);
    }
  }
  return report;
}

std::string format_eval_summary(const EvalReport& report) {
  auto pct = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << *v * 100.0 << "%";
    return ss.str();
  };
  const bool evaluated = report.matrix.total() > 0;
  std::ostringstream out;
  out << (report.metadata.baseline ? "Baseline (untuned) evaluation\n" : "Evaluation\n");
  out << "+-------------+------------+\n";
  out << "| Metric      | Value      |\n";
  out << "+-------------+------------+\n";
  auto row = [&](const char* name, const std::string& value) {
    out << "| " << std::left << std::setw(11) << name << " | " << std::setw(10) << value << " |\n";
  };
  row("Accuracy", evaluated ? pct(report.metrics.accuracy) : "undefined");
  row("Precision", pct(report.metrics.precision));
  row("Recall", pct(report.metrics.recall));
  row("F1-Score", pct(report.metrics.f1));
  out << "+-------------+------------+\n";
  const auto& m = report.matrix;
  out << "tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << " tn=" << m.tn << "  evaluated=" << m.total()
      << " positive_predictions=" << (m.tp + m.fp) << " unparseable=" << report.unparseable
      << " failed=" << report.failed_requests << "\n";
  std::uint64_t exact = report.secure.exact_matches, rows = report.secure.instances;
  for (const auto& [_, t] : report.per_cwe) {
    exact += t.exact_matches;
    rows += t.instances;
  }
  out << "exact-label matches: " << exact << "/" << rows << "\n";
  return out.str();
}

}  // namespace cwescan
