#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/dataset.hpp"
#include "cwescan/model_backend.hpp"

namespace cwescan {

/// A model answer mapped onto the label vocabulary.
struct ParsedOutput {
  enum class Kind {
    kSecure,
    kVulnerable,         // with a CWE id
    kVulnerableUnknown,  // "vulnerable" but no id: positive, never an exact match
    kUnparseable,
  };
  Kind kind = Kind::kUnparseable;
  std::optional<CweId> cwe;
  std::string raw;
  std::string rule;  // which parse rule matched

  bool is_positive() const noexcept { return kind == Kind::kVulnerable || kind == Kind::kVulnerableUnknown; }
  /// Secure / Vulnerable(cwe) when the output names a full verdict.
  std::optional<Verdict> verdict() const;
};

/// Total: never throws. Rules, in order:
///   1 exact strict label after trimming
///   2 standalone "secure" word in the first non-empty line
///   3 "vulnerable" plus a CWE id within the first two non-empty lines
///   4 "vulnerable" without an id
///   5 otherwise unparseable
ParsedOutput parse_model_output(std::string_view text) noexcept;

enum class Cell { kTruePositive, kFalsePositive, kFalseNegative, kTrueNegative };

struct ScoredPrediction {
  Cell cell;
  bool exact_match;
};

/// Positive class is any Vulnerable verdict. Unparseable output counts as a
/// negative prediction.
ScoredPrediction score(const Verdict& gold, const ParsedOutput& predicted) noexcept;

struct ConfusionMatrix {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  void add(Cell cell) noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// nullopt marks a metric whose denominator is zero.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

/// Throws ArgumentError on an empty matrix.
Metrics compute_metrics(const ConfusionMatrix& m);

struct CweTally {
  std::uint64_t instances = 0;
  std::uint64_t exact_matches = 0;
  friend bool operator==(const CweTally&, const CweTally&) = default;
};

/// One evaluated row: everything needed to re-score without the model.
struct EvalRecord {
  std::size_t index = 0;
  std::string gold;             // strict label
  std::optional<std::string> raw_output;  // unset when the request failed
  std::optional<std::string> error;
  double elapsed_seconds = 0.0;
};

struct RunMetadata {
  std::string backend_id;
  std::string instruction_digest;
  std::optional<std::uint64_t> seed;
  std::string timestamp;
  bool baseline = false;
};

struct EvalReport {
  ConfusionMatrix matrix;
  Metrics metrics;
  std::map<CweId, CweTally> per_cwe;  // keyed by gold CWE of vulnerable rows
  CweTally secure;                    // gold Secure rows
  std::uint64_t unparseable = 0;
  std::uint64_t failed_requests = 0;
  RunMetadata metadata;
  std::vector<EvalRecord> records;

  /// Report document without the per-row records.
  nlohmann::json to_json() const;
};

nlohmann::json to_json(const EvalRecord& record);
EvalRecord eval_record_from_json(const nlohmann::json& j);
/// Raw-output archive: one record per line.
void write_eval_records(std::span<const EvalRecord> records, const std::filesystem::path& path);
std::vector<EvalRecord> read_eval_records(const std::filesystem::path& path);

/// Rebuilds a report from persisted records; deterministic.
EvalReport rescore(std::span<const EvalRecord> records, RunMetadata metadata);

struct EvalOptions {
  int max_new_tokens = 16;
  std::size_t concurrency = 1;
  double max_error_rate = 0.0;  // fraction of failed requests tolerated
  std::optional<std::uint64_t> seed;
  bool baseline = false;
};

/// One completion per instance through assemble_prompt. Per-instance backend
/// failures are recorded; throws EvalError when they exceed max_error_rate.
/// Throws ValidationError up front if a gold label is not strict.
EvalReport run_eval(ModelBackend& backend, std::span<const LabeledInstance> test_set,
                    std::string_view instruction, const EvalOptions& options = {});

/// Plain-text table with one row per metric.
std::string format_eval_summary(const EvalReport& report);

}  // namespace cwescan
