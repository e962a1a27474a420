#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/cwe_catalog.hpp"

namespace cwescan {

inline constexpr std::string_view kDefaultInstruction =
    "Analyze the following Python code snippet and determine whether it contains one of the "
    "MITRE Top 25 CWE weaknesses. Respond with 'Vulnerable - CWE-<id>' or 'Secure'.";

// Secure, or Vulnerable with a CWE id.
class Verdict {
 public:
  static Verdict secure() noexcept { return Verdict(std::nullopt); }
  static Verdict vulnerable(CweId cwe) noexcept { return Verdict(cwe); }

  bool is_secure() const noexcept { return !cwe_; }
  bool is_vulnerable() const noexcept { return cwe_.has_value(); }
  const std::optional<CweId>& cwe() const noexcept { return cwe_; }

  friend bool operator==(const Verdict&, const Verdict&) = default;

 private:
  explicit Verdict(std::optional<CweId> cwe) noexcept : cwe_(cwe) {}
  std::optional<CweId> cwe_;
};

/// "Secure" or "Vulnerable - CWE-<n>".
std::string render_label(const Verdict& verdict);

/// Inverse of render_label. Only a single trailing newline is tolerated;
/// anything else throws ParseError.
Verdict parse_label_strict(std::string_view text);

class Snippet {
 public:
  /// Throws ValidationError when `code` is blank.
  explicit Snippet(std::string code);

  const std::string& code() const noexcept { return code_; }
  std::size_t line_count() const noexcept;

  friend bool operator==(const Snippet&, const Snippet&) = default;

 private:
  std::string code_;
};

struct Provenance {
  std::string backend;
  std::string template_version;
  std::string generated_at;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

class ReviewState {
 public:
  enum class Kind { kPending, kAccepted, kRejected, kEditedThenAccepted };

  static ReviewState pending() { return ReviewState(Kind::kPending, {}); }
  static ReviewState accepted() { return ReviewState(Kind::kAccepted, {}); }
  static ReviewState edited_then_accepted() { return ReviewState(Kind::kEditedThenAccepted, {}); }
  /// Throws ValidationError when `reason` is blank.
  static ReviewState rejected(std::string reason);

  Kind kind() const noexcept { return kind_; }
  const std::string& reason() const noexcept { return reason_; }
  bool is_pending() const noexcept { return kind_ == Kind::kPending; }
  bool is_accepted_family() const noexcept {
    return kind_ == Kind::kAccepted || kind_ == Kind::kEditedThenAccepted;
  }
  /// "pending" | "accepted" | "rejected" | "edited_then_accepted"
  std::string_view name() const noexcept;

  /// Only pending -> {accepted, rejected, edited_then_accepted} is legal.
  ReviewState transition_to(const ReviewState& next) const;

  friend bool operator==(const ReviewState&, const ReviewState&) = default;

 private:
  ReviewState(Kind kind, std::string reason) : kind_(kind), reason_(std::move(reason)) {}
  Kind kind_;
  std::string reason_;
};

struct PairedExample {
  /// Throws ValidationError when the two snippets are identical.
  PairedExample(CweId cwe, Snippet vulnerable, Snippet fixed, Provenance provenance,
                ReviewState review_state = ReviewState::pending());

  CweId cwe;
  Snippet vulnerable;
  Snippet fixed;
  Provenance provenance;
  ReviewState review_state;

  /// Digest of (cwe, vulnerable code, fixed code); the dedup key.
  std::string content_digest() const;

  friend bool operator==(const PairedExample&, const PairedExample&) = default;
};

struct LabeledInstance {
  std::string instruction;
  std::string input;
  std::string output;
  // CWE of the pair this row came from; lets Secure rows be stratified per CWE.
  std::optional<CweId> source_cwe;

  friend bool operator==(const LabeledInstance&, const LabeledInstance&) = default;
};

/// Vulnerable row then fixed row. Throws ContractError unless the pair is
/// accepted or edited_then_accepted.
std::vector<LabeledInstance> expand_pair(const PairedExample& pair, std::string_view instruction);

/// Throws ValidationError if the rows do not all share one byte-identical instruction.
void require_single_instruction(std::span<const LabeledInstance> instances);

struct StratumCounts {
  std::size_t vulnerable = 0;
  std::size_t secure = 0;
  friend bool operator==(const StratumCounts&, const StratumCounts&) = default;
};

struct SplitManifest {
  std::uint64_t seed = 0;
  std::size_t test_size = 0;
  // Keyed by "CWE-<n>", or "unknown" for Secure rows without a source CWE.
  std::map<std::string, StratumCounts> train_counts;
  std::map<std::string, StratumCounts> test_counts;
  std::string train_digest;
  std::string test_digest;

  nlohmann::json to_json() const;
  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

struct DatasetSplit {
  std::vector<LabeledInstance> train;
  std::vector<LabeledInstance> test;
  std::uint64_t seed = 0;
  SplitManifest manifest;
};

/// Seeded split stratified by (source CWE, verdict) with largest-remainder
/// quotas. Both sides keep the input order. Throws ArgumentError unless
/// 0 < test_size < instances.size().
DatasetSplit split_dataset(std::span<const LabeledInstance> instances, std::size_t test_size,
                           std::uint64_t seed);

// JSONL persistence. Readers reject unknown fields and report the 1-based
// line number of the first malformed record.
nlohmann::json to_json(const LabeledInstance& instance);
nlohmann::json to_json(const PairedExample& pair);
nlohmann::json to_json(const ReviewState& state);
LabeledInstance instance_from_json(const nlohmann::json& j);
PairedExample pair_from_json(const nlohmann::json& j);
ReviewState review_state_from_json(const nlohmann::json& j);

/// Canonical JSONL bytes of `instances`; the split digests hash this.
std::string to_jsonl(std::span<const LabeledInstance> instances);

std::size_t write_jsonl(std::span<const LabeledInstance> instances, const std::filesystem::path& path);
std::size_t write_jsonl(std::span<const PairedExample> pairs, const std::filesystem::path& path);
std::vector<LabeledInstance> read_instances_jsonl(const std::filesystem::path& path);
std::vector<PairedExample> read_pairs_jsonl(const std::filesystem::path& path);

}  // namespace cwescan
