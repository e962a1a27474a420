#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/cwe_catalog.hpp"
#include "cwescan/dataset.hpp"
#include "cwescan/syntax_check.hpp"
#include "cwescan/synth_generator.hpp"

namespace cwescan {

// One reviewer judgment; `value` is unset until the reviewer records it.
struct ReviewCheck {
  std::optional<bool> value;
  std::string note;
  friend bool operator==(const ReviewCheck&, const ReviewCheck&) = default;
};

// (a) classification correct, (b) fix valid, (c) realistic.
struct ReviewChecks {
  ReviewCheck classification_correct;
  ReviewCheck fix_valid;
  ReviewCheck realistic;

  bool all_recorded() const noexcept;
  bool all_passed() const noexcept;
  friend bool operator==(const ReviewChecks&, const ReviewChecks&) = default;
};

struct ReviewDecision {
  enum class Kind { kAccept, kReject, kEdit };
  Kind kind = Kind::kAccept;
  std::string reason;                      // reject only
  std::optional<std::string> vulnerable;  // edit only: replacement snippets
  std::optional<std::string> fixed;
  std::string reviewer;
  std::string timestamp;  // filled by the store when empty

  friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

struct ReviewItem {
  std::string id;
  std::uint64_t enqueue_seq = 0;
  PairedExample pair;
  ReviewChecks checks;
  std::optional<ReviewDecision> decision;
};

struct AuditRecord {
  std::uint64_t seq = 0;  // position in the audit log, 1-based
  std::string item_id;
  ReviewChecks checks;
  ReviewDecision decision;
  ReviewState prior_state = ReviewState::pending();
  ReviewState new_state = ReviewState::pending();
};

struct ProgressCounts {
  std::size_t pending = 0;
  std::size_t accepted = 0;
  std::size_t edited_then_accepted = 0;
  std::size_t rejected = 0;
  std::size_t total() const noexcept { return pending + accepted + edited_then_accepted + rejected; }
  friend bool operator==(const ProgressCounts&, const ProgressCounts&) = default;
};

struct ItemSummary {
  std::string id;
  CweId cwe{1};
  std::size_t vulnerable_lines = 0;
  std::size_t fixed_lines = 0;
  std::string template_version;
};

struct PendingPage {
  std::vector<ItemSummary> items;
  std::size_t page = 1;
  std::size_t page_size = 0;
  std::size_t total_items = 0;
  std::size_t total_pages = 0;
  std::map<CweId, ProgressCounts> progress;
};

nlohmann::json to_json(const ReviewChecks& checks);
ReviewChecks checks_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ReviewDecision& decision);
ReviewDecision decision_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AuditRecord& record);
AuditRecord audit_record_from_json(const nlohmann::json& j);

/// Applies an audit log to freshly enqueued items and returns the final state
/// of every item. Throws StoreCorruptError on records that do not fit.
std::map<std::string, ReviewItem> replay_audit(std::map<std::string, ReviewItem> items,
                                               std::span<const AuditRecord> log);

/// File-backed review queue rooted at one directory:
///   segments/segment-NNNNNN.jsonl  enqueued items, one immutable file per enqueue
///   audit.jsonl                    append-only decision log (source of truth)
///   state.json                     materialized review states
/// On open, state.json is compared to the audit replay; a mismatch (crash
/// between the two writes) is rolled back to the audit log.
class ReviewStore {
 public:
  explicit ReviewStore(std::filesystem::path dir, const CweCatalog& catalog = default_catalog(),
                       SyntaxChecker checker = SyntaxChecker());

  /// Returns how many candidates were new. Duplicates (by content digest) are
  /// skipped. Throws ContractError for non-pending candidates, IoError on
  /// storage failure (queue unchanged).
  std::size_t enqueue(const GenerationBatch& batch);
  std::size_t enqueue(std::span<const PairedExample> candidates);

  /// 1-based pages in enqueue order; `page_size` must be >= 1.
  PendingPage list_pending(std::optional<CweId> filter, std::size_t page, std::size_t page_size) const;

  ReviewItem get(const std::string& id) const;

  /// Validates, then writes state and audit. Errors: NotFoundError,
  /// ConflictError (already decided), ValidationError (checks, reason or
  /// edited snippets). Nothing changes on error.
  ReviewItem submit_decision(const std::string& id, const ReviewChecks& checks,
                             ReviewDecision decision);

  /// Accepted and edited_then_accepted pairs expanded to instances, ordered by
  /// catalog rank then item id.
  std::vector<LabeledInstance> export_accepted(std::string_view instruction) const;

  std::map<CweId, ProgressCounts> progress() const;
  std::vector<AuditRecord> audit_log() const;
  std::vector<ReviewItem> items() const;  // enqueue order
  /// Enqueued (pre-decision) items, the input of replay_audit.
  std::map<std::string, ReviewItem> initial_items() const;

  bool recovered_on_open() const noexcept { return recovered_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  void load();
  void write_state_snapshot(const std::map<std::string, ReviewItem>& items, std::size_t audit_len) const;
  std::map<CweId, ProgressCounts> progress_locked() const;

  std::filesystem::path dir_;
  const CweCatalog& catalog_;
  SyntaxChecker checker_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ReviewItem> initial_;
  std::map<std::string, ReviewItem> items_;
  std::vector<std::string> order_;  // ids in enqueue order
  std::vector<AuditRecord> audit_;
  std::size_t next_segment_ = 1;
  bool recovered_ = false;
};

}  // namespace cwescan
