#include "cwescan/review_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include <unistd.h>

#include "cwescan/error.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

using nlohmann::json;
namespace fs = std::filesystem;

bool ReviewChecks::all_recorded() const noexcept {
  return classification_correct.value && fix_valid.value && realistic.value;
}

bool ReviewChecks::all_passed() const noexcept {
  return all_recorded() && *classification_correct.value && *fix_valid.value && *realistic.value;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json check_to_json(const ReviewCheck& c) {
  json j = {{"value", c.value ? json(*c.value) : json(nullptr)}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

ReviewCheck check_from_json(const json& j, const char* name) {
  ReviewCheck c;
  if (j.is_null()) return c;
  if (j.is_boolean()) {
    c.value = j.get<bool>();
    return c;
  }
  if (!j.is_object()) throw ValidationError(std::string("check '") + name + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "value" && key != "note") {
      throw ValidationError(std::string("unknown field '") + key + "' in check '" + name + "'");
    }
  }
  if (j.contains("value") && !j["value"].is_null()) {
    if (!j["value"].is_boolean()) throw ValidationError(std::string("check '") + name + "' value must be boolean");
    c.value = j["value"].get<bool>();
  }
  if (j.contains("note")) {
    if (!j["note"].is_string()) throw ValidationError(std::string("check '") + name + "' note must be a string");
    c.note = j["note"].get<std::string>();
  }
  return c;
}

const char* kind_name(ReviewDecision::Kind k) {
  switch (k) {
    case ReviewDecision::Kind::kAccept: return "accept";
    case ReviewDecision::Kind::kReject: return "reject";
    case ReviewDecision::Kind::kEdit: return "edit";
  }
  return "accept";
}

}  // namespace

json to_json(const ReviewChecks& checks) {
  return {{"classification_correct", check_to_json(checks.classification_correct)},
          {"fix_valid", check_to_json(checks.fix_valid)},
          {"realistic", check_to_json(checks.realistic)}};
}

ReviewChecks checks_from_json(const json& j) {
  ReviewChecks checks;
  if (j.is_null()) return checks;
  if (!j.is_object()) throw ValidationError("checks must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "classification_correct" && key != "fix_valid" && key != "realistic") {
      throw ValidationError("unknown check '" + key + "'");
    }
  }
  auto get = [&](const char* key) { return j.contains(key) ? j[key] : json(nullptr); };
  checks.classification_correct = check_from_json(get("classification_correct"), "classification_correct");
  checks.fix_valid = check_from_json(get("fix_valid"), "fix_valid");
  checks.realistic = check_from_json(get("realistic"), "realistic");
  return checks;
}

json to_json(const ReviewDecision& d) {
  json j = {{"kind", kind_name(d.kind)}, {"reviewer", d.reviewer}, {"timestamp", d.timestamp}};
  if (d.kind == ReviewDecision::Kind::kReject) j["reason"] = d.reason;
  if (d.vulnerable) j["vulnerable"] = *d.vulnerable;
  if (d.fixed) j["fixed"] = *d.fixed;
  return j;
}

ReviewDecision decision_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("decision must be an object");
  static const std::set<std::string> kFields = {"kind", "reason", "vulnerable", "fixed", "reviewer", "timestamp"};
  for (const auto& [key, _] : j.items()) {
    if (!kFields.count(key)) throw ValidationError("unknown decision field '" + key + "'");
  }
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw ValidationError(std::string("decision field '") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  ReviewDecision d;
  const auto kind = str("kind");
  if (!kind) throw ValidationError("decision kind is required");
  if (*kind == "accept") d.kind = ReviewDecision::Kind::kAccept;
  else if (*kind == "reject") d.kind = ReviewDecision::Kind::kReject;
  else if (*kind == "edit") d.kind = ReviewDecision::Kind::kEdit;
  else throw ValidationError("unknown decision kind '" + *kind + "'");
  d.reason = str("reason").value_or("");
  d.vulnerable = str("vulnerable");
  d.fixed = str("fixed");
  d.reviewer = str("reviewer").value_or("");
  d.timestamp = str("timestamp").value_or("");
  return d;
}

json to_json(const AuditRecord& r) {
  return {{"seq", r.seq},
          {"item_id", r.item_id},
          {"checks", to_json(r.checks)},
          {"decision", to_json(r.decision)},
          {"prior_state", to_json(r.prior_state)},
          {"new_state", to_json(r.new_state)}};
}

AuditRecord audit_record_from_json(const json& j) {
  AuditRecord r;
  r.seq = j.at("seq").get<std::uint64_t>();
  r.item_id = j.at("item_id").get<std::string>();
  r.checks = checks_from_json(j.at("checks"));
  r.decision = decision_from_json(j.at("decision"));
  r.prior_state = review_state_from_json(j.at("prior_state"));
  r.new_state = review_state_from_json(j.at("new_state"));
  return r;
}

// ---------------------------------------------------------------------------
// Replay

namespace {

ReviewState outcome_of(const ReviewDecision& d) {
  switch (d.kind) {
    case ReviewDecision::Kind::kAccept: return ReviewState::accepted();
    case ReviewDecision::Kind::kReject: return ReviewState::rejected(d.reason);
    case ReviewDecision::Kind::kEdit: return ReviewState::edited_then_accepted();
  }
  return ReviewState::accepted();
}

// The item after `decision` is applied. Assumes the decision was validated.
ReviewItem apply_decision(const ReviewItem& item, const ReviewChecks& checks, const ReviewDecision& decision) {
  ReviewItem next = item;
  next.checks = checks;
  next.decision = decision;
  if (decision.kind == ReviewDecision::Kind::kEdit) {
    next.pair = PairedExample(item.pair.cwe, Snippet(decision.vulnerable.value_or(item.pair.vulnerable.code())),
                              Snippet(decision.fixed.value_or(item.pair.fixed.code())),
                              item.pair.provenance, ReviewState::pending());
  }
  next.pair.review_state = item.pair.review_state.transition_to(outcome_of(decision));
  return next;
}

std::string item_id_for(const PairedExample& pair) { return "itm-" + pair.content_digest().substr(0, 16); }

}  // namespace

std::map<std::string, ReviewItem> replay_audit(std::map<std::string, ReviewItem> items,
                                               std::span<const AuditRecord> log) {
  std::uint64_t expected_seq = 1;
  for (const auto& rec : log) {
    const std::string where = "audit record " + std::to_string(rec.seq);
    if (rec.seq != expected_seq++) throw StoreCorruptError(where + ": out of sequence");
    auto it = items.find(rec.item_id);
    if (it == items.end()) throw StoreCorruptError(where + ": unknown item " + rec.item_id);
    if (!(it->second.pair.review_state == rec.prior_state)) {
      throw StoreCorruptError(where + ": prior state does not match item " + rec.item_id);
    }
    try {
      ReviewItem next = apply_decision(it->second, rec.checks, rec.decision);
      if (!(next.pair.review_state == rec.new_state)) {
        throw StoreCorruptError(where + ": new state does not follow from the decision");
      }
      it->second = std::move(next);
    } catch (const StoreCorruptError&) {
      throw;
    } catch (const Error& e) {
      throw StoreCorruptError(where + ": " + e.what());
    }
  }
  return items;
}

// ---------------------------------------------------------------------------
// Store

namespace {

void append_line_durably(const fs::path& path, const std::string& line) {
  std::FILE* f = std::fopen(path.c_str(), "ab");
  if (!f) throw IoError("cannot open " + path.string() + " for append");
  const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size() &&
                  std::fputc('\n', f) != EOF && std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw IoError("append to " + path.string() + " failed");
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string segment_name(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "segment-%06zu.jsonl", n);
  return buf;
}

}  // namespace

ReviewStore::ReviewStore(fs::path dir, const CweCatalog& catalog, SyntaxChecker checker)
    : dir_(std::move(dir)), catalog_(catalog), checker_(std::move(checker)) {
  load();
}

void ReviewStore::load() {
  std::error_code ec;
  fs::create_directories(dir_ / "segments", ec);
  if (ec) throw IoError("cannot create store directory " + dir_.string() + ": " + ec.message());

  std::vector<fs::path> segments;
  for (const auto& entry : fs::directory_iterator(dir_ / "segments")) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("segment-") && name.ends_with(".jsonl")) {
      segments.push_back(entry.path());
    }
  }
  std::sort(segments.begin(), segments.end());

  for (const auto& seg : segments) {
    std::ifstream in(seg, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const std::string where = "segment " + seg.filename().string() + " line " + std::to_string(line_no);
      try {
        const json j = json::parse(line);
        ReviewItem item{j.at("item_id").get<std::string>(), j.at("seq").get<std::uint64_t>(),
                        pair_from_json(j.at("pair")), {}, std::nullopt};
        if (!item.pair.review_state.is_pending()) throw StoreCorruptError("enqueued item is not pending");
        if (item.id != item_id_for(item.pair)) throw StoreCorruptError("item id does not match content");
        if (initial_.count(item.id)) throw StoreCorruptError("duplicate item " + item.id);
        order_.push_back(item.id);
        initial_.emplace(item.id, std::move(item));
      } catch (const StoreCorruptError& e) {
        throw StoreCorruptError(where + ": " + e.what());
      } catch (const std::exception& e) {
        throw StoreCorruptError(where + ": " + e.what());
      }
    }
    next_segment_ = std::max<std::size_t>(next_segment_, std::stoul(seg.filename().string().substr(8)) + 1);
  }

  const fs::path audit_path = dir_ / "audit.jsonl";
  if (fs::exists(audit_path)) {
    std::ifstream in(audit_path, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        audit_.push_back(audit_record_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw StoreCorruptError("audit.jsonl line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }
  items_ = replay_audit(initial_, audit_);

  // Reconcile the materialized states with the audit log's truth.
  const fs::path state_path = dir_ / "state.json";
  bool consistent = false;
  if (fs::exists(state_path)) {
    auto snap = json::parse(read_file(state_path), nullptr, false);
    if (!snap.is_discarded() && snap.is_object() && snap.value("audit_length", std::size_t{0}) == audit_.size() &&
        snap.contains("states") && snap["states"].is_object() && snap["states"].size() == items_.size()) {
      consistent = true;
      for (const auto& [id, item] : items_) {
        if (!snap["states"].contains(id) || snap["states"][id] != to_json(item.pair.review_state)) {
          consistent = false;
          break;
        }
      }
    }
    recovered_ = !consistent;
  } else {
    recovered_ = !audit_.empty();
  }
  if (!consistent) write_state_snapshot(items_, audit_.size());
}

void ReviewStore::write_state_snapshot(const std::map<std::string, ReviewItem>& items,
                                       std::size_t audit_len) const {
  json states = json::object();
  for (const auto& [id, item] : items) states[id] = to_json(item.pair.review_state);
  write_atomically(dir_ / "state.json", json{{"audit_length", audit_len}, {"states", states}}.dump());
}

std::size_t ReviewStore::enqueue(const GenerationBatch& batch) { return enqueue(batch.parsed); }

std::size_t ReviewStore::enqueue(std::span<const PairedExample> candidates) {
  for (const auto& c : candidates) {
    if (!c.review_state.is_pending()) {
      throw ContractError("only pending candidates can be enqueued (got " + std::string(c.review_state.name()) + ")");
    }
  }
  std::unique_lock lock(mu_);
  std::vector<ReviewItem> fresh;
  std::set<std::string> ids;
  std::uint64_t seq = order_.size();
  for (const auto& c : candidates) {
    const std::string id = item_id_for(c);
    if (initial_.count(id) || !ids.insert(id).second) continue;
    fresh.push_back(ReviewItem{id, ++seq, c, {}, std::nullopt});
  }
  if (fresh.empty()) return 0;

  std::string content;
  for (const auto& item : fresh) {
    content += json{{"item_id", item.id}, {"seq", item.enqueue_seq}, {"pair", to_json(item.pair)}}.dump();
    content += '\n';
  }
  write_atomically(dir_ / "segments" / segment_name(next_segment_), content);
  ++next_segment_;
  for (auto& item : fresh) {
    order_.push_back(item.id);
    initial_.emplace(item.id, item);
    items_.emplace(item.id, std::move(item));
  }
  write_state_snapshot(items_, audit_.size());
  return fresh.size();
}

std::map<CweId, ProgressCounts> ReviewStore::progress_locked() const {
  std::map<CweId, ProgressCounts> out;
  for (const auto& [id, item] : items_) {
    auto& c = out[item.pair.cwe];
    switch (item.pair.review_state.kind()) {
      case ReviewState::Kind::kPending: ++c.pending; break;
      case ReviewState::Kind::kAccepted: ++c.accepted; break;
      case ReviewState::Kind::kEditedThenAccepted: ++c.edited_then_accepted; break;
      case ReviewState::Kind::kRejected: ++c.rejected; break;
    }
  }
  return out;
}

std::map<CweId, ProgressCounts> ReviewStore::progress() const {
  std::shared_lock lock(mu_);
  return progress_locked();
}

PendingPage ReviewStore::list_pending(std::optional<CweId> filter, std::size_t page,
                                      std::size_t page_size) const {
  if (page_size == 0) throw ArgumentError("page_size must be >= 1");
  if (page == 0) throw ArgumentError("pages are numbered from 1");
  std::shared_lock lock(mu_);
  PendingPage out;
  out.page = page;
  out.page_size = page_size;
  out.progress = progress_locked();
  std::vector<const ReviewItem*> matching;
  for (const auto& id : order_) {
    const auto& item = items_.at(id);
    if (!item.pair.review_state.is_pending()) continue;
    if (filter && item.pair.cwe != *filter) continue;
    matching.push_back(&item);
  }
  out.total_items = matching.size();
  out.total_pages = (matching.size() + page_size - 1) / page_size;
  const std::size_t first = (page - 1) * page_size;
  for (std::size_t i = first; i < matching.size() && i < first + page_size; ++i) {
    const auto& p = matching[i]->pair;
    out.items.push_back({matching[i]->id, p.cwe, p.vulnerable.line_count(), p.fixed.line_count(),
                         p.provenance.template_version});
  }
  return out;
}

ReviewItem ReviewStore::get(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = items_.find(id);
  if (it == items_.end()) throw NotFoundError("no review item '" + id + "'");
  return it->second;
}

ReviewItem ReviewStore::submit_decision(const std::string& id, const ReviewChecks& checks,
                                        ReviewDecision decision) {
  std::unique_lock lock(mu_);
  auto it = items_.find(id);
  if (it == items_.end()) throw NotFoundError("no review item '" + id + "'");
  const ReviewItem& current = it->second;
  if (!current.pair.review_state.is_pending()) {
    throw ConflictError("item " + id + " was already decided (" +
                        std::string(current.pair.review_state.name()) + ")");
  }
  if (trim(decision.reviewer).empty()) throw ValidationError("reviewer is required");
  if (decision.kind != ReviewDecision::Kind::kEdit && (decision.vulnerable || decision.fixed)) {
    throw ValidationError("replacement snippets are only allowed on edit decisions");
  }
  switch (decision.kind) {
    case ReviewDecision::Kind::kReject:
      if (trim(decision.reason).empty()) throw ValidationError("reject requires a non-empty reason");
      break;
    case ReviewDecision::Kind::kAccept:
    case ReviewDecision::Kind::kEdit:
      if (!checks.all_recorded()) {
        throw ValidationError("accept requires all three checks (classification_correct, fix_valid, realistic)");
      }
      if (!checks.all_passed()) throw ValidationError("accept requires all three checks to pass");
      if (!decision.reason.empty()) throw ValidationError("only reject decisions carry a reason");
      break;
  }
  if (decision.kind == ReviewDecision::Kind::kEdit) {
    if (!decision.vulnerable && !decision.fixed) throw ValidationError("edit requires a replacement snippet");
    std::vector<std::string> sources;
    std::vector<const char*> labels;
    for (auto [label, text] : {std::pair{"vulnerable", &decision.vulnerable}, std::pair{"fixed", &decision.fixed}}) {
      if (!*text) continue;
      if (trim(**text).empty()) throw ValidationError(std::string(label) + " snippet is empty");
      sources.push_back(**text);
      labels.push_back(label);
    }
    const std::string& new_vuln = decision.vulnerable.value_or(current.pair.vulnerable.code());
    const std::string& new_fixed = decision.fixed.value_or(current.pair.fixed.code());
    if (new_vuln == new_fixed) throw ValidationError("pair not distinct");
    const auto results = checker_.check_all(sources);
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (results[i]) throw ValidationError(results[i]->describe() + " (" + labels[i] + " snippet)");
    }
  }
  if (decision.timestamp.empty()) decision.timestamp = utc_timestamp();

  ReviewItem next = apply_decision(current, checks, decision);
  AuditRecord record{audit_.size() + 1, id, checks, decision, current.pair.review_state, next.pair.review_state};

  auto staged = items_;
  staged.insert_or_assign(id, next);
  write_state_snapshot(staged, audit_.size() + 1);
  try {
    append_line_durably(dir_ / "audit.jsonl", to_json(record).dump());
  } catch (const IoError&) {
    write_state_snapshot(items_, audit_.size());
    throw;
  }
  audit_.push_back(std::move(record));
  it->second = next;
  return next;
}

std::vector<LabeledInstance> ReviewStore::export_accepted(std::string_view instruction) const {
  std::shared_lock lock(mu_);
  std::vector<const ReviewItem*> accepted;
  for (const auto& [id, item] : items_) {
    if (item.pair.review_state.is_accepted_family()) accepted.push_back(&item);
  }
  std::sort(accepted.begin(), accepted.end(), [&](const ReviewItem* a, const ReviewItem* b) {
    const int ra = catalog_.rank_of(a->pair.cwe), rb = catalog_.rank_of(b->pair.cwe);
    if (ra != rb) return ra < rb;
    if (a->pair.cwe != b->pair.cwe) return a->pair.cwe < b->pair.cwe;
    return a->id < b->id;
  });
  std::vector<LabeledInstance> out;
  out.reserve(accepted.size() * 2);
  for (const auto* item : accepted) {
    for (auto& inst : expand_pair(item->pair, instruction)) out.push_back(std::move(inst));
  }
  return out;
}

std::vector<AuditRecord> ReviewStore::audit_log() const {
  std::shared_lock lock(mu_);
  return audit_;
}

std::vector<ReviewItem> ReviewStore::items() const {
  std::shared_lock lock(mu_);
  std::vector<ReviewItem> out;
  for (const auto& id : order_) out.push_back(items_.at(id));
  return out;
}

std::map<std::string, ReviewItem> ReviewStore::initial_items() const {
  std::shared_lock lock(mu_);
  return initial_;
}

}  // namespace cwescan
