#include "cwescan/cwe_catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "cwescan/error.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

CweId::CweId(std::uint32_t number) : number_(number) {
  if (number == 0) {
    throw ParseError("CWE number must be >= 1");
  }
}

std::string CweId::str() const { return "CWE-" + std::to_string(number_); }

std::optional<CweId> try_parse_cwe_id(std::string_view text) noexcept {
  const std::string_view t = trim(text);
  if (t.size() < 5) return std::nullopt;
  if (!iequals(t.substr(0, 4), "cwe-")) return std::nullopt;
  const std::string_view digits = t.substr(4);
  std::uint64_t value = 0;
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    value = value * 10 + static_cast<std::uint64_t>(c - '0');
    if (value > std::numeric_limits<std::uint32_t>::max()) return std::nullopt;
  }
  if (value == 0) return std::nullopt;
  return CweId(static_cast<std::uint32_t>(value));
}

CweId parse_cwe_id(std::string_view text) {
  if (auto id = try_parse_cwe_id(text)) return *id;
  throw ParseError("invalid CWE id: '" + std::string(text) + "'");
}

CweCatalog::CweCatalog(std::vector<CweEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() != kSize) {
    throw LoadError("expected 25 entries, found " + std::to_string(entries_.size()));
  }
  std::set<int> ranks;
  std::set<CweId> ids;
  for (const auto& e : entries_) {
    if (e.rank < 1 || e.rank > static_cast<int>(kSize)) {
      throw LoadError("entry " + e.id.str() + " has rank " + std::to_string(e.rank) +
                      " outside 1..25");
    }
    if (!ranks.insert(e.rank).second) {
      throw LoadError("duplicate rank " + std::to_string(e.rank) + " (entry " + e.id.str() + ")");
    }
    if (!ids.insert(e.id).second) {
      throw LoadError("duplicate id " + e.id.str() + " (rank " + std::to_string(e.rank) + ")");
    }
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const CweEntry& a, const CweEntry& b) { return a.rank < b.rank; });
}

const CweEntry* CweCatalog::find(CweId id) const noexcept {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const CweEntry& e) { return e.id == id; });
  return it == entries_.end() ? nullptr : &*it;
}

const CweEntry& CweCatalog::at(CweId id) const {
  if (const auto* e = find(id)) return *e;
  throw NotFoundError(id.str() + " is not in the catalog");
}

int CweCatalog::rank_of(CweId id) const noexcept {
  const auto* e = find(id);
  return e ? e->rank : static_cast<int>(kSize) + 1;
}

namespace {

std::vector<CweEntry> builtin_entries() {
  // MITRE CWE Top 25 Most Dangerous Software Weaknesses, 2023 edition.
  struct Row {
    std::uint32_t id;
    const char* name;
    const char* summary;
  };
  static constexpr Row kRows[] = {
      {787, "Out-of-bounds Write",
       "The product writes data past the end, or before the beginning, of the intended buffer."},
      {79, "Cross-site Scripting",
       "User-controllable input is placed in a web page without neutralizing markup or script."},
      {89, "SQL Injection",
       "An SQL command is built from externally influenced input without neutralizing special elements."},
      {416, "Use After Free",
       "Memory or a resource is referenced after it has been freed or closed."},
      {78, "OS Command Injection",
       "An operating system command is built from externally influenced input without neutralization."},
      {20, "Improper Input Validation",
       "Input is not validated, or is validated incorrectly, before it is processed."},
      {125, "Out-of-bounds Read",
       "The product reads data past the end, or before the beginning, of the intended buffer."},
      {22, "Path Traversal",
       "A pathname built from external input can resolve outside the restricted directory."},
      {352, "Cross-Site Request Forgery",
       "The application does not verify that a state-changing request was intentionally submitted."},
      {434, "Unrestricted Upload of File with Dangerous Type",
       "Files of dangerous types can be uploaded and then processed or served."},
      {862, "Missing Authorization",
       "No authorization check is performed when an actor accesses a resource or performs an action."},
      {476, "NULL Pointer Dereference",
       "A null (None) reference is dereferenced where a valid object is expected."},
      {287, "Improper Authentication",
       "A claimed identity is not proven, or is proven insufficiently."},
      {190, "Integer Overflow or Wraparound",
       "An arithmetic result exceeds the representable range and wraps or is truncated."},
      {502, "Deserialization of Untrusted Data",
       "Untrusted data is deserialized without verifying it is safe to reconstruct."},
      {77, "Command Injection",
       "A command is constructed from external input without neutralizing special elements."},
      {119, "Improper Restriction of Operations within the Bounds of a Memory Buffer",
       "Operations on a memory buffer can read or write outside its intended boundary."},
      {798, "Use of Hard-coded Credentials",
       "Passwords, keys or tokens are embedded directly in the source code."},
      {918, "Server-Side Request Forgery",
       "The server fetches a URL supplied by the user without restricting its destination."},
      {306, "Missing Authentication for Critical Function",
       "A critical function is reachable without any authentication."},
      {362, "Race Condition",
       "Concurrent code uses a shared resource without proper synchronization."},
      {269, "Improper Privilege Management",
       "Privileges are assigned, modified, tracked or checked incorrectly."},
      {94, "Code Injection",
       "Code segments are built from external input and then evaluated or executed."},
      {863, "Incorrect Authorization",
       "An authorization check exists but does not correctly restrict access."},
      {276, "Incorrect Default Permissions",
       "Files or resources are created with permissions that are wider than necessary."},
  };
  std::vector<CweEntry> out;
  out.reserve(std::size(kRows));
  int rank = 1;
  for (const auto& r : kRows) {
    out.push_back(CweEntry{CweId(r.id), r.name, rank++, r.summary});
  }
  return out;
}

CweEntry entry_from_json(const nlohmann::json& j, std::size_t line) {
  static const std::set<std::string> kFields = {"id", "rank", "name", "summary"};
  const std::string where = "catalog line " + std::to_string(line);
  if (!j.is_object()) throw LoadError(where + ": record is not an object");
  for (const auto& [key, _] : j.items()) {
    if (!kFields.count(key)) throw LoadError(where + ": unknown field '" + key + "'");
  }
  for (const auto& key : kFields) {
    if (!j.contains(key)) throw LoadError(where + ": missing field '" + key + "'");
  }
  if (!j["id"].is_string() || !j["rank"].is_number_integer() || !j["name"].is_string() ||
      !j["summary"].is_string()) {
    throw LoadError(where + ": field has the wrong type");
  }
  auto id = try_parse_cwe_id(j["id"].get<std::string>());
  if (!id) throw LoadError(where + ": bad id syntax '" + j["id"].get<std::string>() + "'");
  return CweEntry{*id, j["name"].get<std::string>(), j["rank"].get<int>(),
                  j["summary"].get<std::string>()};
}

}  // namespace

CweCatalog load_catalog(const std::optional<std::filesystem::path>& source) {
  if (!source) return CweCatalog(builtin_entries());

  std::ifstream in(*source);
  if (!in) throw LoadError("cannot open catalog file " + source->string());
  std::vector<CweEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw LoadError("catalog line " + std::to_string(line_no) + ": " + e.what());
    }
    entries.push_back(entry_from_json(j, line_no));
  }
  return CweCatalog(std::move(entries));
}

const CweCatalog& default_catalog() {
  static const CweCatalog catalog = load_catalog();
  return catalog;
}

}  // namespace cwescan
