#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cwescan {

/// Numeric CWE identifier. Always >= 1; renders as "CWE-<n>".
class CweId {
 public:
  explicit CweId(std::uint32_t number);

  std::uint32_t number() const noexcept { return number_; }
  std::string str() const;

  friend auto operator<=>(const CweId&, const CweId&) = default;

 private:
  std::uint32_t number_;
};

/// Accepts "CWE-<digits>" case-insensitively with surrounding whitespace.
/// Throws ParseError on a missing prefix, non-digit suffix, overflow or zero.
CweId parse_cwe_id(std::string_view text);

/// Non-throwing variant used by tolerant parsers.
std::optional<CweId> try_parse_cwe_id(std::string_view text) noexcept;

struct CweEntry {
  CweId id;
  std::string name;
  int rank = 0;
  std::string summary;

  friend bool operator==(const CweEntry&, const CweEntry&) = default;
};

/// The MITRE Top 25 ranked list. Ranks cover 1..25, ids are unique.
class CweCatalog {
 public:
  static constexpr std::size_t kSize = 25;

  /// Validates the entries; throws LoadError naming the offending entry.
  explicit CweCatalog(std::vector<CweEntry> entries);

  const std::vector<CweEntry>& entries() const noexcept { return entries_; }
  const CweEntry* find(CweId id) const noexcept;
  const CweEntry& at(CweId id) const;
  /// Rank of `id`, or kSize + 1 for ids outside the catalog.
  int rank_of(CweId id) const noexcept;

 private:
  std::vector<CweEntry> entries_;  // sorted by rank
};

/// Embedded default (2023 list) when `source` is empty, otherwise a JSONL file
/// with one {id, rank, name, summary} record per line.
CweCatalog load_catalog(const std::optional<std::filesystem::path>& source = std::nullopt);

const CweCatalog& default_catalog();

}  // namespace cwescan

template <>
struct std::hash<cwescan::CweId> {
  std::size_t operator()(const cwescan::CweId& id) const noexcept {
    return std::hash<std::uint32_t>{}(id.number());
  }
};
