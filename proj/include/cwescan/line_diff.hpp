#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cwescan {

struct DiffLine {
  enum class Op { kEqual, kDelete, kInsert };
  Op op;
  std::string text;
};

// Unified-diff style hunk; line numbers are 1-based.
struct DiffHunk {
  int old_start = 0;
  int old_count = 0;
  int new_start = 0;
  int new_count = 0;
  std::vector<DiffLine> lines;
};

/// Line-level LCS diff of `before` against `after`, grouped into hunks with
/// `context` unchanged lines around each change.
std::vector<DiffHunk> line_diff(std::string_view before, std::string_view after, int context = 3);

nlohmann::json to_json(const std::vector<DiffHunk>& hunks);

}  // namespace cwescan
