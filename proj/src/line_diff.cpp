#include "cwescan/line_diff.hpp"

#include <algorithm>

#include "cwescan/text_util.hpp"

namespace cwescan {

namespace {

struct Edit {
  DiffLine::Op op;
  int old_line;  // 1-based, 0 when not applicable
  int new_line;
  std::string_view text;
};

std::vector<Edit> lcs_script(const std::vector<std::string_view>& a,
                             const std::vector<std::string_view>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = m; j-- > 0;) {
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  std::vector<Edit> script;
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    if (i < n && j < m && a[i] == b[j]) {
      script.push_back({DiffLine::Op::kEqual, int(i + 1), int(j + 1), a[i]});
      ++i, ++j;
    } else if (j < m && (i == n || lcs[i][j + 1] >= lcs[i + 1][j])) {
      script.push_back({DiffLine::Op::kInsert, 0, int(j + 1), b[j]});
      ++j;
    } else {
      script.push_back({DiffLine::Op::kDelete, int(i + 1), 0, a[i]});
      ++i;
    }
  }
  return script;
}

}  // namespace

std::vector<DiffHunk> line_diff(std::string_view before, std::string_view after, int context) {
  const auto a = split_lines(before);
  const auto b = split_lines(after);
  const auto script = lcs_script(a, b);

  std::vector<DiffHunk> hunks;
  const int total = static_cast<int>(script.size());
  int k = 0;
  int prev_end = 0;
  while (k < total) {
    while (k < total && script[k].op == DiffLine::Op::kEqual) ++k;
    if (k == total) break;
    const int start = std::max(prev_end, k - context);
    // A hunk ends once more than 2 * context equal lines follow its last change.
    int last_change = k;
    for (int s = k; s < total; ++s) {
      if (script[s].op != DiffLine::Op::kEqual) {
        last_change = s;
      } else if (s - last_change > 2 * context) {
        break;
      }
    }
    const int end = std::min(total, last_change + 1 + context);
    DiffHunk h;
    int old_next = 1, new_next = 1;
    // Starting positions: count lines consumed before `start`.
    for (int s = 0; s < start; ++s) {
      if (script[s].op != DiffLine::Op::kInsert) ++old_next;
      if (script[s].op != DiffLine::Op::kDelete) ++new_next;
    }
    h.old_start = old_next;
    h.new_start = new_next;
    for (int s = start; s < end; ++s) {
      h.lines.push_back({script[s].op, std::string(script[s].text)});
      if (script[s].op != DiffLine::Op::kInsert) ++h.old_count;
      if (script[s].op != DiffLine::Op::kDelete) ++h.new_count;
    }
    hunks.push_back(std::move(h));
    prev_end = end;
    k = end;
  }
  return hunks;
}

nlohmann::json to_json(const std::vector<DiffHunk>& hunks) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& h : hunks) {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& l : h.lines) {
      const char* op = l.op == DiffLine::Op::kEqual ? "equal" : l.op == DiffLine::Op::kDelete ? "delete" : "insert";
      lines.push_back({{"op", op}, {"text", l.text}});
    }
    out.push_back({{"old_start", h.old_start},
                   {"old_count", h.old_count},
                   {"new_start", h.new_start},
                   {"new_count", h.new_count},
                   {"lines", lines}});
  }
  return out;
}

}  // namespace cwescan
