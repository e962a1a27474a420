#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cwescan/dataset.hpp"

namespace cwescan {

struct SyntaxIssue {
  int line = 0;  // 1-based; 0 when the interpreter reports no position
  std::string message;

  /// "syntax error at line <k>: <message>"
  std::string describe() const;
};

/// nullopt means the snippet parses.
using SyntaxResult = std::optional<SyntaxIssue>;

/// Validates Python snippets against the reference interpreter's grammar by
/// compiling them in a child process. Snippets are compiled, never run.
class SyntaxChecker {
 public:
  /// `python` defaults to $CWESCAN_PYTHON, then the interpreter found at build time.
  explicit SyntaxChecker(std::optional<std::string> python = std::nullopt);

  SyntaxResult check(const Snippet& snippet) const;
  /// One interpreter launch for the whole batch. Throws IoError if the
  /// interpreter cannot be run.
  std::vector<SyntaxResult> check_all(std::span<const std::string> sources) const;

  const std::string& interpreter() const noexcept { return python_; }

 private:
  std::string python_;
};

SyntaxResult syntax_check(const Snippet& snippet);

}  // namespace cwescan
