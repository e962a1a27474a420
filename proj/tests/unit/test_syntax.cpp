#include <doctest.h>

#include <algorithm>

#include "cwescan/error.hpp"
#include "cwescan/syntax_check.hpp"
#include "test_support.hpp"

using namespace cwescan;

TEST_CASE("valid snippets pass") {
  CHECK_FALSE(syntax_check(Snippet("def f(x):\n    return x + 1\n")).has_value());
  CHECK_FALSE(syntax_check(Snippet("match x:\n    case 1:\n        pass\n")).has_value());
}

TEST_CASE("syntax errors report the line") {
  const auto r = syntax_check(Snippet("import os\n\ndef f(:\n    pass\n"));
  REQUIRE(r.has_value());
  CHECK(r->line == 3);
  CHECK(r->describe().rfind("syntax error at line 3: ", 0) == 0);

  const auto truncated = syntax_check(Snippet("import os\n\n\ndef g(p):\n    os.system(\"tar \" +"));
  REQUIRE(truncated.has_value());
  CHECK(truncated->line >= 5);
}

TEST_CASE("checking compiles but never executes") {
  TempDir dir;
  const auto marker = dir / "ran";
  const std::string code = "open(r'" + marker.string() + "', 'w').write('x')\n";
  CHECK_FALSE(syntax_check(Snippet(code)).has_value());
  CHECK_FALSE(std::filesystem::exists(marker));
}

TEST_CASE("the 50-snippet corpus parses in one batch") {
  std::vector<std::string> sources;
  for (const auto& entry : std::filesystem::directory_iterator(fixture("python_corpus"))) {
    sources.push_back(slurp(entry.path()));
  }
  REQUIRE(sources.size() == 50);
  const auto results = SyntaxChecker().check_all(sources);
  REQUIRE(results.size() == 50);
  CHECK(std::none_of(results.begin(), results.end(), [](const SyntaxResult& r) { return r.has_value(); }));
}

TEST_CASE("batch results line up with their inputs") {
  const std::vector<std::string> sources = {"a = 1\n", "b = (\n", "c = 3\n", "def\n"};
  const auto r = SyntaxChecker().check_all(sources);
  REQUIRE(r.size() == 4);
  CHECK_FALSE(r[0].has_value());
  CHECK(r[1].has_value());
  CHECK_FALSE(r[2].has_value());
  CHECK(r[3].has_value());
}

TEST_CASE("a missing interpreter is an I/O error") {
  CHECK_THROWS_AS(SyntaxChecker("/nonexistent/python").check_all(std::vector<std::string>{"a = 1\n"}), Error);
}
