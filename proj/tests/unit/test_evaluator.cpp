#include <doctest.h>

#include <numeric>
#include <random>

#include "cwescan/error.hpp"
#include "cwescan/evaluator.hpp"
#include "cwescan/mock_backend.hpp"
#include "test_support.hpp"

using namespace cwescan;
using K = ParsedOutput::Kind;

TEST_CASE("output parsing rules") {
  struct Case {
    const char* text;
    K kind;
    std::optional<std::uint32_t> cwe;
    const char* rule;
  };
  const Case cases[] = {
      {"Secure", K::kSecure, std::nullopt, "exact"},
      {"  Vulnerable - CWE-79\n", K::kVulnerable, 79, "exact"},
      {"The code is secure.\nNothing to add.", K::kSecure, std::nullopt, "secure-word"},
      {"vulnerable (cwe-89): string-built SQL", K::kVulnerable, 89, "vulnerable-with-id"},
      {"Vulnerable\nCWE-22 path traversal", K::kVulnerable, 22, "vulnerable-with-id"},
      {"Vulnerable\n\nsomething\nCWE-22", K::kVulnerableUnknown, std::nullopt, "vulnerable-no-id"},
      {"This looks vulnerable to injection.", K::kVulnerableUnknown, std::nullopt, "vulnerable-no-id"},
      {"insecure handling", K::kUnparseable, std::nullopt, "unparseable"},
      {"def foo(x):\n    return x", K::kUnparseable, std::nullopt, "unparseable"},
      {"", K::kUnparseable, std::nullopt, "unparseable"},
      {"Vulnerable - CWE-0", K::kVulnerableUnknown, std::nullopt, "vulnerable-no-id"},
  };
  for (const auto& c : cases) {
    CAPTURE(c.text);
    const ParsedOutput p = parse_model_output(c.text);
    CHECK(p.kind == c.kind);
    CHECK(p.rule == c.rule);
    CHECK(p.raw == c.text);
    if (c.cwe) {
      CHECK(p.cwe == CweId(*c.cwe));
    } else {
      CHECK_FALSE(p.cwe.has_value());
    }
  }
}

TEST_CASE("scoring cells and exact matches") {
  const auto v79 = Verdict::vulnerable(CweId(79));
  CHECK(score(v79, parse_model_output("Vulnerable - CWE-79")).cell == Cell::kTruePositive);
  CHECK(score(v79, parse_model_output("Vulnerable - CWE-79")).exact_match);
  const auto wrong_id = score(v79, parse_model_output("Vulnerable - CWE-89"));
  CHECK(wrong_id.cell == Cell::kTruePositive);
  CHECK_FALSE(wrong_id.exact_match);
  CHECK_FALSE(score(v79, parse_model_output("vulnerable")).exact_match);
  CHECK(score(v79, parse_model_output("garbage")).cell == Cell::kFalseNegative);
  CHECK(score(Verdict::secure(), parse_model_output("Vulnerable - CWE-79")).cell == Cell::kFalsePositive);
  CHECK(score(Verdict::secure(), parse_model_output("garbage")).cell == Cell::kTrueNegative);
  CHECK_FALSE(score(Verdict::secure(), parse_model_output("garbage")).exact_match);
}

namespace {

// Exact rational with 64-bit parts; the matrices here stay far below overflow.
struct Q {
  std::int64_t n, d;
  Q(std::int64_t num, std::int64_t den) : n(num), d(den) {
    const auto g = std::gcd(n, d);
    n /= g;
    d /= g;
  }
  friend bool operator==(const Q& a, const Q& b) { return a.n == b.n && a.d == b.d; }
  friend Q operator*(const Q& a, const Q& b) { return {a.n * b.n, a.d * b.d}; }
  friend Q operator+(const Q& a, const Q& b) { return {a.n * b.d + b.n * a.d, a.d * b.d}; }
  friend Q operator/(const Q& a, const Q& b) { return {a.n * b.d, a.d * b.n}; }
  double value() const { return static_cast<double>(n) / static_cast<double>(d); }
};

}  // namespace

TEST_CASE("metric identities under exact arithmetic") {
  std::mt19937_64 rng(99);
  int checked_f1 = 0;
  for (int i = 0; i < 5000; ++i) {
    ConfusionMatrix m{rng() % 60, rng() % 60, rng() % 60, rng() % 60};
    if (m.total() == 0) continue;
    const Metrics got = compute_metrics(m);
    const std::int64_t tp = m.tp, fp = m.fp, fn = m.fn, tn = m.tn, total = m.total();
    CHECK(got.accuracy == doctest::Approx(Q(tp + tn, total).value()).epsilon(1e-15));
    CHECK(got.precision.has_value() == (tp + fp > 0));
    CHECK(got.recall.has_value() == (tp + fn > 0));
    if (tp > 0) {
      const Q p(tp, tp + fp), r(tp, tp + fn);
      const Q harmonic = Q(2, 1) * p * r / (p + r);
      CHECK(harmonic == Q(2 * tp, 2 * tp + fp + fn));
      REQUIRE(got.f1.has_value());
      CHECK(*got.f1 == doctest::Approx(harmonic.value()).epsilon(1e-15));
      ++checked_f1;
    }
  }
  CHECK(checked_f1 > 4000);
  CHECK_THROWS_AS(compute_metrics({}), ArgumentError);
  const Metrics all_negative = compute_metrics({0, 0, 0, 10});
  CHECK(all_negative.accuracy == 1.0);
  CHECK_FALSE(all_negative.precision.has_value());
  CHECK_FALSE(all_negative.recall.has_value());
  CHECK_FALSE(all_negative.f1.has_value());
}

TEST_CASE("the matrix agrees with brute-force counting") {
  std::mt19937_64 rng(3);
  const std::vector<std::string> outputs = {"Secure", "Vulnerable - CWE-79", "Vulnerable - CWE-89", "vulnerable",
                                            "def f():", "The snippet is secure", ""};
  for (int round = 0; round < 50; ++round) {
    std::vector<EvalRecord> records;
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0, failed = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      EvalRecord r;
      r.index = i;
      const bool gold_vuln = rng() % 2 == 0;
      r.gold = gold_vuln ? "Vulnerable - CWE-79" : "Secure";
      if (rng() % 20 == 0) {
        r.error = "timeout";
        ++failed;
      } else {
        r.raw_output = outputs[rng() % outputs.size()];
        const bool pred_vuln = r.raw_output->find("ulnerable") != std::string::npos;
        (gold_vuln ? (pred_vuln ? tp : fn) : (pred_vuln ? fp : tn)) += 1;
      }
      records.push_back(std::move(r));
    }
    const EvalReport rep = rescore(records, {});
    CHECK(rep.matrix == ConfusionMatrix{tp, fp, fn, tn});
    CHECK(rep.failed_requests == failed);
  }
}

namespace {

std::vector<LabeledInstance> test_set(std::size_t vulnerable, std::size_t secure) {
  std::vector<LabeledInstance> out;
  const auto& entries = default_catalog().entries();
  for (std::size_t i = 0; i < vulnerable; ++i) {
    const CweId cwe = entries[i % entries.size()].id;
    out.push_back({std::string(kDefaultInstruction), "v" + std::to_string(i) + " = run()\n",
                   render_label(Verdict::vulnerable(cwe)), cwe});
  }
  for (std::size_t i = 0; i < secure; ++i) {
    out.push_back({std::string(kDefaultInstruction), "s" + std::to_string(i) + " = run()\n", "Secure", std::nullopt});
  }
  return out;
}

MockScript echo_script(const std::vector<LabeledInstance>& rows) {
  MockScript s;
  for (const auto& r : rows) {
    ScriptedResponse resp;
    resp.input = r.input;
    resp.tokens = split_stream_units(r.output);
    s.responses.push_back(resp);
  }
  return s;
}

}  // namespace

TEST_CASE("gold-echo backend scores perfectly and reports round trip") {
  const auto rows = test_set(30, 20);
  ScriptedMockBackend backend(echo_script(rows));
  EvalOptions opts;
  opts.concurrency = 4;
  const EvalReport rep = run_eval(backend, rows, kDefaultInstruction, opts);
  CHECK(rep.matrix == ConfusionMatrix{30, 0, 0, 20});
  CHECK(rep.metrics.accuracy == 1.0);
  CHECK(rep.metrics.f1 == 1.0);
  CHECK(rep.secure.exact_matches == 20);
  std::uint64_t exact = 0;
  for (const auto& [_, t] : rep.per_cwe) exact += t.exact_matches;
  CHECK(exact == 30);
  for (std::size_t i = 0; i < rep.records.size(); ++i) CHECK(rep.records[i].index == i);

  TempDir dir;
  write_eval_records(rep.records, dir / "raw.jsonl");
  const auto back = read_eval_records(dir / "raw.jsonl");
  const EvalReport again = rescore(back, rep.metadata);
  CHECK(again.matrix == rep.matrix);
  CHECK(again.to_json() == rep.to_json());
  CHECK(rep.to_json()["schema_version"] == 1);
  CHECK(format_eval_summary(rep).find("100.00%") != std::string::npos);
}

TEST_CASE("code continuations never count as detections") {
  const auto rows = test_set(10, 10);
  MockScript s;
  s.fallback = ScriptedResponse{};
  s.fallback->tokens = split_stream_units("\n    return result\n\ndef main():\n");
  ScriptedMockBackend backend(s);
  const EvalReport rep = run_eval(backend, rows, kDefaultInstruction);
  CHECK(rep.matrix.tp + rep.matrix.fp == 0);
  CHECK(rep.metrics.recall == 0.0);
  CHECK_FALSE(rep.metrics.precision.has_value());
  CHECK(rep.unparseable == 20);
  CHECK(format_eval_summary(rep).find("undefined") != std::string::npos);
}

TEST_CASE("request failures are bounded") {
  const auto rows = test_set(5, 5);
  MockScript s = echo_script(rows);
  s.responses[0].fail = true;
  {
    ScriptedMockBackend backend(s);
    CHECK_THROWS_AS(run_eval(backend, rows, kDefaultInstruction), EvalError);
  }
  ScriptedMockBackend backend(s);
  EvalOptions opts;
  opts.max_error_rate = 0.1;
  const EvalReport rep = run_eval(backend, rows, kDefaultInstruction, opts);
  CHECK(rep.failed_requests == 1);
  CHECK(rep.matrix.total() == 9);
  REQUIRE(rep.records[0].error.has_value());
}

TEST_CASE("non-strict gold labels are rejected up front") {
  auto rows = test_set(1, 1);
  rows[1].output = "secure";
  ScriptedMockBackend backend(echo_script(rows));
  CHECK_THROWS_AS(run_eval(backend, rows, kDefaultInstruction), ValidationError);
  CHECK(backend.calls() == 0);
}
