#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "cwescan/dataset.hpp"
#include "cwescan/error.hpp"
#include "cwescan/model_backend.hpp"
#include "cwescan/seeded_rng.hpp"
#include "cwescan/text_util.hpp"
#include "test_support.hpp"

using namespace cwescan;

TEST_CASE("labels round trip for every catalog CWE") {
  for (const auto& e : default_catalog().entries()) {
    const Verdict v = Verdict::vulnerable(e.id);
    const std::string label = render_label(v);
    CHECK(label == "Vulnerable - " + e.id.str());
    CHECK(parse_label_strict(label) == v);
    CHECK(parse_label_strict(label + "\n") == v);
  }
  CHECK(render_label(Verdict::secure()) == "Secure");
  CHECK(parse_label_strict("Secure") == Verdict::secure());
}

TEST_CASE("strict label parsing rejects near misses") {
  for (const char* bad : {"secure", "Secure.", " Secure", "Secure\n\n", "Vulnerable-CWE-79", "Vulnerable - cwe-79",
                          "Vulnerable - CWE-079", "Vulnerable - CWE-0", "Vulnerable", "Insecure", ""}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_label_strict(bad), ParseError);
  }
}

TEST_CASE("snippets and pairs enforce their invariants") {
  CHECK_THROWS_AS(Snippet("  \n\t"), ValidationError);
  CHECK(Snippet("a = 1\nb = 2\n").line_count() == 2);
  CHECK_THROWS_WITH_AS(PairedExample(CweId(79), Snippet("x = 1\n"), Snippet("x = 1\n"), {}),
                       doctest::Contains("pair not distinct"), ValidationError);
}

TEST_CASE("review state transitions") {
  const auto pending = ReviewState::pending();
  CHECK(pending.transition_to(ReviewState::accepted()).is_accepted_family());
  CHECK_THROWS_AS(ReviewState::rejected("  "), ValidationError);
  CHECK_THROWS_AS(ReviewState::accepted().transition_to(ReviewState::rejected("late")), ConflictError);
  CHECK(ReviewState::edited_then_accepted().name() == "edited_then_accepted");
}

TEST_CASE("expand_pair yields a vulnerable row then a secure row") {
  PairedExample pair(CweId(89), Snippet("q = 'a' + b\n"), Snippet("q = ('a', b)\n"), {"fixture", "t-1", "now"});
  CHECK_THROWS_AS(expand_pair(pair, kDefaultInstruction), ContractError);
  pair.review_state = ReviewState::accepted();
  const auto rows = expand_pair(pair, kDefaultInstruction);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].output == "Vulnerable - CWE-89");
  CHECK(rows[0].input == "q = 'a' + b\n");
  CHECK(rows[1].output == "Secure");
  CHECK(rows[1].source_cwe == CweId(89));
  CHECK(rows[0].instruction == rows[1].instruction);
}

TEST_CASE("mixed instructions are rejected") {
  std::vector<LabeledInstance> rows = {{"a", "x = 1", "Secure", std::nullopt}, {"a", "y = 1", "Secure", std::nullopt}};
  CHECK_NOTHROW(require_single_instruction(rows));
  rows.push_back({"a ", "z = 1", "Secure", std::nullopt});
  CHECK_THROWS_AS(require_single_instruction(rows), ValidationError);
}

namespace {

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> units = {"a", "b", "c", "X", "Z", "0", "9", " ", "_", "-", "+", "=", "(",
                                                 ")", "[", "]", "{", "}", ":", ";", "'", "\"", "\\", "/", "\n",
                                                 "\t", "#", "<", ">", "\xc3\xa9", "\xe2\x82\xac", "\x01"};
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s += units[pick(rng)];
  return s;
}

std::vector<LabeledInstance> random_instances(std::mt19937_64& rng, std::size_t n) {
  const auto& entries = default_catalog().entries();
  std::vector<LabeledInstance> out;
  for (std::size_t i = 0; i < n; ++i) {
    const CweId cwe = entries[rng() % entries.size()].id;
    const bool vulnerable = rng() % 2 == 0;
    LabeledInstance inst;
    inst.instruction = std::string(kDefaultInstruction);
    inst.input = random_text(rng, 200);
    inst.output = render_label(vulnerable ? Verdict::vulnerable(cwe) : Verdict::secure());
    if (rng() % 4 != 0) inst.source_cwe = cwe;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

TEST_CASE("JSONL write/read is the identity on randomized instance lists") {
  TempDir dir;
  std::mt19937_64 rng(20240517);
  for (int round = 0; round < 40; ++round) {
    const auto instances = random_instances(rng, rng() % 60);
    const auto path = dir / ("r" + std::to_string(round) + ".jsonl");
    CHECK(write_jsonl(std::span<const LabeledInstance>(instances), path) == instances.size());
    const auto back = read_instances_jsonl(path);
    REQUIRE(back == instances);
    CHECK(to_jsonl(back) == slurp(path));
  }
}

TEST_CASE("invalid UTF-8 is a validation error, not a corrupt file") {
  TempDir dir;
  const std::vector<LabeledInstance> bad = {{"i", "x = '\xff'\n", "Secure", std::nullopt}};
  CHECK_THROWS_AS(write_jsonl(std::span<const LabeledInstance>(bad), dir / "bad.jsonl"), ValidationError);
}

TEST_CASE("JSONL readers name the failing line") {
  TempDir dir;
  const std::string good = R"({"instruction":"i","input":"x = 1","output":"Secure"})";
  SUBCASE("bad label") {
    spit(dir / "a.jsonl", good + "\n" + R"({"instruction":"i","input":"x","output":"secure"})" + "\n");
    CHECK_THROWS_WITH_AS(read_instances_jsonl(dir / "a.jsonl"), doctest::Contains("line 2"), ParseError);
  }
  SUBCASE("unknown field") {
    spit(dir / "a.jsonl", R"({"instruction":"i","input":"x","output":"Secure","extra":1})" "\n");
    CHECK_THROWS_WITH_AS(read_instances_jsonl(dir / "a.jsonl"), doctest::Contains("unknown field"), ParseError);
  }
  SUBCASE("not json") {
    spit(dir / "a.jsonl", good + "\n" + good + "\n{oops\n");
    CHECK_THROWS_WITH_AS(read_instances_jsonl(dir / "a.jsonl"), doctest::Contains("line 3"), ParseError);
  }
}

TEST_CASE("pairs round trip through JSONL") {
  TempDir dir;
  std::vector<PairedExample> pairs;
  pairs.emplace_back(CweId(22), Snippet("open(p)\n"), Snippet("open(safe(p))\n"), Provenance{"b", "t", "ts"});
  pairs.emplace_back(CweId(79), Snippet("a\n"), Snippet("b\n"), Provenance{"b", "t", "ts"},
                     ReviewState::rejected("not realistic"));
  write_jsonl(std::span<const PairedExample>(pairs), dir / "p.jsonl");
  CHECK(read_pairs_jsonl(dir / "p.jsonl") == pairs);
}

namespace {

std::vector<LabeledInstance> balanced_instances(std::size_t per_cwe_pairs) {
  std::vector<LabeledInstance> out;
  for (const auto& e : default_catalog().entries()) {
    for (std::size_t k = 0; k < per_cwe_pairs; ++k) {
      const std::string base = e.id.str() + "_" + std::to_string(k);
      out.push_back({"i", "vuln_" + base + " = 1\n", render_label(Verdict::vulnerable(e.id)), e.id});
      out.push_back({"i", "fixed_" + base + " = 1\n", "Secure", e.id});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("split is a deterministic stratified partition") {
  const auto all = balanced_instances(10);
  REQUIRE(all.size() == 500);
  const DatasetSplit a = split_dataset(all, 100, 7);
  const DatasetSplit b = split_dataset(all, 100, 7);
  CHECK(a.train.size() == 400);
  CHECK(a.test.size() == 100);
  CHECK(a.manifest == b.manifest);
  CHECK(a.test == b.test);

  // Partition: every input lands on exactly one side.
  std::multiset<std::string> seen;
  for (const auto& i : a.train) seen.insert(i.input);
  for (const auto& i : a.test) seen.insert(i.input);
  std::multiset<std::string> expected;
  for (const auto& i : all) expected.insert(i.input);
  CHECK(seen == expected);

  // Each of the 50 strata holds 10 rows, so a 20% draw takes exactly 2 from each.
  for (const auto& [key, counts] : a.manifest.test_counts) {
    CAPTURE(key);
    CHECK(counts.vulnerable == 2);
    CHECK(counts.secure == 2);
  }
  CHECK(a.manifest.test_digest == sha256_hex(to_jsonl(a.test)));
  CHECK(a.manifest.train_digest == sha256_hex(to_jsonl(a.train)));
}

TEST_CASE("split seeds and bounds") {
  const auto all = balanced_instances(10);
  CHECK(split_dataset(all, 100, 7).manifest.test_digest != split_dataset(all, 100, 8).manifest.test_digest);
  CHECK_THROWS_AS(split_dataset(all, 0, 7), ArgumentError);
  CHECK_THROWS_AS(split_dataset(all, 500, 7), ArgumentError);
  const auto odd = split_dataset(all, 37, 3);
  CHECK(odd.test.size() == 37);
  CHECK(odd.train.size() == 463);
}

TEST_CASE("seeded rng is reproducible and in range") {
  SeededRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.below(7);
    CHECK(x < 7);
    CHECK(x == b.below(7));
  }
}

TEST_CASE("prompt assembly matches the golden file byte for byte") {
  const std::string code = "import os\n\ndef run(cmd):\n    os.system(cmd)\n";
  CHECK(assemble_prompt(kDefaultInstruction, code) == slurp(fixture("prompt_golden.txt")));
  CHECK(prompt_input_section(assemble_prompt(kDefaultInstruction, code)) == code);
  CHECK_THROWS_AS(assemble_prompt(kDefaultInstruction, " \n"), ValidationError);
}
