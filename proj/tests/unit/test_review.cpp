#include <doctest.h>

#include <random>

#include "cwescan/error.hpp"
#include "cwescan/review_engine.hpp"
#include "test_support.hpp"

using namespace cwescan;

namespace {

std::vector<PairedExample> make_pairs(std::uint32_t cwe, int count, int offset = 0) {
  std::vector<PairedExample> out;
  for (int i = offset; i < offset + count; ++i) {
    const std::string n = std::to_string(i);
    out.emplace_back(CweId(cwe), Snippet("def f" + n + "(x):\n    return eval(x)\n"),
                     Snippet("def f" + n + "(x):\n    return int(x)\n"), Provenance{"test", "t-1", "ts"});
  }
  return out;
}

ReviewChecks passing() {
  ReviewChecks c;
  c.classification_correct.value = true;
  c.fix_valid.value = true;
  c.realistic.value = true;
  return c;
}

ReviewDecision accept() {
  ReviewDecision d;
  d.kind = ReviewDecision::Kind::kAccept;
  d.reviewer = "alice";
  return d;
}

ReviewDecision reject(std::string reason) {
  ReviewDecision d;
  d.kind = ReviewDecision::Kind::kReject;
  d.reason = std::move(reason);
  d.reviewer = "bob";
  return d;
}

}  // namespace

TEST_CASE("enqueue is idempotent by content") {
  TempDir dir;
  ReviewStore store(dir.path());
  const auto pairs = make_pairs(94, 5);
  CHECK(store.enqueue(pairs) == 5);
  CHECK(store.enqueue(pairs) == 0);
  CHECK(store.items().size() == 5);
  CHECK(store.progress().at(CweId(94)).pending == 5);

  std::vector<PairedExample> accepted = make_pairs(94, 1, 10);
  accepted[0].review_state = ReviewState::accepted();
  CHECK_THROWS_AS(store.enqueue(accepted), ContractError);
  CHECK(store.items().size() == 5);
}

TEST_CASE("pending pages are 1-based and filterable") {
  TempDir dir;
  ReviewStore store(dir.path());
  store.enqueue(make_pairs(79, 30));
  store.enqueue(make_pairs(89, 20, 100));

  const PendingPage p1 = store.list_pending(std::nullopt, 1, 20);
  CHECK(p1.items.size() == 20);
  CHECK(p1.total_items == 50);
  CHECK(p1.total_pages == 3);
  CHECK(store.list_pending(std::nullopt, 3, 20).items.size() == 10);
  CHECK(store.list_pending(std::nullopt, 4, 20).items.empty());
  CHECK(store.list_pending(CweId(89), 1, 50).items.size() == 20);
  CHECK(store.list_pending(CweId(89), 1, 50).items.front().cwe == CweId(89));
  CHECK(p1.items.front().id == store.items().front().id);
  CHECK_THROWS_AS(store.list_pending(std::nullopt, 0, 20), ArgumentError);
  CHECK_THROWS_AS(store.list_pending(std::nullopt, 1, 0), ArgumentError);
}

TEST_CASE("the review gate") {
  TempDir dir;
  ReviewStore store(dir.path());
  store.enqueue(make_pairs(78, 4));
  const auto items = store.items();
  const std::string id = items[0].id;

  SUBCASE("accept needs every check recorded and true") {
    ReviewChecks partial = passing();
    partial.realistic.value.reset();
    CHECK_THROWS_AS(store.submit_decision(id, partial, accept()), ValidationError);
    ReviewChecks failing = passing();
    failing.fix_valid.value = false;
    CHECK_THROWS_AS(store.submit_decision(id, failing, accept()), ValidationError);
    CHECK(store.audit_log().empty());
    CHECK(store.submit_decision(id, passing(), accept()).pair.review_state == ReviewState::accepted());
    CHECK_THROWS_AS(store.submit_decision(id, passing(), accept()), ConflictError);
  }
  SUBCASE("reject needs a reason") {
    CHECK_THROWS_AS(store.submit_decision(id, {}, reject(" ")), ValidationError);
    CHECK(store.submit_decision(id, {}, reject("unrealistic")).pair.review_state.reason() == "unrealistic");
  }
  SUBCASE("edit validates the replacement") {
    ReviewDecision edit = accept();
    edit.kind = ReviewDecision::Kind::kEdit;
    edit.fixed = "def f0(x:\n";
    CHECK_THROWS_WITH_AS(store.submit_decision(id, passing(), edit), doctest::Contains("syntax error at line 1"),
                         ValidationError);
    edit.fixed = items[0].pair.vulnerable.code();
    CHECK_THROWS_AS(store.submit_decision(id, passing(), edit), ValidationError);
    edit.fixed = "def f0(x):\n    return float(x)\n";
    const ReviewItem done = store.submit_decision(id, passing(), edit);
    CHECK(done.pair.review_state == ReviewState::edited_then_accepted());
    CHECK(done.pair.fixed.code() == *edit.fixed);
  }
  SUBCASE("unknown ids and missing reviewers") {
    CHECK_THROWS_AS(store.submit_decision("itm-nope", passing(), accept()), NotFoundError);
    ReviewDecision anon = accept();
    anon.reviewer.clear();
    CHECK_THROWS_AS(store.submit_decision(id, passing(), anon), ValidationError);
  }
}

TEST_CASE("reject-all yields an empty export") {
  std::mt19937 rng(11);
  for (int round = 0; round < 5; ++round) {
    TempDir dir;
    ReviewStore store(dir.path());
    const int n = 1 + static_cast<int>(rng() % 12);
    store.enqueue(make_pairs(default_catalog().entries()[rng() % 25].id.number(), n));
    for (const auto& item : store.items()) store.submit_decision(item.id, {}, reject("not realistic"));
    CHECK(store.export_accepted(kDefaultInstruction).empty());
    CHECK(store.progress().begin()->second.rejected == static_cast<std::size_t>(n));
  }
}

TEST_CASE("export orders by catalog rank then item id and expands pairs") {
  TempDir dir;
  ReviewStore store(dir.path());
  store.enqueue(make_pairs(276, 2));  // rank 25
  store.enqueue(make_pairs(787, 2, 50));  // rank 1
  for (const auto& item : store.items()) store.submit_decision(item.id, passing(), accept());
  const auto rows = store.export_accepted(kDefaultInstruction);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0].output == "Vulnerable - CWE-787");
  CHECK(rows[1].output == "Secure");
  CHECK(rows[7].output == "Secure");
  CHECK(rows[6].output == "Vulnerable - CWE-276");
}

TEST_CASE("audit replay reconstructs final states") {
  std::mt19937 rng(5);
  for (int round = 0; round < 5; ++round) {
    TempDir dir;
    ReviewStore store(dir.path());
    store.enqueue(make_pairs(22, 15));
    for (const auto& item : store.items()) {
      switch (rng() % 4) {
        case 0:
          store.submit_decision(item.id, passing(), accept());
          break;
        case 1:
          store.submit_decision(item.id, {}, reject("dup " + std::to_string(rng() % 9)));
          break;
        case 2: {
          ReviewDecision edit = accept();
          edit.kind = ReviewDecision::Kind::kEdit;
          edit.vulnerable = "import os\nos.system(x)\n";
          store.submit_decision(item.id, passing(), edit);
          break;
        }
        default:
          break;  // stays pending
      }
    }
    const auto log = store.audit_log();
    const auto replayed = replay_audit(store.initial_items(), log);
    for (const auto& item : store.items()) {
      CAPTURE(item.id);
      CHECK(replayed.at(item.id).pair == item.pair);
      CHECK(replayed.at(item.id).checks == item.checks);
    }
    // Reopening replays the same log.
    ReviewStore reopened(dir.path());
    CHECK_FALSE(reopened.recovered_on_open());
    CHECK(reopened.progress() == store.progress());
  }
}

TEST_CASE("a crash between snapshot and audit append rolls back to the audit log") {
  TempDir dir;
  std::string decided;
  {
    ReviewStore store(dir.path());
    store.enqueue(make_pairs(20, 3));
    decided = store.items()[0].id;
    store.submit_decision(decided, passing(), accept());
  }
  // Snapshot claims a second decision whose audit record never landed.
  auto snap = nlohmann::json::parse(slurp(dir / "state.json"));
  for (auto& [id, state] : snap["states"].items()) {
    if (id != decided) state = {{"state", "rejected"}, {"reason", "lost"}};
  }
  snap["audit_length"] = 2;
  spit(dir / "state.json", snap.dump());

  ReviewStore store(dir.path());
  CHECK(store.recovered_on_open());
  const auto counts = store.progress().at(CweId(20));
  CHECK(counts.accepted == 1);
  CHECK(counts.pending == 2);
  CHECK(counts.rejected == 0);
  ReviewStore again(dir.path());
  CHECK_FALSE(again.recovered_on_open());
}

TEST_CASE("corrupt stores refuse to open and name the file") {
  TempDir dir;
  {
    ReviewStore store(dir.path());
    store.enqueue(make_pairs(20, 2));
    store.enqueue(make_pairs(20, 2, 10));
  }
  SUBCASE("segment") {
    spit(dir / "segments/segment-000002.jsonl", "{\"item_id\": \"x\"\n");
    CHECK_THROWS_WITH_AS(ReviewStore{dir.path()}, doctest::Contains("segment-000002.jsonl line 1"),
                         StoreCorruptError);
  }
  SUBCASE("audit") {
    spit(dir / "audit.jsonl", "not json\n");
    CHECK_THROWS_WITH_AS(ReviewStore{dir.path()}, doctest::Contains("audit.jsonl line 1"), StoreCorruptError);
  }
  SUBCASE("tampered content") {
    auto text = slurp(dir / "segments/segment-000001.jsonl");
    text.replace(text.find("eval"), 4, "exec");
    spit(dir / "segments/segment-000001.jsonl", text);
    CHECK_THROWS_WITH_AS(ReviewStore{dir.path()}, doctest::Contains("does not match content"), StoreCorruptError);
  }
}

TEST_CASE("decision JSON is strict") {
  CHECK_THROWS_AS(decision_from_json({{"kind", "accept"}, {"reviewer", "a"}, {"extra", 1}}), ValidationError);
  CHECK_THROWS_AS(decision_from_json({{"kind", "approve"}, {"reviewer", "a"}}), ValidationError);
  const auto d = decision_from_json({{"kind", "edit"}, {"reviewer", "a"}, {"fixed", "x = 1\n"}});
  CHECK(d.kind == ReviewDecision::Kind::kEdit);
  CHECK(d.fixed == "x = 1\n");
  const auto c = checks_from_json({{"classification_correct", true}, {"fix_valid", {{"value", false}, {"note", "n"}}}});
  CHECK(c.classification_correct.value == true);
  CHECK(c.fix_valid.value == false);
  CHECK(c.fix_valid.note == "n");
  CHECK_FALSE(c.realistic.value.has_value());
}
