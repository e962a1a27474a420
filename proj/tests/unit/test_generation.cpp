#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cwescan/error.hpp"
#include "cwescan/synth_generator.hpp"
#include "test_support.hpp"

using namespace cwescan;

namespace {

const CweEntry& entry(std::uint32_t n) { return default_catalog().at(CweId(n)); }

const Provenance kProv{"test", "t-1", "2024-01-01T00:00:00Z"};

}  // namespace

TEST_CASE("prompt rendering is deterministic and fills every placeholder") {
  const auto& tmpl = default_prompt_template();
  const std::string a = render_prompt(tmpl, entry(79), 10);
  CHECK(a == render_prompt(tmpl, entry(79), 10));
  CHECK(a.find("CWE-79") != std::string::npos);
  CHECK(a.find(entry(79).name) != std::string::npos);
  CHECK(a.find("Write 10 distinct") != std::string::npos);
  CHECK(a.find("{{") == std::string::npos);
  CHECK(render_prompt(tmpl, entry(79), 3).find("Write 3 distinct") != std::string::npos);
  CHECK_THROWS_AS(render_prompt(tmpl, entry(79), 0), ArgumentError);

  const std::vector<std::string> feedback = {"syntax error at line 2: invalid syntax (fixed snippet)"};
  CHECK(render_prompt(tmpl, entry(79), 2, feedback).find(feedback[0]) != std::string::npos);
}

TEST_CASE("template versions track the body") {
  const PromptTemplate a("custom", "{{cwe_id}} {{cwe_name}} {{cwe_summary}} {{pair_count}} "
                                   "{{realism_constraints}} {{output_schema}}");
  const PromptTemplate b("custom", "{{cwe_id}} {{cwe_name}} {{cwe_summary}} {{pair_count}} "
                                   "{{realism_constraints}} {{output_schema}}!");
  CHECK(a.version() != b.version());
  CHECK(a.version().rfind("custom-", 0) == 0);
  const PromptTemplate missing("broken", "{{cwe_id}} only");
  CHECK_THROWS_AS(render_prompt(missing, entry(79), 1), TemplateError);
}

TEST_CASE("parse_generation accepts bare, fenced and embedded JSON") {
  const SyntaxChecker checker;
  const std::string record = R"({"vulnerable": "a = input()\n", "fixed": "a = int(input())\n", "note": "n"})";
  CHECK(parse_generation(R"({"pairs": [)" + record + "]}", CweId(20), kProv, checker).candidates.size() == 1);
  CHECK(parse_generation("[" + record + "]", CweId(20), kProv, checker).candidates.size() == 1);
  CHECK(parse_generation("Sure:\n```json\n{\"pairs\": [" + record + "]}\n```\nDone.", CweId(20), kProv, checker)
            .candidates.size() == 1);
  CHECK(parse_generation("Result: {\"pairs\": [" + record + "]} hope it helps", CweId(20), kProv, checker)
            .candidates.size() == 1);
  CHECK_THROWS_AS(parse_generation("I cannot do that.", CweId(20), kProv, checker), GenerationParseError);
}

TEST_CASE("every record is either a candidate or a reasoned rejection") {
  const SyntaxChecker checker;
  const std::string raw = slurp(fixture("generation_mixed/CWE-78/1.txt"));
  const ParsedGeneration p = parse_generation(raw, CweId(78), kProv, checker);
  // Records: valid, truncated, duplicate of 0, identical, empty, malformed.
  CHECK(p.candidates.size() == 2);
  REQUIRE(p.rejections.size() == 4);
  CHECK(p.rejections[0].record_index == 1);
  CHECK(p.rejections[0].reason.find("syntax error at line 5") == 0);
  CHECK(p.rejections[0].reason.find("(vulnerable snippet)") != std::string::npos);
  CHECK(p.rejections[1].reason == "pair not distinct");
  CHECK(p.rejections[2].reason == "empty snippet");
  CHECK(p.rejections[3].reason.rfind("malformed record", 0) == 0);
  for (const auto& c : p.candidates) {
    CHECK(c.review_state.is_pending());
    CHECK(c.provenance == kProv);
    CHECK(c.cwe == CweId(78));
  }
}

TEST_CASE("ten-pair fixtures parse completely for every catalog CWE") {
  FixtureGenerationBackend backend(fixture("generation"));
  for (const auto& e : default_catalog().entries()) {
    CAPTURE(e.id.str());
    const GenerationBatch b = generate_for_cwe(backend, e, 10, 2);
    CHECK(b.parsed.size() == 10);
    CHECK(b.rejected_candidates.empty());
    CHECK(b.attempts == 1);
    CHECK_FALSE(b.incomplete);
  }
}

TEST_CASE("a shortfall is re-requested for exactly the missing count") {
  FixtureGenerationBackend backend(fixture("generation_shortfall"));
  const GenerationBatch b = generate_for_cwe(backend, entry(79), 10, 2);
  CHECK(b.parsed.size() == 10);
  CHECK(b.attempts == 2);
  CHECK_FALSE(b.incomplete);
  const auto reqs = backend.requests();
  REQUIRE(reqs.size() == 2);
  CHECK(reqs[0].prompt.find("Write 10 distinct") != std::string::npos);
  CHECK(reqs[1].prompt.find("Write 3 distinct") != std::string::npos);
  CHECK(reqs[1].attempt == 2);
}

TEST_CASE("a shortfall that never fills is flagged incomplete") {
  FixtureGenerationBackend backend(fixture("generation_shortfall"));
  // Attempt 3 has no fixture file: a transport failure, which still counts as an attempt.
  const GenerationBatch b = generate_for_cwe(backend, entry(79), 12, 2);
  CHECK(b.parsed.size() == 10);
  CHECK(b.attempts == 3);
  CHECK(b.incomplete);
}

TEST_CASE("unparseable responses exhaust retries then fail") {
  FixtureGenerationBackend backend(fixture("generation_garbage"));
  int persisted = 0;
  CHECK_THROWS_AS(generate_for_cwe(backend, entry(79), 10, 2, {}, [&](const GenerationBatch& b) {
                    ++persisted;
                    CHECK(b.raw_responses.size() == 3);
                  }),
                  GenerationError);
  CHECK(backend.requests().size() == 3);
  CHECK(persisted == 1);
  CHECK_THROWS_AS(generate_for_cwe(backend, entry(79), 0, 2), ArgumentError);
}

TEST_CASE("duplicates across attempts are rejected, not enqueued twice") {
  TempDir dir;
  const std::string once = slurp(fixture("generation_shortfall/CWE-79/1.txt"));
  spit(dir / "CWE-79/1.txt", once);
  spit(dir / "CWE-79/2.txt", once);
  FixtureGenerationBackend backend(dir.path());
  const GenerationBatch b = generate_for_cwe(backend, entry(79), 10, 1);
  CHECK(b.parsed.size() == 7);
  CHECK(b.incomplete);
  CHECK(b.rejected_candidates.size() == 7);
}

TEST_CASE("HTTP generation backend posts the request and reads text") {
  httplib::Server server;
  nlohmann::json seen;
  server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    seen["auth"] = req.get_header_value("Authorization");
    res.set_content(R"({"text": "hello"})", "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("CWESCAN_TEST_GEN_KEY", "s3cret", 1);
  HttpGenerationBackend backend("http://127.0.0.1:" + std::to_string(port) + "/generate",
                                std::string("CWESCAN_TEST_GEN_KEY"));
  GenerationRequest req{"prompt text", 123, {{"temperature", 0.5}}, CweId(79), 1};
  CHECK(backend.generate(req) == "hello");
  CHECK(seen["prompt"] == "prompt text");
  CHECK(seen["max_output_length"] == 123);
  CHECK(seen["sampling"]["temperature"] == 0.5);
  CHECK(seen["auth"] == "Bearer s3cret");

  HttpGenerationBackend broken("http://127.0.0.1:" + std::to_string(port) + "/broken");
  CHECK_THROWS_AS(broken.generate(req), Error);
  server.stop();
  t.join();
}
