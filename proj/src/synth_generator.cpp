#include "cwescan/synth_generator.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "cwescan/http_util.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Templates

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : version_(std::move(name) + "-" + sha256_hex(body).substr(0, 12)), body_(std::move(body)) {}

const std::vector<std::string>& PromptTemplate::placeholders() {
  static const std::vector<std::string> kNames = {"cwe_id",     "cwe_name",
                                                  "cwe_summary", "pair_count",
                                                  "realism_constraints", "output_schema"};
  return kNames;
}

namespace {

constexpr const char* kRealismConstraints =
    "- Each snippet must look like code from a real application (web handlers, CLI tools, "
    "file processing, data access), not a toy one-liner.\n"
    "- Snippets must be self-contained, syntactically valid Python 3.\n"
    "- Every vulnerable snippet must differ from the others in purpose and structure.\n"
    "- The fixed snippet keeps the same functionality and removes only the weakness, without "
    "introducing a different weakness.\n"
    "- Do not mention the CWE, the vulnerability or the fix in comments or identifiers.";

constexpr const char* kOutputSchema =
    "Respond with a single JSON object and nothing else:\n"
    "{\"pairs\": [{\"vulnerable\": \"<python source>\", \"fixed\": \"<python source>\", "
    "\"note\": \"<one sentence on what the fix changes>\"}]}\n"
    "Encode newlines inside the source strings as \\n.";

constexpr const char* kDefaultBody =
    "You are generating training data for a Python vulnerability detector.\n"
    "\n"
    "Target weakness: {{cwe_id}} ({{cwe_name}}).\n"
    "Description: {{cwe_summary}}\n"
    "\n"
    "Write {{pair_count}} distinct Python code snippets, each realistically demonstrating "
    "{{cwe_id}}. For each vulnerable snippet also write a counter-example: the same code with "
    "the issue that causes {{cwe_id}} fixed.\n"
    "\n"
    "Requirements:\n"
    "{{realism_constraints}}\n"
    "\n"
    "Output format:\n"
    "{{output_schema}}\n";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

const PromptTemplate& default_prompt_template() {
  static const PromptTemplate tmpl("cwe-pairs-v1", kDefaultBody);
  return tmpl;
}

std::string render_prompt(const PromptTemplate& tmpl, const CweEntry& cwe, int pairs,
                          std::span<const std::string> feedback) {
  if (pairs < 1) throw ArgumentError("pairs must be >= 1, got " + std::to_string(pairs));
  for (const auto& name : PromptTemplate::placeholders()) {
    if (tmpl.body().find("{{" + name + "}}") == std::string::npos) {
      throw TemplateError("template " + tmpl.version() + " lacks placeholder {{" + name + "}}");
    }
  }
  std::string out = tmpl.body();
  replace_all(out, "{{cwe_id}}", cwe.id.str());
  replace_all(out, "{{cwe_name}}", cwe.name);
  replace_all(out, "{{cwe_summary}}", cwe.summary);
  replace_all(out, "{{pair_count}}", std::to_string(pairs));
  replace_all(out, "{{realism_constraints}}", kRealismConstraints);
  replace_all(out, "{{output_schema}}", kOutputSchema);
  if (!feedback.empty()) {
    out += "\nSome earlier candidates were rejected. Avoid these problems:\n";
    for (const auto& line : feedback) out += "- " + line + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backends

HttpGenerationBackend::HttpGenerationBackend(std::string url, std::optional<std::string> api_key_env,
                                             double timeout_seconds)
    : url_(std::move(url)), api_key_env_(std::move(api_key_env)), timeout_seconds_(timeout_seconds) {
  split_url(url_);  // validate early
}

std::string HttpGenerationBackend::id() const { return "http:" + url_; }

std::string HttpGenerationBackend::generate(const GenerationRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  const SplitUrl target = split_url(url_);
  httplib::Client client(target.origin);
  const auto timeout = std::chrono::duration<double>(timeout_seconds_);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (api_key_env_) {
    if (const char* key = std::getenv(api_key_env_->c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const json body = {{"prompt", request.prompt},
                     {"max_output_length", request.max_output_length},
                     {"sampling", request.sampling}};
  auto res = client.Post(target.path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("generation request to " + url_ + " failed: " + httplib::to_string(res.error()),
                         elapsed());
  }
  if (res->status != 200) {
    throw TransportError("generation backend returned HTTP " + std::to_string(res->status), elapsed());
  }
  try {
    return json::parse(res->body).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("generation response lacks a text field: ") + e.what());
  }
}

FixtureGenerationBackend::FixtureGenerationBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!std::filesystem::is_directory(dir_)) {
    throw ConfigError("fixture directory " + dir_.string() + " does not exist");
  }
}

std::string FixtureGenerationBackend::id() const { return "fixture:" + dir_.filename().string(); }

std::string FixtureGenerationBackend::generate(const GenerationRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  const auto file = dir_ / request.cwe.str() / (std::to_string(request.attempt) + ".txt");
  std::ifstream in(file, std::ios::binary);
  if (!in) throw TransportError("no fixture response at " + file.string(), 0.0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<GenerationRequest> FixtureGenerationBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::optional<json> try_parse(std::string_view text) {
  auto j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

// Locates the pair list inside a response: bare JSON, a fenced block, or the
// outermost {...}/[...] span embedded in prose.
std::optional<json> locate_pair_list(std::string_view raw) {
  std::vector<std::string_view> attempts{trim(raw)};
  if (auto fence = raw.find("```"); fence != std::string_view::npos) {
    auto body_start = raw.find('\n', fence);
    auto close = body_start == std::string_view::npos ? body_start : raw.find("```", body_start);
    if (close != std::string_view::npos) attempts.push_back(raw.substr(body_start + 1, close - body_start - 1));
  }
  for (auto [open, shut] : {std::pair{'{', '}'}, std::pair{'[', ']'}}) {
    auto first = raw.find(open);
    auto last = raw.rfind(shut);
    if (first != std::string_view::npos && last != std::string_view::npos && last > first) {
      attempts.push_back(raw.substr(first, last - first + 1));
    }
  }
  for (auto candidate : attempts) {
    auto j = try_parse(candidate);
    if (!j) continue;
    if (j->is_array()) return j;
    if (j->is_object() && j->contains("pairs") && (*j)["pairs"].is_array()) return (*j)["pairs"];
  }
  return std::nullopt;
}

}  // namespace

ParsedGeneration parse_generation(std::string_view raw, CweId cwe, const Provenance& provenance,
                                  const SyntaxChecker& checker) {
  auto list = locate_pair_list(raw);
  if (!list) {
    throw GenerationParseError("response for " + cwe.str() + " contains no pair list",
                               std::string(raw));
  }

  ParsedGeneration out;
  struct Pending {
    std::size_t index;
    std::string vulnerable;
    std::string fixed;
  };
  std::vector<Pending> structurally_ok;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& rec = (*list)[i];
    auto str_field = [&](const char* key) -> std::string {
      if (rec.is_object() && rec.contains(key) && rec[key].is_string()) return rec[key].get<std::string>();
      return {};
    };
    const std::string vulnerable = str_field("vulnerable");
    const std::string fixed = str_field("fixed");
    if (!rec.is_object() || !rec.contains("vulnerable") || !rec.contains("fixed") ||
        !rec["vulnerable"].is_string() || !rec["fixed"].is_string()) {
      out.rejections.push_back({i, vulnerable, fixed, "malformed record (needs string fields vulnerable and fixed)"});
    } else if (trim(vulnerable).empty() || trim(fixed).empty()) {
      out.rejections.push_back({i, vulnerable, fixed, "empty snippet"});
    } else if (vulnerable == fixed) {
      out.rejections.push_back({i, vulnerable, fixed, "pair not distinct"});
    } else {
      structurally_ok.push_back({i, vulnerable, fixed});
    }
  }

  std::vector<std::string> sources;
  for (const auto& p : structurally_ok) {
    sources.push_back(p.vulnerable);
    sources.push_back(p.fixed);
  }
  const auto verdicts = checker.check_all(sources);
  for (std::size_t k = 0; k < structurally_ok.size(); ++k) {
    auto& p = structurally_ok[k];
    const auto& v_issue = verdicts[2 * k];
    const auto& f_issue = verdicts[2 * k + 1];
    if (v_issue || f_issue) {
      const std::string which = v_issue ? "vulnerable" : "fixed";
      const auto& issue = v_issue ? *v_issue : *f_issue;
      out.rejections.push_back({p.index, std::move(p.vulnerable), std::move(p.fixed),
                                issue.describe() + " (" + which + " snippet)"});
      continue;
    }
    out.candidates.emplace_back(cwe, Snippet(std::move(p.vulnerable)), Snippet(std::move(p.fixed)),
                                provenance, ReviewState::pending());
  }
  std::sort(out.rejections.begin(), out.rejections.end(),
            [](const auto& a, const auto& b) { return a.record_index < b.record_index; });
  return out;
}

// ---------------------------------------------------------------------------
// Driver

GenerationBatch generate_for_cwe(GenerationBackend& backend, const CweEntry& cwe, int pairs,
                                 int max_retries, const GenerationOptions& options,
                                 const BatchSink& persist) {
  if (pairs < 1) throw ArgumentError("pairs must be >= 1");
  if (max_retries < 0) throw ArgumentError("max_retries must be >= 0");
  static const SyntaxChecker kDefaultChecker;
  const SyntaxChecker& checker = options.checker ? *options.checker : kDefaultChecker;
  const PromptTemplate& tmpl =
      options.prompt_template ? *options.prompt_template : default_prompt_template();

  GenerationBatch batch;
  batch.cwe = cwe.id;
  std::set<std::string> seen;  // content digests across the whole CWE batch
  std::vector<std::string> feedback;
  std::string last_failure;
  bool any_parsed = false;

  for (int attempt = 1; attempt <= max_retries + 1; ++attempt) {
    const int shortfall = pairs - static_cast<int>(batch.parsed.size());
    if (shortfall <= 0) break;
    batch.attempts = attempt;

    GenerationRequest request{render_prompt(tmpl, cwe, shortfall, feedback),
                              options.max_output_length, options.sampling, cwe.id, attempt};
    std::string raw;
    try {
      raw = backend.generate(request);
    } catch (const TransportError& e) {
      last_failure = e.what();
      continue;
    } catch (const ProtocolError& e) {
      last_failure = e.what();
      continue;
    }
    batch.raw_responses.push_back(raw);

    ParsedGeneration parsed;
    try {
      parsed = parse_generation(raw, cwe.id, Provenance{backend.id(), tmpl.version(), utc_timestamp()},
                                checker);
    } catch (const GenerationParseError& e) {
      last_failure = e.what();
      feedback = {"the previous response was not valid JSON in the requested format"};
      continue;
    }
    any_parsed = true;
    feedback.clear();
    for (auto& r : parsed.rejections) {
      feedback.push_back(r.reason);
      batch.rejected_candidates.push_back(std::move(r));
    }
    for (auto& c : parsed.candidates) {
      if (static_cast<int>(batch.parsed.size()) >= pairs) {
        batch.rejected_candidates.push_back({0, c.vulnerable.code(), c.fixed.code(),
                                             "surplus beyond the requested count"});
        continue;
      }
      if (!seen.insert(c.content_digest()).second) {
        batch.rejected_candidates.push_back({0, c.vulnerable.code(), c.fixed.code(),
                                             "duplicate of an earlier candidate"});
        feedback.push_back("duplicate of an earlier candidate");
        continue;
      }
      batch.parsed.push_back(std::move(c));
    }
  }

  batch.incomplete = static_cast<int>(batch.parsed.size()) < pairs;
  if (persist) persist(batch);
  if (!any_parsed) {
    throw GenerationError("no usable response for " + cwe.id.str() + " after " +
                          std::to_string(batch.attempts) + " attempts: " + last_failure);
  }
  return batch;
}

}  // namespace cwescan
