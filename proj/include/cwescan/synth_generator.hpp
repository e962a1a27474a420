#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/cwe_catalog.hpp"
#include "cwescan/dataset.hpp"
#include "cwescan/error.hpp"
#include "cwescan/syntax_check.hpp"

namespace cwescan {

// ---------------------------------------------------------------------------
// Prompt templates

/// Template body with {{placeholders}}. The version carries a digest of the
/// body, so editing the body always changes the version.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string body);

  const std::string& version() const noexcept { return version_; }
  const std::string& body() const noexcept { return body_; }

  static const std::vector<std::string>& placeholders();

 private:
  std::string version_;
  std::string body_;
};

const PromptTemplate& default_prompt_template();

/// Deterministic. `feedback` lines (rejection reasons from an earlier attempt)
/// are appended after the rendered body. Throws ArgumentError if pairs < 1 and
/// TemplateError if the body lacks a placeholder.
std::string render_prompt(const PromptTemplate& tmpl, const CweEntry& cwe, int pairs,
                          std::span<const std::string> feedback = {});

// ---------------------------------------------------------------------------
// Backends

struct GenerationRequest {
  std::string prompt;
  int max_output_length = 4096;
  nlohmann::json sampling = nlohmann::json::object();
  // Routing context; HTTP backends ignore it, the fixture backend keys on it.
  CweId cwe{1};
  int attempt = 1;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string id() const = 0;
  /// Returns raw generated text. Throws TransportError on delivery failure.
  virtual std::string generate(const GenerationRequest& request) = 0;
};

/// POSTs {prompt, max_output_length, sampling} as JSON to `url` and expects
/// {"text": ...} back. A bearer token is read from `api_key_env` when set.
class HttpGenerationBackend : public GenerationBackend {
 public:
  HttpGenerationBackend(std::string url, std::optional<std::string> api_key_env = std::nullopt,
                        double timeout_seconds = 120.0);
  std::string id() const override;
  std::string generate(const GenerationRequest& request) override;

 private:
  std::string url_;
  std::optional<std::string> api_key_env_;
  double timeout_seconds_;
};

/// Replays canned responses from `<dir>/<CWE-n>/<attempt>.txt`. A missing file
/// is reported as a transport failure.
class FixtureGenerationBackend : public GenerationBackend {
 public:
  explicit FixtureGenerationBackend(std::filesystem::path dir);
  std::string id() const override;
  std::string generate(const GenerationRequest& request) override;

  /// Every request seen so far, in arrival order.
  std::vector<GenerationRequest> requests() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::vector<GenerationRequest> requests_;
};

// ---------------------------------------------------------------------------
// Response parsing

/// Thrown when a response contains no recognizable pair records at all.
class GenerationParseError : public ParseError {
 public:
  GenerationParseError(const std::string& message, std::string raw)
      : ParseError(message), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

struct RejectedCandidate {
  std::size_t record_index = 0;  // position in the response's pair list
  std::string vulnerable;
  std::string fixed;
  std::string reason;
};

struct ParsedGeneration {
  std::vector<PairedExample> candidates;  // all pending
  std::vector<RejectedCandidate> rejections;
};

/// Extracts {vulnerable, fixed, note} records. Every record ends up either as a
/// pending candidate or as a rejection with a reason.
ParsedGeneration parse_generation(std::string_view raw, CweId cwe, const Provenance& provenance,
                                  const SyntaxChecker& checker);

// ---------------------------------------------------------------------------
// Driver

struct GenerationBatch {
  CweId cwe{1};
  std::vector<std::string> raw_responses;  // one per attempt that returned text
  std::vector<PairedExample> parsed;
  std::vector<RejectedCandidate> rejected_candidates;
  int attempts = 0;
  bool incomplete = false;
};

struct GenerationOptions {
  const PromptTemplate* prompt_template = nullptr;  // default template when null
  int max_output_length = 4096;
  nlohmann::json sampling = {{"temperature", 0.9}};
  const SyntaxChecker* checker = nullptr;  // shared default when null
};

using BatchSink = std::function<void(const GenerationBatch&)>;

/// Requests `pairs` candidates, then re-requests only the shortfall (echoing
/// rejection reasons) for up to `max_retries` more attempts. The batch is handed
/// to `persist` even when no attempt parsed; GenerationError is thrown then.
GenerationBatch generate_for_cwe(GenerationBackend& backend, const CweEntry& cwe, int pairs,
                                 int max_retries, const GenerationOptions& options = {},
                                 const BatchSink& persist = {});

}  // namespace cwescan
