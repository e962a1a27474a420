#pragma once

#include <memory>
#include <optional>
#include <string>

#include "cwescan/model_backend.hpp"

namespace cwescan {

/// Request/response dialect spoken by the completion endpoint.
enum class BackendDialect {
  // {prompt, max_new_tokens, sampling, stream}; streamed as newline-delimited
  // JSON chunks {"token": "..."} optionally ending with {"done": true};
  // non-streamed as {"text": "..."}.
  kNative,
  // OpenAI-style /v1/completions: {prompt, max_tokens, temperature, stream};
  // streamed as server-sent events "data: {...choices[0].text...}" ending with
  // "data: [DONE]".
  kOpenAi,
};

BackendDialect parse_dialect(std::string_view name);
std::string_view dialect_name(BackendDialect dialect);

struct HttpBackendOptions {
  std::string url;  // full endpoint URL, e.g. http://127.0.0.1:8080/v1/complete
  BackendDialect dialect = BackendDialect::kNative;
  std::optional<std::string> api_key_env;  // bearer token read from this variable
  std::optional<std::string> model;        // OpenAI "model" field
  double timeout_seconds = 300.0;
};

/// Streams completions over HTTP, stamping each chunk on receipt with the
/// supplied clock.
class HttpModelBackend final : public ModelBackend {
 public:
  explicit HttpModelBackend(HttpBackendOptions options,
                            std::shared_ptr<MonotonicClock> clock = std::make_shared<SteadyClock>());

  std::string id() const override;
  CompletionResult complete(const CompletionRequest& request) override;

 private:
  HttpBackendOptions options_;
  std::shared_ptr<MonotonicClock> clock_;
};

}  // namespace cwescan
