#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cwescan/model_backend.hpp"

namespace httplib {
class Server;
}

namespace cwescan {

struct ScriptedResponse {
  // Selection: `input` must equal the prompt's input section exactly; `match`
  // must occur anywhere in the prompt. Both empty = unconditional.
  std::optional<std::string> input;
  std::optional<std::string> match;
  std::vector<std::string> tokens;
  std::optional<double> first_token_delay_ms;
  std::optional<double> inter_token_delay_ms;
  bool fail = false;  // simulate a transport failure
};

/// Scripted mock model. JSON form:
///
///   {"schema_version": 1,
///    "first_token_delay_ms": 253, "inter_token_delay_ms": 166.4,
///    "sequence":  [<response>...],   // used round-robin by call index if present
///    "responses": [<response>...],   // otherwise first matching entry
///    "default":   <response>}
///
/// A response is {"input"?, "match"?, "text" | "tokens" | {"token", "count"},
/// "first_token_delay_ms"?, "inter_token_delay_ms"?, "fail"?}. "text" is cut
/// into whitespace-led word units.
struct MockScript {
  double first_token_delay_ms = 0.0;
  double inter_token_delay_ms = 0.0;
  std::vector<ScriptedResponse> sequence;
  std::vector<ScriptedResponse> responses;
  std::optional<ScriptedResponse> fallback;

  static MockScript from_json(const nlohmann::json& j);
  static MockScript load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Throws ProtocolError when nothing matches.
  const ScriptedResponse& select(std::string_view prompt, std::size_t call_index) const;
};

/// Splits text into streamed units, each a whitespace run plus the following word.
std::vector<std::string> split_stream_units(std::string_view text);

/// In-process mock. With a VirtualClock the scripted delays cost no wall time.
class ScriptedMockBackend final : public ModelBackend {
 public:
  explicit ScriptedMockBackend(MockScript script,
                               std::shared_ptr<MonotonicClock> clock = std::make_shared<VirtualClock>());

  std::string id() const override { return "mock"; }
  CompletionResult complete(const CompletionRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  MockScript script_;
  std::shared_ptr<MonotonicClock> clock_;
  std::atomic<std::size_t> calls_{0};
};

/// Serves a MockScript over the native wire protocol with real sleeps. POST
/// any path; the body is a native completion request.
class MockHttpServer {
 public:
  explicit MockHttpServer(MockScript script);
  ~MockHttpServer();
  MockHttpServer(const MockHttpServer&) = delete;
  MockHttpServer& operator=(const MockHttpServer&) = delete;

  int bind(const std::string& host, int port);
  void run();
  void stop();
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  MockScript script_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace cwescan
