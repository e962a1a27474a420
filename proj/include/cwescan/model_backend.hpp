#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cwescan {

/// Monotonic instant, measured from an arbitrary per-clock epoch.
using Timestamp = std::chrono::nanoseconds;

class MonotonicClock {
 public:
  virtual ~MonotonicClock() = default;
  virtual Timestamp now() = 0;
  virtual void sleep_for(std::chrono::nanoseconds d) = 0;
};

class SteadyClock final : public MonotonicClock {
 public:
  Timestamp now() override;
  void sleep_for(std::chrono::nanoseconds d) override;
};

/// Advances only when slept on; lets scripted timings run instantly.
class VirtualClock final : public MonotonicClock {
 public:
  Timestamp now() override;
  void sleep_for(std::chrono::nanoseconds d) override;

 private:
  std::mutex mu_;
  Timestamp now_{0};
};

double to_seconds(std::chrono::nanoseconds d);

struct SamplingParams {
  double temperature = 0.0;  // greedy by default
  nlohmann::json extras = nlohmann::json::object();  // passed through as-is
};

struct CompletionRequest {
  std::string prompt;
  int max_new_tokens = 16;
  SamplingParams sampling;
  bool stream = true;

  /// Throws ArgumentError when max_new_tokens < 1.
  void validate() const;
};

/// Client-side timestamps of one completion.
struct TimingTrace {
  Timestamp request_sent_at{0};
  std::vector<Timestamp> token_arrivals;

  std::size_t token_count() const noexcept { return token_arrivals.size(); }
  /// Arrivals are non-decreasing and none precede the request.
  bool is_monotonic() const noexcept;
};

struct CompletionResult {
  std::string text;
  TimingTrace trace;
  std::string backend_id;
};

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string id() const = 0;
  /// Throws TransportError on connect/timeout failure, ProtocolError on a
  /// malformed response.
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

/// Shared layout for training export and inference:
///
///   ### Instruction:\n<instruction>\n\n### Input:\n<code>\n\n### Output:\n
///
/// Throws ValidationError when the code is blank.
std::string assemble_prompt(std::string_view instruction, std::string_view input_code);

/// Recovers the input section of an assembled prompt; empty when the prompt
/// does not follow the layout.
std::string_view prompt_input_section(std::string_view prompt) noexcept;

/// Section markers as a JSON document, written next to exported datasets so
/// other tooling can rebuild the exact prompt bytes.
nlohmann::json prompt_layout_json();

}  // namespace cwescan
