#include "cwescan/model_backend.hpp"

#include <thread>

#include "cwescan/error.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

namespace {
constexpr std::string_view kInstructionMarker = "### Instruction:\n";
constexpr std::string_view kInputMarker = "\n\n### Input:\n";
constexpr std::string_view kOutputMarker = "\n\n### Output:\n";
}  // namespace

Timestamp SteadyClock::now() {
  return std::chrono::duration_cast<Timestamp>(std::chrono::steady_clock::now().time_since_epoch());
}

void SteadyClock::sleep_for(std::chrono::nanoseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

Timestamp VirtualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_for(std::chrono::nanoseconds d) {
  std::lock_guard lock(mu_);
  if (d.count() > 0) now_ += d;
}

double to_seconds(std::chrono::nanoseconds d) { return std::chrono::duration<double>(d).count(); }

void CompletionRequest::validate() const {
  if (max_new_tokens < 1) {
    throw ArgumentError("max_new_tokens must be >= 1, got " + std::to_string(max_new_tokens));
  }
}

bool TimingTrace::is_monotonic() const noexcept {
  Timestamp prev = request_sent_at;
  for (auto t : token_arrivals) {
    if (t < prev) return false;
    prev = t;
  }
  return true;
}

std::string assemble_prompt(std::string_view instruction, std::string_view input_code) {
  if (trim(input_code).empty()) throw ValidationError("code input is empty");
  std::string out;
  out.reserve(instruction.size() + input_code.size() + 64);
  out += kInstructionMarker;
  out += instruction;
  out += kInputMarker;
  out += input_code;
  out += kOutputMarker;
  return out;
}

std::string_view prompt_input_section(std::string_view prompt) noexcept {
  if (!prompt.starts_with(kInstructionMarker) || !prompt.ends_with(kOutputMarker)) return {};
  const auto body = prompt.substr(0, prompt.size() - kOutputMarker.size());
  // The instruction is configuration text; the code may contain anything, so
  // take the first input marker.
  const auto pos = body.find(kInputMarker, kInstructionMarker.size());
  if (pos == std::string_view::npos) return {};
  return body.substr(pos + kInputMarker.size());
}

nlohmann::json prompt_layout_json() {
  return {{"schema_version", 1},
          {"instruction_prefix", kInstructionMarker},
          {"input_prefix", kInputMarker},
          {"output_prefix", kOutputMarker},
          {"layout", "<instruction_prefix><instruction><input_prefix><input><output_prefix>"}};
}

}  // namespace cwescan
