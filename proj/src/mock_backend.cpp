#include "cwescan/mock_backend.hpp"

#include <cctype>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "cwescan/error.hpp"

namespace cwescan {

using nlohmann::json;

std::vector<std::string> split_stream_units(std::string_view text) {
  std::vector<std::string> units;
  std::size_t i = 0;
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && space(text[i])) ++i;
    while (i < text.size() && !space(text[i])) ++i;
    units.emplace_back(text.substr(start, i - start));
  }
  return units;
}

namespace {

ScriptedResponse response_from_json(const json& j) {
  ScriptedResponse r;
  if (j.contains("input")) r.input = j["input"].get<std::string>();
  if (j.contains("match")) r.match = j["match"].get<std::string>();
  if (j.contains("tokens")) {
    r.tokens = j["tokens"].get<std::vector<std::string>>();
  } else if (j.contains("text")) {
    r.tokens = split_stream_units(j["text"].get<std::string>());
  } else if (j.contains("token")) {
    r.tokens.assign(j.value("count", std::size_t{1}), j["token"].get<std::string>());
  }
  if (j.contains("first_token_delay_ms")) r.first_token_delay_ms = j["first_token_delay_ms"].get<double>();
  if (j.contains("inter_token_delay_ms")) r.inter_token_delay_ms = j["inter_token_delay_ms"].get<double>();
  r.fail = j.value("fail", false);
  return r;
}

json response_to_json(const ScriptedResponse& r) {
  json j = {{"tokens", r.tokens}};
  if (r.input) j["input"] = *r.input;
  if (r.match) j["match"] = *r.match;
  if (r.first_token_delay_ms) j["first_token_delay_ms"] = *r.first_token_delay_ms;
  if (r.inter_token_delay_ms) j["inter_token_delay_ms"] = *r.inter_token_delay_ms;
  if (r.fail) j["fail"] = true;
  return j;
}

std::chrono::nanoseconds from_ms(double ms) {
  return std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(ms * 1e6)));
}

struct Plan {
  std::vector<std::string> tokens;
  std::chrono::nanoseconds first_delay;
  std::chrono::nanoseconds gap;
};

Plan plan_for(const MockScript& script, const ScriptedResponse& r, int max_new_tokens) {
  Plan p{r.tokens, from_ms(r.first_token_delay_ms.value_or(script.first_token_delay_ms)),
         from_ms(r.inter_token_delay_ms.value_or(script.inter_token_delay_ms))};
  if (p.tokens.size() > static_cast<std::size_t>(max_new_tokens)) p.tokens.resize(max_new_tokens);
  return p;
}

}  // namespace

MockScript MockScript::from_json(const json& j) {
  try {
    MockScript s;
    s.first_token_delay_ms = j.value("first_token_delay_ms", 0.0);
    s.inter_token_delay_ms = j.value("inter_token_delay_ms", 0.0);
    if (j.contains("sequence")) {
      for (const auto& r : j["sequence"]) s.sequence.push_back(response_from_json(r));
    }
    if (j.contains("responses")) {
      for (const auto& r : j["responses"]) s.responses.push_back(response_from_json(r));
    }
    if (j.contains("default")) s.fallback = response_from_json(j["default"]);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid mock script: ") + e.what());
  }
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock script " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("mock script " + path.string() + " is not valid JSON");
  return from_json(j);
}

json MockScript::to_json() const {
  json j = {{"schema_version", 1},
            {"first_token_delay_ms", first_token_delay_ms},
            {"inter_token_delay_ms", inter_token_delay_ms}};
  if (!sequence.empty()) {
    j["sequence"] = json::array();
    for (const auto& r : sequence) j["sequence"].push_back(response_to_json(r));
  }
  if (!responses.empty()) {
    j["responses"] = json::array();
    for (const auto& r : responses) j["responses"].push_back(response_to_json(r));
  }
  if (fallback) j["default"] = response_to_json(*fallback);
  return j;
}

const ScriptedResponse& MockScript::select(std::string_view prompt, std::size_t call_index) const {
  if (!sequence.empty()) return sequence[call_index % sequence.size()];
  const std::string_view input = prompt_input_section(prompt);
  for (const auto& r : responses) {
    if (r.input && *r.input != input) continue;
    if (r.match && prompt.find(*r.match) == std::string_view::npos) continue;
    return r;
  }
  if (fallback) return *fallback;
  throw ProtocolError("mock script has no response for this prompt");
}

ScriptedMockBackend::ScriptedMockBackend(MockScript script, std::shared_ptr<MonotonicClock> clock)
    : script_(std::move(script)), clock_(std::move(clock)) {}

CompletionResult ScriptedMockBackend::complete(const CompletionRequest& request) {
  request.validate();
  const std::size_t call = calls_++;
  CompletionResult result;
  result.backend_id = id();
  result.trace.request_sent_at = clock_->now();
  const ScriptedResponse& r = script_.select(request.prompt, call);
  const Plan plan = plan_for(script_, r, request.max_new_tokens);
  if (r.fail) {
    clock_->sleep_for(plan.first_delay);
    throw TransportError("scripted failure", to_seconds(clock_->now() - result.trace.request_sent_at));
  }
  for (std::size_t i = 0; i < plan.tokens.size(); ++i) {
    clock_->sleep_for(i == 0 ? plan.first_delay : plan.gap);
    result.text += plan.tokens[i];
    if (request.stream) result.trace.token_arrivals.push_back(clock_->now());
  }
  if (!request.stream) result.trace.token_arrivals.push_back(clock_->now());
  return result;
}

// ---------------------------------------------------------------------------

MockHttpServer::MockHttpServer(MockScript script)
    : script_(std::move(script)), server_(std::make_unique<httplib::Server>()) {
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server_->Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t call = calls_++;
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("prompt") || !body["prompt"].is_string()) {
      res.status = 400;
      res.set_content(R"({"error":"malformed request"})", "application/json");
      return;
    }
    const std::string prompt = body["prompt"].get<std::string>();
    const int max_new = body.value("max_new_tokens", 1 << 20);
    const bool stream = body.value("stream", true);
    const ScriptedResponse* r = nullptr;
    try {
      r = &script_.select(prompt, call);
    } catch (const Error& e) {
      res.status = 404;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      return;
    }
    if (r->fail) {
      res.status = 503;
      res.set_content(R"({"error":"scripted failure"})", "application/json");
      return;
    }
    auto plan = std::make_shared<Plan>(plan_for(script_, *r, max_new));
    if (!stream) {
      std::string text;
      for (std::size_t i = 0; i < plan->tokens.size(); ++i) {
        std::this_thread::sleep_for(i == 0 ? plan->first_delay : plan->gap);
        text += plan->tokens[i];
      }
      res.set_content(json{{"text", text}}.dump(-1, ' ', false, json::error_handler_t::replace),
                      "application/json");
      return;
    }
    res.set_chunked_content_provider("application/x-ndjson", [plan](size_t, httplib::DataSink& sink) {
      for (std::size_t i = 0; i < plan->tokens.size(); ++i) {
        std::this_thread::sleep_for(i == 0 ? plan->first_delay : plan->gap);
        const std::string line =
            json{{"token", plan->tokens[i]}}.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
        if (!sink.write(line.data(), line.size())) return false;
      }
      const std::string done = "{\"done\":true}\n";
      sink.write(done.data(), done.size());
      sink.done();
      return true;
    });
  });
}

MockHttpServer::~MockHttpServer() { stop(); }

int MockHttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void MockHttpServer::run() { server_->listen_after_bind(); }

void MockHttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace cwescan
