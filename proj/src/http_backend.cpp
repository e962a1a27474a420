#include "cwescan/http_backend.hpp"

#include <cstdlib>

#include <httplib.h>

#include "cwescan/error.hpp"
#include "cwescan/http_util.hpp"
#include "cwescan/text_util.hpp"

namespace cwescan {

using nlohmann::json;

BackendDialect parse_dialect(std::string_view name) {
  if (name == "native") return BackendDialect::kNative;
  if (name == "openai") return BackendDialect::kOpenAi;
  throw ConfigError("unknown backend dialect '" + std::string(name) + "' (expected native or openai)");
}

std::string_view dialect_name(BackendDialect dialect) {
  return dialect == BackendDialect::kNative ? "native" : "openai";
}

HttpModelBackend::HttpModelBackend(HttpBackendOptions options, std::shared_ptr<MonotonicClock> clock)
    : options_(std::move(options)), clock_(std::move(clock)) {
  split_url(options_.url);
}

std::string HttpModelBackend::id() const {
  return std::string(dialect_name(options_.dialect)) + ":" + options_.url;
}

namespace {

json request_body(const HttpBackendOptions& opt, const CompletionRequest& req) {
  if (opt.dialect == BackendDialect::kNative) {
    json sampling = req.sampling.extras.is_object() ? req.sampling.extras : json::object();
    sampling["temperature"] = req.sampling.temperature;
    return {{"prompt", req.prompt}, {"max_new_tokens", req.max_new_tokens}, {"sampling", sampling},
            {"stream", req.stream}};
  }
  json body = {{"prompt", req.prompt}, {"max_tokens", req.max_new_tokens},
               {"temperature", req.sampling.temperature}, {"stream", req.stream}};
  if (opt.model) body["model"] = *opt.model;
  if (req.sampling.extras.is_object()) {
    for (const auto& [k, v] : req.sampling.extras.items()) body[k] = v;
  }
  return body;
}

// Parses one complete stream line. Returns false at end of stream.
// Throws ProtocolError on malformed content.
bool decode_stream_line(BackendDialect dialect, std::string_view line, std::string& token, bool& has_token) {
  has_token = false;
  line = trim(line);
  if (line.empty()) return true;
  if (dialect == BackendDialect::kOpenAi) {
    if (line.starts_with(":")) return true;  // SSE comment
    if (!line.starts_with("data:")) throw ProtocolError("unexpected SSE line");
    line = trim(line.substr(5));
    if (line == "[DONE]") return false;
    const json j = json::parse(line);
    const auto& choices = j.at("choices");
    if (!choices.empty()) {
      token = choices.at(0).at("text").get<std::string>();
      has_token = true;
    }
    return true;
  }
  const json j = json::parse(line);
  if (j.contains("error")) throw ProtocolError("backend error: " + j["error"].dump());
  if (j.contains("token")) {
    token = j.at("token").get<std::string>();
    has_token = true;
  }
  return !(j.contains("done") && j["done"].is_boolean() && j["done"].get<bool>());
}

std::string decode_full_body(BackendDialect dialect, const std::string& body) {
  const json j = json::parse(body);
  if (dialect == BackendDialect::kOpenAi) return j.at("choices").at(0).at("text").get<std::string>();
  return j.at("text").get<std::string>();
}

}  // namespace

CompletionResult HttpModelBackend::complete(const CompletionRequest& request) {
  request.validate();
  const SplitUrl target = split_url(options_.url);
  httplib::Client client(target.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(options_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);

  httplib::Request req;
  req.method = "POST";
  req.path = target.path;
  req.body = request_body(options_, request).dump(-1, ' ', false, json::error_handler_t::replace);
  req.set_header("Content-Type", "application/json");
  if (options_.api_key_env) {
    if (const char* key = std::getenv(options_.api_key_env->c_str()); key && *key) {
      req.set_header("Authorization", std::string("Bearer ") + key);
    }
  }

  CompletionResult result;
  result.backend_id = id();
  int status = 0;
  std::string received;  // raw bytes, kept for error reports
  std::string pending;   // incomplete trailing line
  bool finished = false;
  std::optional<std::string> protocol_failure;

  req.response_handler = [&](const httplib::Response& r) {
    status = r.status;
    return true;
  };
  req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
    const Timestamp arrival = clock_->now();
    received.append(data, len);
    if (!request.stream || status != 200) return true;
    pending.append(data, len);
    std::size_t nl;
    while (!finished && (nl = pending.find('\n')) != std::string::npos) {
      const std::string line = pending.substr(0, nl);
      pending.erase(0, nl + 1);
      std::string token;
      bool has_token = false;
      try {
        finished = !decode_stream_line(options_.dialect, line, token, has_token);
      } catch (const std::exception& e) {
        protocol_failure = e.what();
        return false;
      }
      if (has_token) {
        result.text += token;
        result.trace.token_arrivals.push_back(arrival);
      }
    }
    return true;
  };

  result.trace.request_sent_at = clock_->now();
  auto res = client.send(req);
  const double elapsed = to_seconds(clock_->now() - result.trace.request_sent_at);

  if (protocol_failure) {
    throw ProtocolError("malformed stream from " + options_.url + " (" + *protocol_failure +
                        "); received so far: " + received);
  }
  if (!res) {
    throw TransportError("request to " + options_.url + " failed after " + std::to_string(elapsed) +
                             " s: " + httplib::to_string(res.error()),
                         elapsed);
  }
  if (status != 200) {
    throw TransportError("backend returned HTTP " + std::to_string(status) + ": " + received, elapsed);
  }
  if (request.stream) {
    if (!finished && !trim(pending).empty()) {
      // Final line without a trailing newline.
      std::string token;
      bool has_token = false;
      try {
        decode_stream_line(options_.dialect, pending, token, has_token);
      } catch (const std::exception& e) {
        throw ProtocolError("malformed stream tail from " + options_.url + " (" + e.what() +
                            "); received so far: " + received);
      }
      if (has_token) {
        result.text += token;
        result.trace.token_arrivals.push_back(clock_->now());
      }
    }
    return result;
  }
  try {
    result.text = decode_full_body(options_.dialect, received);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed response body (") + e.what() + "): " + received);
  }
  result.trace.token_arrivals.push_back(clock_->now());
  return result;
}

}  // namespace cwescan
