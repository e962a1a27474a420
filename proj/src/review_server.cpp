#include "cwescan/review_server.hpp"

#include <httplib.h>

#include "cwescan/error.hpp"
#include "cwescan/line_diff.hpp"

namespace cwescan {

using nlohmann::json;

json progress_to_json(const std::map<CweId, ProgressCounts>& progress) {
  json out = json::object();
  ProgressCounts total;
  for (const auto& [cwe, c] : progress) {
    out[cwe.str()] = {{"pending", c.pending},
                      {"accepted", c.accepted},
                      {"edited_then_accepted", c.edited_then_accepted},
                      {"rejected", c.rejected}};
    total.pending += c.pending;
    total.accepted += c.accepted;
    total.edited_then_accepted += c.edited_then_accepted;
    total.rejected += c.rejected;
  }
  return {{"per_cwe", out},
          {"total",
           {{"pending", total.pending},
            {"accepted", total.accepted},
            {"edited_then_accepted", total.edited_then_accepted},
            {"rejected", total.rejected}}}};
}

json to_json(const PendingPage& page) {
  json items = json::array();
  for (const auto& s : page.items) {
    items.push_back({{"id", s.id},
                     {"cwe", s.cwe.str()},
                     {"vulnerable_lines", s.vulnerable_lines},
                     {"fixed_lines", s.fixed_lines},
                     {"template_version", s.template_version}});
  }
  return {{"items", items},
          {"page", page.page},
          {"page_size", page.page_size},
          {"total_items", page.total_items},
          {"total_pages", page.total_pages},
          {"progress", progress_to_json(page.progress)}};
}

json item_detail_json(const ReviewItem& item, const CweCatalog& catalog) {
  json cwe = {{"id", item.pair.cwe.str()}};
  if (const auto* e = catalog.find(item.pair.cwe)) {
    cwe["name"] = e->name;
    cwe["rank"] = e->rank;
    cwe["summary"] = e->summary;
  }
  return {{"id", item.id},
          {"cwe", cwe},
          {"vulnerable", item.pair.vulnerable.code()},
          {"fixed", item.pair.fixed.code()},
          {"provenance",
           {{"backend", item.pair.provenance.backend},
            {"template_version", item.pair.provenance.template_version},
            {"generated_at", item.pair.provenance.generated_at}}},
          {"review_state", to_json(item.pair.review_state)},
          {"checks", to_json(item.checks)},
          {"decision", item.decision ? to_json(*item.decision) : json(nullptr)},
          {"diff", to_json(line_diff(item.pair.vulnerable.code(), item.pair.fixed.code()))}};
}

namespace {

int status_for(const Error& e) {
  const auto& code = e.code();
  if (code == "not_found") return 404;
  if (code == "conflict") return 409;
  if (code == "validation_error") return 422;
  if (code == "argument_error" || code == "parse_error") return 400;
  return 500;
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const json& body) {
  res.status = 200;
  res.set_content(body.dump(), "application/json");
}

std::size_t positive_param(const httplib::Request& req, const char* name, std::size_t fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used == v.size() && n >= 1) return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
  }
  throw ArgumentError(std::string("query parameter '") + name + "' must be a positive integer");
}

constexpr const char* kFallbackIndex =
    "<!doctype html><html><head><title>CWE review</title></head><body>"
    "<h1>CWE review API</h1><p>No UI assets configured. Endpoints: "
    "<code>/api/pending</code>, <code>/api/items/{id}</code>, <code>/api/progress</code>.</p>"
    "</body></html>";

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store, const CweCatalog& catalog, Options options)
    : store_(store), catalog_(catalog), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  // httplib's default adds SO_REUSEPORT, which would let a second server share the port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  install_routes();
}

ReviewServer::~ReviewServer() { stop(); }

void ReviewServer::install_routes() {
  auto& srv = *server_;

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const Error& e) {
      send_error(res, status_for(e), e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "parse_error", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  });

  srv.Get("/api/pending", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<CweId> filter;
    if (req.has_param("cwe") && !req.get_param_value("cwe").empty()) {
      filter = parse_cwe_id(req.get_param_value("cwe"));
    }
    const auto page = store_.list_pending(filter, positive_param(req, "page", 1),
                                          positive_param(req, "page_size", options_.default_page_size));
    send_json(res, to_json(page));
  });

  srv.Get("/api/progress", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, progress_to_json(store_.progress()));
  });

  srv.Get(R"(/api/items/([A-Za-z0-9\-]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, item_detail_json(store_.get(req.matches[1]), catalog_));
  });

  srv.Post(R"(/api/items/([A-Za-z0-9\-]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    if (!body.is_object() || !body.contains("decision")) throw ValidationError("body must carry a decision");
    for (const auto& [key, _] : body.items()) {
      if (key != "checks" && key != "decision") throw ValidationError("unknown field '" + key + "'");
    }
    ReviewDecision decision = decision_from_json(body["decision"]);
    if (decision.reviewer.empty()) decision.reviewer = options_.default_reviewer;
    decision.timestamp.clear();  // server clock is authoritative
    const ReviewChecks checks = body.contains("checks") ? checks_from_json(body["checks"]) : ReviewChecks{};
    const ReviewItem updated = store_.submit_decision(req.matches[1], checks, std::move(decision));
    send_json(res, item_detail_json(updated, catalog_));
  });

  srv.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, {{"status", "ok"}});
  });

  bool mounted = false;
  if (options_.static_dir && std::filesystem::is_directory(*options_.static_dir)) {
    mounted = srv.set_mount_point("/", options_.static_dir->string());
  }
  if (!mounted) {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kFallbackIndex, "text/html");
    });
  }
}

int ReviewServer::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  return bound;
}

void ReviewServer::run() { server_->listen_after_bind(); }

void ReviewServer::stop() {
  if (server_) server_->stop();
}

bool ReviewServer::is_running() const { return server_->is_running(); }

}  // namespace cwescan
