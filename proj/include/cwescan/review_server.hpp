#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "cwescan/review_engine.hpp"

namespace httplib {
class Server;
}

namespace cwescan {

nlohmann::json to_json(const PendingPage& page);
nlohmann::json progress_to_json(const std::map<CweId, ProgressCounts>& progress);
/// Item detail: both snippets, CWE entry, checks, decision and server-side diff.
nlohmann::json item_detail_json(const ReviewItem& item, const CweCatalog& catalog);

/// HTTP front end for a ReviewStore:
///   GET  /api/pending?cwe=&page=&page_size=
///   GET  /api/items/{id}
///   POST /api/items/{id}/decision   {"checks": {...}, "decision": {...}}
///   GET  /api/progress
/// Static UI assets are served from `static_dir` at "/". Errors are
/// {"error": {"code": ..., "message": ...}}.
class ReviewServer {
 public:
  struct Options {
    std::optional<std::filesystem::path> static_dir;
    std::string default_reviewer = "reviewer";
    std::size_t default_page_size = 20;
  };

  ReviewServer(ReviewStore& store, const CweCatalog& catalog, Options options);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds without serving yet; port 0 picks a free port. Returns the bound
  /// port. Throws IoError when the address is in use.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void run();
  void stop();
  bool is_running() const;

 private:
  void install_routes();

  ReviewStore& store_;
  const CweCatalog& catalog_;
  Options options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace cwescan
