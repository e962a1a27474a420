#include "cwescan/syntax_check.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cwescan/error.hpp"

extern char** environ;

namespace cwescan {

namespace {

constexpr const char* kCheckScript = R"PY(
import json, sys, warnings
warnings.simplefilter("ignore")
with open(sys.argv[1], encoding="utf-8") as fh:
    sources = json.load(fh)
results = []
for src in sources:
    try:
        compile(src, "<snippet>", "exec", dont_inherit=True)
        results.append(None)
    except SyntaxError as exc:
        results.append({"line": exc.lineno or 0, "message": exc.msg or "invalid syntax"})
    except (ValueError, MemoryError, RecursionError) as exc:
        results.append({"line": 0, "message": str(exc)})
json.dump(results, sys.stdout)
)PY";

// Temp file removed on scope exit.
class TempFile {
 public:
  TempFile() {
    auto pattern = (std::filesystem::temp_directory_path() / "cwescan-syntax-XXXXXX").string();
    const int fd = ::mkstemp(pattern.data());
    if (fd < 0) throw IoError("mkstemp failed: " + std::string(std::strerror(errno)));
    ::close(fd);
    path_ = pattern;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string run_capture(const std::string& program, const std::vector<std::string>& args) {
  int fds[2];
  if (::pipe(fds) != 0) throw IoError("pipe failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);

  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(program.c_str()));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, program.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw IoError("cannot launch " + program + ": " + std::strerror(rc));
  }
  std::string out;
  char buf[4096];
  ssize_t n;
  while ((n = ::read(fds[0], buf, sizeof buf)) > 0 || (n < 0 && errno == EINTR)) {
    if (n > 0) out.append(buf, static_cast<std::size_t>(n));
  }
  ::close(fds[0]);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw IoError(program + " exited abnormally while checking syntax");
  }
  return out;
}

}  // namespace

std::string SyntaxIssue::describe() const {
  return "syntax error at line " + std::to_string(line) + ": " + message;
}

SyntaxChecker::SyntaxChecker(std::optional<std::string> python) {
  if (python) {
    python_ = *python;
  } else if (const char* env = std::getenv("CWESCAN_PYTHON"); env && *env) {
    python_ = env;
  } else {
    python_ = CWESCAN_PYTHON;
  }
}

SyntaxResult SyntaxChecker::check(const Snippet& snippet) const {
  const std::string src = snippet.code();
  return check_all(std::span(&src, 1)).front();
}

std::vector<SyntaxResult> SyntaxChecker::check_all(std::span<const std::string> sources) const {
  if (sources.empty()) return {};
  TempFile input;
  {
    std::ofstream out(input.path(), std::ios::binary);
    // Invalid UTF-8 is replaced rather than rejected; the compile step then
    // reports it like any other bad source.
    out << nlohmann::json(std::vector<std::string>(sources.begin(), sources.end()))
               .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    if (!out) throw IoError("cannot write syntax-check input");
  }
  const std::string raw = run_capture(python_, {"-I", "-c", kCheckScript, input.path().string()});
  nlohmann::json parsed;
  try {
    parsed = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    throw IoError("syntax checker produced unreadable output");
  }
  if (!parsed.is_array() || parsed.size() != sources.size()) {
    throw IoError("syntax checker returned the wrong number of results");
  }
  std::vector<SyntaxResult> results;
  results.reserve(sources.size());
  for (const auto& r : parsed) {
    if (r.is_null()) {
      results.emplace_back(std::nullopt);
    } else {
      results.emplace_back(SyntaxIssue{r.at("line").get<int>(), r.at("message").get<std::string>()});
    }
  }
  return results;
}

SyntaxResult syntax_check(const Snippet& snippet) {
  static const SyntaxChecker checker;
  return checker.check(snippet);
}

}  // namespace cwescan
