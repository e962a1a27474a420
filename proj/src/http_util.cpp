#include "cwescan/http_util.hpp"

#include "cwescan/error.hpp"

namespace cwescan {

SplitUrl split_url(std::string_view url) {
  constexpr std::string_view kScheme = "http://";
  if (!url.starts_with(kScheme)) {
    throw ConfigError("unsupported URL '" + std::string(url) + "' (expected http://host:port/path)");
  }
  const std::size_t slash = url.find('/', kScheme.size());
  SplitUrl out;
  out.origin = std::string(url.substr(0, slash));
  out.path = slash == std::string_view::npos ? "/" : std::string(url.substr(slash));
  if (out.origin.size() == kScheme.size()) throw ConfigError("URL '" + std::string(url) + "' has no host");
  return out;
}

}  // namespace cwescan
