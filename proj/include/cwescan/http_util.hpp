#pragma once

#include <string>
#include <string_view>

namespace cwescan {

struct SplitUrl {
  std::string origin;  // "http://host:port"
  std::string path;    // "/..." (defaults to "/")
};

/// Throws ConfigError for anything but an http:// URL with a host.
SplitUrl split_url(std::string_view url);

}  // namespace cwescan
