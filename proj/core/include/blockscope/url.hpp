#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "blockscope/types.hpp"

namespace blockscope {

// Minimal URL splitter for the crawl pipeline: scheme://host[:port]/path?query.
// A missing scheme defaults to http (crawl lists are usually bare domains).
struct ParsedUrl {
  Scheme scheme = Scheme::Http;
  std::string host;
  int port = 0;  // 0 = scheme default
  std::string path;  // includes query, always starts with '/'

  int effective_port() const { return port ? port : (scheme == Scheme::Https ? 443 : 80); }
  std::string to_string() const;

  bool operator==(const ParsedUrl&) const = default;
};

std::optional<ParsedUrl> parse_url(std::string_view url);

// Resolves a Location header value against a base URL (absolute, scheme-less
// "//host/..", absolute-path, or relative forms).
std::string resolve_location(const ParsedUrl& base, std::string_view location);

// Rewrites the host inside `url` with a "www." prefix, keeping everything else.
std::string with_www_host(std::string_view url);

// Builds a TargetUrl from the raw list entry and the effective URL chosen by
// the DNS fallback. Throws ContractError when the effective URL is unparsable.
TargetUrl make_target(const std::string& raw, const std::string& effective);

// List-entry normalization used for de-duplication: trims whitespace and
// lowercases the scheme and host. Returns nullopt for blank or comment lines.
std::optional<std::string> normalize_url_line(std::string_view line);

}  // namespace blockscope
