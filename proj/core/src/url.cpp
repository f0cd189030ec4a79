#include "blockscope/url.hpp"

#include <algorithm>
#include <cctype>

namespace blockscope {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string ParsedUrl::to_string() const {
  std::string out(scheme_name(scheme));
  out += "://";
  out += host;
  if (port) {
    out += ':';
    out += std::to_string(port);
  }
  out += path;
  return out;
}

std::optional<ParsedUrl> parse_url(std::string_view url) {
  url = trim(url);
  if (url.empty()) return std::nullopt;

  ParsedUrl out;
  auto scheme_end = url.find("://");
  if (scheme_end != std::string_view::npos) {
    std::string scheme = lower(url.substr(0, scheme_end));
    if (scheme == "http") {
      out.scheme = Scheme::Http;
    } else if (scheme == "https") {
      out.scheme = Scheme::Https;
    } else {
      return std::nullopt;
    }
    url.remove_prefix(scheme_end + 3);
  }

  auto path_start = url.find('/');
  std::string_view authority = url.substr(0, path_start);
  out.path = path_start == std::string_view::npos ? "/" : std::string(url.substr(path_start));

  // Strip userinfo if present; ports are split off the end.
  auto at = authority.rfind('@');
  if (at != std::string_view::npos) authority.remove_prefix(at + 1);
  auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    std::string_view port_text = authority.substr(colon + 1);
    if (port_text.empty() ||
        !std::all_of(port_text.begin(), port_text.end(),
                     [](unsigned char c) { return std::isdigit(c); })) {
      return std::nullopt;
    }
    int port = 0;
    for (char c : port_text) port = port * 10 + (c - '0');
    if (port <= 0 || port > 65535) return std::nullopt;
    out.port = port;
    authority = authority.substr(0, colon);
  }
  if (authority.empty() || authority.find_first_of(" \t") != std::string_view::npos) {
    return std::nullopt;
  }
  out.host = lower(authority);  // hostnames are case-insensitive
  return out;
}

std::string resolve_location(const ParsedUrl& base, std::string_view location) {
  location = trim(location);
  if (location.find("://") != std::string_view::npos) return std::string(location);
  if (location.rfind("//", 0) == 0) {
    return std::string(scheme_name(base.scheme)) + ":" + std::string(location);
  }
  ParsedUrl target = base;
  if (!location.empty() && location.front() == '/') {
    target.path = std::string(location);
    return target.to_string();
  }
  // Relative path: resolve against the base path's directory.
  auto slash = target.path.rfind('/');
  target.path = target.path.substr(0, slash + 1) + std::string(location);
  return target.to_string();
}

std::string with_www_host(std::string_view url) {
  auto parsed = parse_url(url);
  if (!parsed) return "www." + std::string(url);
  parsed->host = "www." + parsed->host;
  // Keep the original text shape: splice "www." in front of the host.
  std::string out{trim(url)};
  auto scheme_end = out.find("://");
  std::size_t host_pos = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto at = out.find('@', host_pos);
  auto path_pos = out.find('/', host_pos);
  if (at != std::string::npos && (path_pos == std::string::npos || at < path_pos)) {
    host_pos = at + 1;
  }
  out.insert(host_pos, "www.");
  return out;
}

TargetUrl make_target(const std::string& raw, const std::string& effective) {
  auto parsed = parse_url(effective);
  if (!parsed) throw ContractError("unparsable URL: " + effective);
  TargetUrl target;
  target.raw = raw;
  target.effective = effective;
  target.host = parsed->host;
  target.scheme = parsed->scheme;
  return target;
}

std::optional<std::string> normalize_url_line(std::string_view line) {
  std::string_view t = trim(line);
  if (t.empty() || t.front() == '#') return std::nullopt;
  auto parsed = parse_url(t);
  if (!parsed) return lower(t);  // unparsable lines still dedupe textually
  return parsed->to_string();
}

}  // namespace blockscope
