#include "blockscope/fetcher.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>

#include "blockscope/sha256.hpp"
#include "blockscope/url.hpp"

namespace blockscope {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

// Set-Cookie: name=value; attributes...  Attributes are ignored; the session
// jar is a plain name->value map scoped to one redirect chain.
void absorb_cookie(std::map<std::string, std::string>& jar, std::string_view header) {
  auto semi = header.find(';');
  std::string_view pair = header.substr(0, semi);
  auto eq = pair.find('=');
  if (eq == std::string_view::npos) return;
  std::string_view name = pair.substr(0, eq);
  std::string_view value = pair.substr(eq + 1);
  while (!name.empty() && std::isspace(static_cast<unsigned char>(name.front()))) {
    name.remove_prefix(1);
  }
  while (!name.empty() && std::isspace(static_cast<unsigned char>(name.back()))) {
    name.remove_suffix(1);
  }
  if (name.empty()) return;
  jar[std::string(name)] = std::string(value);
}

bool is_redirect(int status) {
  return status == 301 || status == 302 || status == 303 || status == 307 ||
         status == 308;
}

}  // namespace

std::optional<std::string> HttpResponseData::header(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (iequals(k, name)) return v;
  }
  return std::nullopt;
}

std::vector<std::string> HttpResponseData::headers_named(std::string_view name) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : headers) {
    if (iequals(k, name)) out.push_back(v);
  }
  return out;
}

StatusClass classify_response(std::optional<int> http_status,
                              std::optional<FailureKind> failure) {
  if (http_status.has_value() == failure.has_value()) {
    throw ContractError("classify_response needs exactly one of status / failure");
  }
  if (failure) {
    switch (*failure) {
      case FailureKind::DnsFailure: return StatusClass::DnsError;
      case FailureKind::ConnectionRefused:
      case FailureKind::ConnectionReset:
      case FailureKind::ConnectionAborted: return StatusClass::ConnError;
      case FailureKind::DeadlineExceeded: return StatusClass::Timeout;
      case FailureKind::RedirectLimitExceeded: return StatusClass::RedirectLoop;
      case FailureKind::TlsError:
      case FailureKind::ProtocolError: return StatusClass::Other;
    }
    return StatusClass::Other;
  }
  int s = *http_status;
  if (s >= 200 && s <= 299) return StatusClass::Ok2xx;
  if (s == 403) return StatusClass::Forbidden403;
  if (s >= 400 && s <= 499) return StatusClass::Client4xxOther;
  if (s == 503) return StatusClass::Unavailable503;
  if (s >= 500 && s <= 599) return StatusClass::Server5xxOther;
  return StatusClass::Other;
}

ResolvedTarget resolve_with_www_fallback(const std::string& raw_url, Resolver& resolver) {
  auto parsed = parse_url(raw_url);
  if (!parsed) throw ContractError("unparsable URL: " + raw_url);

  ResolvedTarget out;
  if (auto addrs = resolver.resolve(parsed->host)) {
    out.target = make_target(raw_url, raw_url);
    out.addresses = std::move(*addrs);
    return out;
  }
  if (parsed->host.rfind("www.", 0) != 0) {
    std::string www_url = with_www_host(raw_url);
    if (auto addrs = resolver.resolve("www." + parsed->host)) {
      out.target = make_target(raw_url, www_url);
      out.addresses = std::move(*addrs);
      return out;
    }
  }
  // Unresolved: keep the raw target; the fetch will report DnsError.
  out.target = make_target(raw_url, raw_url);
  return out;
}

FetchOutcome fetch(const FetchRequest& request, HttpTransport& transport,
                   const std::vector<FingerprintRule>& rules) {
  request.config.validate();

  FetchOutcome out;
  out.url = request.target;
  out.vantage_id = request.vantage_id;
  out.run_index = request.run_index;
  out.timestamp_ms = request.timestamp_ms;

  const auto started = std::chrono::steady_clock::now();
  const auto deadline = started + request.config.fetch_timeout;
  std::int64_t sim_elapsed = 0;
  bool any_sim_elapsed = false;

  auto finish = [&](StatusClass cls, std::optional<int> status,
                    const HttpResponseData* resp, const std::string& url_here) {
    out.status_class = cls;
    out.http_status = status;
    out.final_url = url_here;
    if (resp && !resp->body.empty()) {
      out.body_digest = sha256_hex(resp->body);
      out.body_size = resp->body.size();
      out.blockpage = classify_body(resp->body, resp->status, rules);
    }
    if (any_sim_elapsed) {
      out.elapsed_ms = sim_elapsed;
    } else {
      out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();
    }
    return out;
  };

  std::map<std::string, std::string> jar = request.session;
  std::string current_url = request.target.effective;
  int redirects = 0;

  while (true) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      return finish(StatusClass::Timeout, std::nullopt, nullptr, current_url);
    }

    HttpRequestSpec spec;
    spec.method = "GET";
    spec.url = current_url;
    spec.headers.emplace_back("User-Agent", request.config.user_agent);
    spec.headers.emplace_back("Accept", "*/*");
    spec.cookies = jar;
    spec.timeout =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
    spec.tls_verify = request.config.tls_verify;

    HttpResult result = transport.roundtrip(spec);
    if (result.sim_elapsed_ms) {
      sim_elapsed += *result.sim_elapsed_ms;
      any_sim_elapsed = true;
    }

    if (result.failure) {
      return finish(classify_response(std::nullopt, *result.failure), std::nullopt,
                    nullptr, current_url);
    }
    const HttpResponseData& resp = *result.response;

    for (const auto& cookie : resp.headers_named("Set-Cookie")) {
      absorb_cookie(jar, cookie);
    }

    if (is_redirect(resp.status)) {
      auto location = resp.header("Location");
      if (location && !location->empty()) {
        if (++redirects > request.config.redirect_limit) {
          return finish(classify_response(std::nullopt, FailureKind::RedirectLimitExceeded),
                        std::nullopt, nullptr, current_url);
        }
        auto base = parse_url(current_url);
        current_url = base ? resolve_location(*base, *location) : *location;
        continue;
      }
      // A redirect with no target is the final response (classifies Other).
    }

    StatusClass cls = classify_response(resp.status, std::nullopt);
    std::optional<int> status;
    if (status_class_is_http(cls)) status = resp.status;
    return finish(cls, status, &resp, current_url);
  }
}

}  // namespace blockscope
