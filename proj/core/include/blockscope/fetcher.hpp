#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "blockscope/fingerprints.hpp"
#include "blockscope/types.hpp"

namespace blockscope {

// One HTTP round trip, no redirect following. The fetcher drives the chain.
struct HttpRequestSpec {
  std::string method = "GET";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::map<std::string, std::string> cookies;
  std::chrono::milliseconds timeout{30'000};
  bool tls_verify = true;
};

struct HttpResponseData {
  int status = 0;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;

  std::optional<std::string> header(std::string_view name) const;  // case-insensitive, first
  std::vector<std::string> headers_named(std::string_view name) const;
};

// Exactly one of response/failure is set. Simulated transports may report a
// logical elapsed time; real transports leave it empty and wall time is used.
struct HttpResult {
  std::optional<HttpResponseData> response;
  std::optional<FailureKind> failure;
  std::optional<std::int64_t> sim_elapsed_ms;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Must be callable from concurrent threads.
  virtual HttpResult roundtrip(const HttpRequestSpec& request) = 0;
};

class Resolver {
 public:
  virtual ~Resolver() = default;
  // Address list on success, nullopt on resolution failure.
  virtual std::optional<std::vector<std::string>> resolve(const std::string& host) = 0;
};

// Result of the pre-fetch DNS step. Empty address list marks an unresolved
// target; the fetch then surfaces DnsError through the transport.
struct ResolvedTarget {
  TargetUrl target;
  std::vector<std::string> addresses;

  bool resolved() const { return !addresses.empty(); }
};

// Tries the host exactly as listed; on DNS failure, and only when the host
// lacks a "www." prefix, retries once with "www." prepended. Never attempts
// any other rewrite.
ResolvedTarget resolve_with_www_fallback(const std::string& raw_url, Resolver& resolver);

// Context for one URL load. The session cookie jar starts empty per URL and
// is replayed across the redirect chain.
struct FetchRequest {
  TargetUrl target;
  ProbeConfig config;
  std::map<std::string, std::string> session;
  std::string vantage_id;
  int run_index = 0;
  std::int64_t timestamp_ms = 0;  // stamped onto the outcome
};

// Total classification: 2xx, 403, other 4xx, 503, other 5xx by status; DNS /
// connection / deadline / redirect-limit failures by kind; everything else
// (1xx, final 3xx, TLS and protocol errors) is Other. Exactly one of the two
// arguments must be present, else ContractError.
StatusClass classify_response(std::optional<int> http_status,
                              std::optional<FailureKind> failure);

// Loads one URL: GET over the target scheme, up to redirect_limit redirects
// (cross-scheme upgrades included), configured user-agent on every hop,
// cookies replayed within the chain, whole attempt bounded by fetch_timeout.
// Never throws for network conditions; every failure maps to a StatusClass.
// When a body arrives it is digested, sized and classified against `rules`.
FetchOutcome fetch(const FetchRequest& request, HttpTransport& transport,
                   const std::vector<FingerprintRule>& rules = {});

}  // namespace blockscope
