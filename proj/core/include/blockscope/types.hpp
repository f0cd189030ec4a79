#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace blockscope {

// Thrown when a caller violates a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Thrown when a serialized record does not conform to the log schema.
// `field()` names the offending field (or "<json>" for unparsable input).
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& detail)
      : std::runtime_error("schema error at field '" + field + "': " + detail),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Thrown when a data file (fingerprints, roster, fixture) cannot be loaded.
class FileLoadError : public std::runtime_error {
 public:
  FileLoadError(const std::string& file, int line, const std::string& detail)
      : std::runtime_error(line > 0
                               ? file + ":" + std::to_string(line) + ": " + detail
                               : file + ": " + detail),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// One class per fetch outcome. The declaration order is meaningful: it is the
// tie-break order for majority reporting and the column order of reports.
enum class StatusClass {
  Ok2xx,
  Forbidden403,
  Client4xxOther,
  Unavailable503,
  Server5xxOther,
  ConnError,
  DnsError,
  Timeout,
  RedirectLoop,
  Other,
};
inline constexpr int kStatusClassCount = 10;

std::string_view status_class_name(StatusClass c);  // stable wire name, e.g. "DnsErr"
std::optional<StatusClass> status_class_from_name(std::string_view name);
std::string_view status_class_code(StatusClass c);  // report cell code, e.g. "DE"

// True for the classes that carry an HTTP status code on the record.
constexpr bool status_class_is_http(StatusClass c) {
  return c == StatusClass::Ok2xx || c == StatusClass::Forbidden403 ||
         c == StatusClass::Client4xxOther || c == StatusClass::Unavailable503 ||
         c == StatusClass::Server5xxOther;
}

// Block-page taxonomy. NonHttpBlock is derived from status evidence only;
// body fingerprints may not assign it (see fingerprints.hpp).
enum class BlockpageClass {
  GeoBlockExplicit,
  BypassableChallenge,
  StaticDeny,
  NonHttpBlock,
  NotBlockpage,
};
std::string_view blockpage_class_name(BlockpageClass c);
std::optional<BlockpageClass> blockpage_class_from_name(std::string_view name);

// Transport-level failure kinds reported by an HTTP transport (or synthesized
// by the fetcher, for RedirectLimitExceeded). Partitioned by classify_response.
enum class FailureKind {
  DnsFailure,
  ConnectionRefused,
  ConnectionReset,
  ConnectionAborted,
  TlsError,
  ProtocolError,
  DeadlineExceeded,
  RedirectLimitExceeded,
};
inline constexpr int kFailureKindCount = 8;
std::string_view failure_kind_name(FailureKind k);

// The calibrated crawler identity: a desktop Chrome user-agent string.
inline constexpr std::string_view kDefaultUserAgent =
    "Mozilla/5.0 (Macintosh; Intel Mac OS X 10_11_6) AppleWebKit/537.36 "
    "(KHTML, like Gecko) Chrome/66.0.3359.139 Safari/537.36";

// Measurement constants shared by the fetcher and the traceroute engine.
struct ProbeConfig {
  std::chrono::milliseconds fetch_timeout{30'000};  // whole-fetch budget
  std::string user_agent{kDefaultUserAgent};
  int hop_delta_threshold = 3;  // paths differing by MORE than this are flagged
  int max_ttl = 30;
  int per_ttl_probe_count = 3;
  std::chrono::milliseconds per_hop_timeout{2'000};
  int redirect_limit = 30;
  bool tls_verify = true;

  // Throws ContractError when a field is out of its documented range.
  void validate() const;
};

enum class NetworkKind { Institutional, Home, Dorm, Isp, Vpn, Cloud };
std::string_view network_kind_name(NetworkKind k);
std::optional<NetworkKind> network_kind_from_name(std::string_view name);

// A measurement client location.
struct Vantage {
  std::string id;
  std::string country;  // ISO-3166 alpha-3
  std::string city;
  NetworkKind network_kind = NetworkKind::Institutional;
  std::string region_label;  // aggregation key, e.g. "US", "PAK", "AFRICA"

  bool operator==(const Vantage&) const = default;
};

enum class Scheme { Http, Https };
std::string_view scheme_name(Scheme s);

// A crawl target. `effective` differs from `raw` only by a leading "www."
// host prefix introduced by the DNS fallback.
struct TargetUrl {
  std::string raw;        // exactly as listed in the input
  std::string effective;  // after the www fallback (may equal raw)
  std::string host;       // host of the effective URL
  Scheme scheme = Scheme::Http;

  bool operator==(const TargetUrl&) const = default;
};

// One URL-load attempt, fully classified.
struct FetchOutcome {
  TargetUrl url;
  std::string vantage_id;
  int run_index = 0;
  StatusClass status_class = StatusClass::Other;
  std::optional<int> http_status;          // iff status_class_is_http
  std::optional<std::string> body_digest;  // sha-256 hex of the raw body bytes
  std::optional<std::uint64_t> body_size;
  std::optional<BlockpageClass> blockpage;  // only when a body was received
  std::string final_url;                    // last URL of the redirect chain
  std::int64_t elapsed_ms = 0;
  std::int64_t timestamp_ms = 0;  // UTC epoch milliseconds

  // Throws ContractError when the field-presence invariants are violated.
  void validate() const;

  bool operator==(const FetchOutcome&) const = default;
};

enum class ManualResult {
  AvailableClean,
  AvailableWithCaptcha,
  AvailableWithDelay,
  NotAvailable,
};
std::string_view manual_result_name(ManualResult r);
std::optional<ManualResult> manual_result_from_name(std::string_view name);

// A human check of a short-listed URL, recorded alongside automated verdicts.
struct ManualAnnotation {
  std::string url;
  std::string region_label;
  ManualResult result = ManualResult::NotAvailable;
  std::string note;

  bool operator==(const ManualAnnotation&) const = default;
};

}  // namespace blockscope
