#include "blockscope/types.hpp"

namespace blockscope {

std::string_view status_class_name(StatusClass c) {
  switch (c) {
    case StatusClass::Ok2xx: return "2xx";
    case StatusClass::Forbidden403: return "403";
    case StatusClass::Client4xxOther: return "4xxOther";
    case StatusClass::Unavailable503: return "503";
    case StatusClass::Server5xxOther: return "5xxOther";
    case StatusClass::ConnError: return "ConnErr";
    case StatusClass::DnsError: return "DnsErr";
    case StatusClass::Timeout: return "Timeout";
    case StatusClass::RedirectLoop: return "RedirectLoop";
    case StatusClass::Other: return "Other";
  }
  return "Other";
}

std::optional<StatusClass> status_class_from_name(std::string_view name) {
  for (int i = 0; i < kStatusClassCount; ++i) {
    auto c = static_cast<StatusClass>(i);
    if (status_class_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view status_class_code(StatusClass c) {
  switch (c) {
    case StatusClass::Ok2xx: return "200";
    case StatusClass::Forbidden403: return "403";
    case StatusClass::Client4xxOther: return "4XX";
    case StatusClass::Unavailable503: return "503";
    case StatusClass::Server5xxOther: return "5XX";
    case StatusClass::ConnError: return "CE";
    case StatusClass::DnsError: return "DE";
    case StatusClass::Timeout: return "TO";
    case StatusClass::RedirectLoop: return "RD";
    case StatusClass::Other: return "OT";
  }
  return "OT";
}

std::string_view blockpage_class_name(BlockpageClass c) {
  switch (c) {
    case BlockpageClass::GeoBlockExplicit: return "GeoBlockExplicit";
    case BlockpageClass::BypassableChallenge: return "BypassableChallenge";
    case BlockpageClass::StaticDeny: return "StaticDeny";
    case BlockpageClass::NonHttpBlock: return "NonHttpBlock";
    case BlockpageClass::NotBlockpage: return "NotBlockpage";
  }
  return "NotBlockpage";
}

std::optional<BlockpageClass> blockpage_class_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(BlockpageClass::NotBlockpage); ++i) {
    auto c = static_cast<BlockpageClass>(i);
    if (blockpage_class_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view failure_kind_name(FailureKind k) {
  switch (k) {
    case FailureKind::DnsFailure: return "DnsFailure";
    case FailureKind::ConnectionRefused: return "ConnectionRefused";
    case FailureKind::ConnectionReset: return "ConnectionReset";
    case FailureKind::ConnectionAborted: return "ConnectionAborted";
    case FailureKind::TlsError: return "TlsError";
    case FailureKind::ProtocolError: return "ProtocolError";
    case FailureKind::DeadlineExceeded: return "DeadlineExceeded";
    case FailureKind::RedirectLimitExceeded: return "RedirectLimitExceeded";
  }
  return "ProtocolError";
}

void ProbeConfig::validate() const {
  if (fetch_timeout.count() <= 0) throw ContractError("fetch_timeout must be > 0");
  if (hop_delta_threshold < 1) throw ContractError("hop_delta_threshold must be >= 1");
  if (max_ttl < 1 || max_ttl > 255) throw ContractError("max_ttl must be in [1, 255]");
  if (per_ttl_probe_count < 1) throw ContractError("per_ttl_probe_count must be >= 1");
  if (per_hop_timeout.count() <= 0) throw ContractError("per_hop_timeout must be > 0");
  if (redirect_limit < 1) throw ContractError("redirect_limit must be >= 1");
}

std::string_view network_kind_name(NetworkKind k) {
  switch (k) {
    case NetworkKind::Institutional: return "institutional";
    case NetworkKind::Home: return "home";
    case NetworkKind::Dorm: return "dorm";
    case NetworkKind::Isp: return "isp";
    case NetworkKind::Vpn: return "vpn";
    case NetworkKind::Cloud: return "cloud";
  }
  return "institutional";
}

std::optional<NetworkKind> network_kind_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(NetworkKind::Cloud); ++i) {
    auto k = static_cast<NetworkKind>(i);
    if (network_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view scheme_name(Scheme s) {
  return s == Scheme::Https ? "https" : "http";
}

void FetchOutcome::validate() const {
  if (url.host.empty()) throw ContractError("target host is empty");
  if (run_index < 0) throw ContractError("run_index must be >= 0");
  if (http_status.has_value() != status_class_is_http(status_class)) {
    throw ContractError("http_status presence must match the status class");
  }
  if (body_digest.has_value() != body_size.has_value()) {
    throw ContractError("body_digest and body_size must be set together");
  }
  if (blockpage.has_value() && !body_digest.has_value()) {
    throw ContractError("blockpage requires a received body");
  }
}

std::string_view manual_result_name(ManualResult r) {
  switch (r) {
    case ManualResult::AvailableClean: return "AvailableClean";
    case ManualResult::AvailableWithCaptcha: return "AvailableWithCaptcha";
    case ManualResult::AvailableWithDelay: return "AvailableWithDelay";
    case ManualResult::NotAvailable: return "NotAvailable";
  }
  return "NotAvailable";
}

std::optional<ManualResult> manual_result_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ManualResult::NotAvailable); ++i) {
    auto r = static_cast<ManualResult>(i);
    if (manual_result_name(r) == name) return r;
  }
  return std::nullopt;
}

}  // namespace blockscope
