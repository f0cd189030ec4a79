#include "blockscope/trace.hpp"

#include <functional>

namespace blockscope {

std::string_view trace_protocol_name(TraceProtocol p) {
  switch (p) {
    case TraceProtocol::Icmp: return "icmp";
    case TraceProtocol::Tcp: return "tcp";
    case TraceProtocol::Http: return "http";
  }
  return "icmp";
}

std::string_view hop_kind_name(HopKind k) {
  switch (k) {
    case HopKind::TtlExceeded: return "TtlExceeded";
    case HopKind::EchoReply: return "EchoReply";
    case HopKind::SynAck: return "SynAck";
    case HopKind::Rst: return "Rst";
    case HopKind::HttpResponse: return "HttpResponse";
    case HopKind::NoReply: return "NoReply";
  }
  return "NoReply";
}

std::string_view verdict_kind_name(VerdictKind k) {
  switch (k) {
    case VerdictKind::ServerSide: return "ServerSide";
    case VerdictKind::MiddleboxSuspected: return "MiddleboxSuspected";
    case VerdictKind::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

std::optional<VerdictKind> verdict_kind_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(VerdictKind::Inconclusive); ++i) {
    auto k = static_cast<VerdictKind>(i);
    if (verdict_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string_view verdict_reason_name(VerdictReason r) {
  switch (r) {
    case VerdictReason::EqualPaths: return "EqualPaths";
    case VerdictReason::ShortPath: return "ShortPath";
    case VerdictReason::SpoofedResponse: return "SpoofedResponse";
    case VerdictReason::NoTcpResponse: return "NoTcpResponse";
    case VerdictReason::NoHttpResponse: return "NoHttpResponse";
    case VerdictReason::NoIcmpBaseline: return "NoIcmpBaseline";
  }
  return "NoIcmpBaseline";
}

std::optional<VerdictReason> verdict_reason_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(VerdictReason::NoIcmpBaseline); ++i) {
    auto r = static_cast<VerdictReason>(i);
    if (verdict_reason_name(r) == name) return r;
  }
  return std::nullopt;
}

bool TraceRun::has_any_reply() const {
  for (const auto& h : hops) {
    if (h.kind != HopKind::NoReply) return true;
  }
  return false;
}

bool TraceRun::has_reply_kind(HopKind k) const {
  for (const auto& h : hops) {
    if (h.kind == k) return true;
  }
  return false;
}

const HopRecord* TraceRun::hop_at(int ttl) const {
  for (const auto& h : hops) {
    if (h.ttl == ttl) return &h;
  }
  return nullptr;
}

namespace {

// Shared TTL sweep. `terminal` decides whether a reply ends the sweep.
TraceRun run_trace(TraceProtocol protocol, ProbeRole role, const std::string& destination,
                   const ProbeConfig& config, ProbeTransport& transport,
                   std::uint16_t port, const std::string& http_host,
                   const std::string& http_path,
                   const std::function<bool(const ProbeReply&)>& terminal) {
  config.validate();

  TraceRun run;
  run.protocol = protocol;
  run.destination = destination;

  std::uint16_t ident =
      static_cast<std::uint16_t>(std::hash<std::string>{}(destination) & 0xffff);
  std::uint16_t sequence = 0;

  for (int ttl = 1; ttl <= config.max_ttl; ++ttl) {
    std::optional<ProbeReply> reply;
    for (int attempt = 0; attempt < config.per_ttl_probe_count && !reply; ++attempt) {
      ProbeSpec spec;
      spec.protocol = protocol;
      spec.role = role;
      spec.ttl = ttl;
      spec.destination = destination;
      spec.port = port;
      spec.ident = ident;
      spec.sequence = ++sequence;
      spec.http_host = http_host;
      spec.http_path = http_path;
      spec.user_agent = config.user_agent;
      reply = transport.probe(spec);
    }

    HopRecord hop;
    hop.ttl = ttl;
    if (reply) {
      hop.kind = reply->kind;
      hop.responder = reply->responder;
      hop.rtt_ms = reply->rtt_ms;
    }
    run.hops.push_back(hop);
    if (reply && terminal(*reply)) break;
  }

  // Completion: some hop's reply of the protocol's terminal kind came from
  // the destination itself. Otherwise the last replying hop underapproximates
  // the true path length.
  int first_dest_hop = 0;
  int last_reply_hop = 0;
  for (const auto& h : run.hops) {
    if (h.kind == HopKind::NoReply) continue;
    last_reply_hop = h.ttl;
    bool terminal_kind = false;
    switch (protocol) {
      case TraceProtocol::Icmp: terminal_kind = h.kind == HopKind::EchoReply; break;
      case TraceProtocol::Tcp:
        terminal_kind = h.kind == HopKind::SynAck || h.kind == HopKind::Rst;
        break;
      case TraceProtocol::Http: terminal_kind = h.kind == HopKind::HttpResponse; break;
    }
    if (terminal_kind && h.responder == destination && first_dest_hop == 0) {
      first_dest_hop = h.ttl;
    }
  }
  run.complete = first_dest_hop != 0;
  run.path_length = run.complete ? first_dest_hop : last_reply_hop;
  run.underapproximate = !run.complete;
  return run;
}

}  // namespace

TraceRun icmp_traceroute(const std::string& destination, const ProbeConfig& config,
                         ProbeTransport& transport) {
  return run_trace(TraceProtocol::Icmp, ProbeRole::EchoRequest, destination, config,
                   transport, 0, "", "", [&](const ProbeReply& r) {
                     return r.kind == HopKind::EchoReply && r.responder == destination;
                   });
}

TraceRun tcp_traceroute(const std::string& destination, std::uint16_t port,
                        const ProbeConfig& config, ProbeTransport& transport) {
  return run_trace(TraceProtocol::Tcp, ProbeRole::Syn, destination, config, transport,
                   port, "", "", [](const ProbeReply& r) {
                     return r.kind == HopKind::SynAck || r.kind == HopKind::Rst;
                   });
}

TraceRun http_traceroute(const std::string& destination, const std::string& host,
                         const std::string& path, const ProbeConfig& config,
                         ProbeTransport& transport) {
  if (!transport.tcp_handshake(destination, 80)) {
    throw ProbeError("http traceroute: TCP handshake with " + destination + " failed");
  }
  return run_trace(TraceProtocol::Http, ProbeRole::HttpGet, destination, config,
                   transport, 80, host, path, [](const ProbeReply& r) {
                     return r.kind == HopKind::HttpResponse;
                   });
}

BlockVerdict run_differential(const std::string& destination, const std::string& host,
                              const std::string& path, const ProbeConfig& config,
                              ProbeTransport& transport) {
  TraceRun icmp = icmp_traceroute(destination, config, transport);
  TraceRun tcp = tcp_traceroute(destination, 80, config, transport);
  BlockVerdict verdict = detect_middlebox(icmp, tcp, std::nullopt, config);
  if (verdict.kind == VerdictKind::Inconclusive &&
      verdict.reason == VerdictReason::NoHttpResponse) {
    // TCP cleared both heuristics; escalate to the stateful HTTP run.
    std::optional<TraceRun> http;
    try {
      http = http_traceroute(destination, host, path, config, transport);
    } catch (const ProbeError&) {
      // handshake failed; the HTTP run stays absent
    }
    verdict = detect_middlebox(icmp, tcp, http, config);
  }
  return verdict;
}

bool detect_spoof(const TraceRun& icmp_run, const TraceRun& other_run) {
  for (const auto& other_hop : other_run.hops) {
    if (!is_transport_reply(other_hop.kind) || !other_hop.responder) continue;
    const HopRecord* icmp_hop = icmp_run.hop_at(other_hop.ttl);
    if (!icmp_hop || !icmp_hop->responder) continue;
    if (*icmp_hop->responder != *other_hop.responder) return true;
  }
  return false;
}

BlockVerdict detect_middlebox(const TraceRun& icmp, const TraceRun& tcp,
                              const std::optional<TraceRun>& http,
                              const ProbeConfig& config) {
  BlockVerdict verdict;
  verdict.icmp = icmp;
  verdict.tcp = tcp;
  verdict.http = http;

  auto conclude = [&](VerdictKind kind, VerdictReason reason) {
    verdict.kind = kind;
    verdict.reason = reason;
    return verdict;
  };

  // (1) no ICMP baseline at all
  if (!icmp.has_any_reply()) {
    return conclude(VerdictKind::Inconclusive, VerdictReason::NoIcmpBaseline);
  }
  // (2) no TCP response of any kind
  if (!tcp.has_reply_kind(HopKind::SynAck) && !tcp.has_reply_kind(HopKind::Rst)) {
    return conclude(VerdictKind::Inconclusive, VerdictReason::NoTcpResponse);
  }
  // (3) TCP response path shorter than the ICMP baseline by more than the
  //     threshold ("> 3 hops", never >=)
  if (icmp.path_length - tcp.path_length > config.hop_delta_threshold) {
    return conclude(VerdictKind::MiddleboxSuspected, VerdictReason::ShortPath);
  }
  // (4) spoofed TCP response
  if (detect_spoof(icmp, tcp)) {
    return conclude(VerdictKind::MiddleboxSuspected, VerdictReason::SpoofedResponse);
  }
  // (5) escalate to the stateful HTTP run
  if (!http || !http->has_reply_kind(HopKind::HttpResponse)) {
    return conclude(VerdictKind::Inconclusive, VerdictReason::NoHttpResponse);
  }
  if (icmp.path_length - http->path_length > config.hop_delta_threshold) {
    return conclude(VerdictKind::MiddleboxSuspected, VerdictReason::ShortPath);
  }
  if (detect_spoof(icmp, *http)) {
    return conclude(VerdictKind::MiddleboxSuspected, VerdictReason::SpoofedResponse);
  }
  // (6) every check passed
  return conclude(VerdictKind::ServerSide, VerdictReason::EqualPaths);
}

}  // namespace blockscope
