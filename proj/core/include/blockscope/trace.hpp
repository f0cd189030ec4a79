#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "blockscope/types.hpp"

namespace blockscope {

enum class TraceProtocol { Icmp, Tcp, Http };
std::string_view trace_protocol_name(TraceProtocol p);

enum class HopKind { TtlExceeded, EchoReply, SynAck, Rst, HttpResponse, NoReply };
std::string_view hop_kind_name(HopKind k);

constexpr bool is_transport_reply(HopKind k) {
  return k == HopKind::SynAck || k == HopKind::Rst || k == HopKind::HttpResponse;
}

struct HopRecord {
  int ttl = 0;
  std::optional<std::string> responder;  // present iff kind != NoReply
  HopKind kind = HopKind::NoReply;
  std::optional<double> rtt_ms;

  bool operator==(const HopRecord&) const = default;
};

// One protocol's traceroute toward a destination address.
struct TraceRun {
  TraceProtocol protocol = TraceProtocol::Icmp;
  std::string destination;
  std::vector<HopRecord> hops;
  bool complete = false;       // some hop's responder equals the destination
  int path_length = 0;         // first destination hop when complete, else last replying hop
  bool underapproximate = false;  // == !complete

  bool has_any_reply() const;
  bool has_reply_kind(HopKind k) const;
  const HopRecord* hop_at(int ttl) const;
};

enum class VerdictKind { ServerSide, MiddleboxSuspected, Inconclusive };
std::string_view verdict_kind_name(VerdictKind k);
std::optional<VerdictKind> verdict_kind_from_name(std::string_view name);

enum class VerdictReason {
  EqualPaths,
  ShortPath,
  SpoofedResponse,
  NoTcpResponse,
  NoHttpResponse,
  NoIcmpBaseline,
};
std::string_view verdict_reason_name(VerdictReason r);
std::optional<VerdictReason> verdict_reason_from_name(std::string_view name);

// Final determination for one URL from one vantage, with the traces as evidence.
struct BlockVerdict {
  std::string url;
  std::string vantage_id;
  VerdictKind kind = VerdictKind::Inconclusive;
  VerdictReason reason = VerdictReason::NoIcmpBaseline;
  std::optional<TraceRun> icmp;
  std::optional<TraceRun> tcp;
  std::optional<TraceRun> http;
};

// ---- probe transport -------------------------------------------------------

enum class ProbeRole { EchoRequest, Syn, HttpGet };

// One TTL-limited probe. ident/sequence pair replies to probes; the HTTP GET
// carries the same Host header and user-agent the fetcher used, so middleboxes
// keying on headers behave identically across fetch and trace.
struct ProbeSpec {
  TraceProtocol protocol = TraceProtocol::Icmp;
  ProbeRole role = ProbeRole::EchoRequest;
  int ttl = 1;
  std::string destination;
  std::uint16_t port = 80;
  std::uint16_t ident = 0;
  std::uint16_t sequence = 0;
  std::string http_host;
  std::string http_path = "/";
  std::string user_agent;
};

struct ProbeReply {
  HopKind kind = HopKind::NoReply;
  std::string responder;
  double rtt_ms = 0.0;
};

// Raised for transport-level trouble (socket setup, handshake failure) as
// opposed to an unanswered probe, which is a plain no-reply.
class ProbeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProbeTransport {
 public:
  virtual ~ProbeTransport() = default;
  // Sends one probe and waits up to the per-hop timeout. nullopt = no reply.
  virtual std::optional<ProbeReply> probe(const ProbeSpec& spec) = 0;
  // Full TCP handshake used by the stateful HTTP traceroute.
  virtual bool tcp_handshake(const std::string& destination, std::uint16_t port) = 0;
};

// ---- the three traceroutes -------------------------------------------------

// Echo probes with TTL 1..max_ttl (per_ttl_probe_count attempts each, first
// reply wins); stops at the first EchoReply from the destination.
TraceRun icmp_traceroute(const std::string& destination, const ProbeConfig& config,
                         ProbeTransport& transport);

// SYN probes; completion is the first hop answering with any TCP packet
// (SynAck or Rst). Intermediate routers populate earlier hops via TtlExceeded.
TraceRun tcp_traceroute(const std::string& destination, std::uint16_t port,
                        const ProbeConfig& config, ProbeTransport& transport);

// Stateful: requires a successful handshake first (ProbeError otherwise),
// then TTL-limits the GET-carrying segment; completion is the first hop
// returning an HTTP response.
TraceRun http_traceroute(const std::string& destination, const std::string& host,
                         const std::string& path, const ProbeConfig& config,
                         ProbeTransport& transport);

// True iff some TTL shows a transport/application reply in `other_run` whose
// source differs from the ICMP run's responder at the same TTL.
bool detect_spoof(const TraceRun& icmp_run, const TraceRun& other_run);

// One target's full check: ICMP baseline, TCP traceroute, and the stateful
// HTTP escalation only when the TCP evidence clears both heuristics (the
// paper's order). A failed HTTP handshake leaves the HTTP run absent and the
// verdict falls back to the TCP evidence.
BlockVerdict run_differential(const std::string& destination, const std::string& host,
                              const std::string& path, const ProbeConfig& config,
                              ProbeTransport& transport);

// The decision procedure, evaluated in fixed order:
//   1. ICMP run has zero replies            -> Inconclusive / NoIcmpBaseline
//   2. TCP run has no TCP-kind reply        -> Inconclusive / NoTcpResponse
//   3. icmp.path_length - tcp.path_length > threshold -> MiddleboxSuspected / ShortPath
//   4. spoofed TCP response                 -> MiddleboxSuspected / SpoofedResponse
//   5. HTTP absent or unanswered            -> Inconclusive / NoHttpResponse
//      else rules 3-4 against the HTTP run  -> MiddleboxSuspected
//   6. all checks pass                      -> ServerSide / EqualPaths
BlockVerdict detect_middlebox(const TraceRun& icmp, const TraceRun& tcp,
                              const std::optional<TraceRun>& http,
                              const ProbeConfig& config);

}  // namespace blockscope
