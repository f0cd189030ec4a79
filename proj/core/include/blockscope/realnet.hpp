#pragma once

#include <string>

#include "blockscope/fetcher.hpp"
#include "blockscope/trace.hpp"

namespace blockscope {

// getaddrinfo-backed resolver (IPv4).
class SystemResolver : public Resolver {
 public:
  std::optional<std::vector<std::string>> resolve(const std::string& host) override;
};

// Live HTTP(S) transport. One connection per round trip; redirects are the
// fetcher's job. DNS is checked through SystemResolver first so resolution
// failures classify as DnsError rather than a generic connection error.
class RealHttpTransport : public HttpTransport {
 public:
  HttpResult roundtrip(const HttpRequestSpec& request) override;
};

// Live probe transport. ICMP echo uses a raw (or datagram) ICMP socket; TCP
// and stateful HTTP probes use connect() with IP_TTL and read ICMP
// time-exceeded errors from the socket error queue, so they need no raw
// socket. Requires CAP_NET_RAW or an allowed ping group range for the ICMP
// part; probe_capability_error() reports the actionable startup error.
class RealProbeTransport : public ProbeTransport {
 public:
  explicit RealProbeTransport(std::chrono::milliseconds per_hop_timeout =
                                  std::chrono::milliseconds(2000));
  std::optional<ProbeReply> probe(const ProbeSpec& spec) override;
  bool tcp_handshake(const std::string& destination, std::uint16_t port) override;

 private:
  std::chrono::milliseconds per_hop_timeout_;
};

// Empty when this process can open the sockets real traceroutes need;
// otherwise a human-readable explanation (missing privileges and how to get
// them).
std::string probe_capability_error();

}  // namespace blockscope
