#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blockscope/fetcher.hpp"
#include "blockscope/trace.hpp"
#include "blockscope/types.hpp"

namespace blockscope::sim {

enum class ServerBehavior {
  Serve200,
  Serve403,
  ServeBlockpage,  // 200 status, body from blockpage_body
  DropSyn,
  RstSyn,
  AcceptThenSilent,
};
std::string_view server_behavior_name(ServerBehavior b);
std::optional<ServerBehavior> server_behavior_from_name(std::string_view name);

enum class MiddleboxAction { Rst, SynAckThenBlockpage, Drop };
std::string_view middlebox_action_name(MiddleboxAction a);
std::optional<MiddleboxAction> middlebox_action_from_name(std::string_view name);

// An on-path interceptor sitting at hop `position`. It never touches ICMP
// echo traffic; whether a TTL expiring at its hop earns a TtlExceeded is
// governed by reveals_own_icmp.
struct MiddleboxSpec {
  int position = 1;  // 1-based hop index, < destination depth
  std::set<TraceProtocol> intercepts;  // non-empty subset of {Tcp, Http}
  bool spoof_destination_address = false;
  bool reveals_own_icmp = false;
  MiddleboxAction action = MiddleboxAction::SynAckThenBlockpage;

  bool intercepts_protocol(TraceProtocol p) const { return intercepts.count(p) > 0; }
};

// A synthetic path. hop_addresses[i] is the device at hop i+1; the last entry
// is the destination server. Addresses come from documentation prefixes and
// never touch a real network.
struct SimTopology {
  std::vector<std::string> hop_addresses;
  ServerBehavior server_behavior = ServerBehavior::Serve200;
  std::string blockpage_body;
  std::optional<MiddleboxSpec> middlebox;
  std::vector<bool> icmp_responsive;  // per hop; empty = all responsive

  int depth() const { return static_cast<int>(hop_addresses.size()); }
  const std::string& destination() const { return hop_addresses.back(); }
  bool hop_answers_icmp(int hop_index) const;  // 1-based, middlebox-aware

  // Throws ContractError on duplicate addresses, bad middlebox position, or
  // an icmp_responsive list of the wrong length.
  void validate() const;
};

// Deterministic single-packet model. TTL expiring at a responsive hop yields
// TtlExceeded from that hop's address; an intercepting middlebox answers with
// its action (source address spoofed to the destination's when configured);
// the destination answers per server_behavior. nullopt = silence.
std::optional<ProbeReply> simulate_probe(const SimTopology& topology, const ProbeSpec& probe);

// Whole-connection view of the same topology so the fetcher can run
// end-to-end against it.
HttpResult serve_fetch(const SimTopology& topology, const HttpRequestSpec& request);

// Whether a client handshake with the destination completes: only a SYN-ACK
// claiming the destination's address matches the connection's four-tuple.
bool simulate_handshake(const SimTopology& topology);

// Yields the verification cross-product: destination depth 1..max_depth,
// middlebox absent or at position 1..depth-1 with every combination of
// spoof flag, ICMP-reveal flag, and intercept set {Tcp}, {Http}, {Tcp,Http}.
// Servers answer 403; every hop answers ICMP. Total count is
// max_depth + 12 * (max_depth choose 2); see enumerate_count.
void enumerate_topologies(int max_depth, const std::function<void(const SimTopology&)>& yield);
std::size_t enumerate_count(int max_depth);

// JSON (de)serialization for regression fixtures.
std::string topology_to_json(const SimTopology& topology);
SimTopology topology_from_json(std::string_view json_text);

// ---- campaign fixture -------------------------------------------------------

// Maps hostnames to topologies, optionally per vantage: the first view whose
// vantage list contains the vantage id (or "*") wins. Hosts absent from the
// map do not resolve.
struct SimFixture {
  struct View {
    std::vector<std::string> vantages;  // ids, or "*" for any
    SimTopology topology;
  };

  std::map<std::string, std::vector<View>> targets;  // host -> views
  std::int64_t base_ts_ms = 1526601600000;  // 2018-05-18T00:00:00Z
  int fetch_delay_ms = 0;    // real sleep per simulated fetch (test knob)
  double loss_rate = 0.0;    // probe-reply loss for retry testing
  std::uint64_t loss_seed = 0;

  static SimFixture load(const std::filesystem::path& file);
  static SimFixture from_json(std::string_view json_text, const std::string& name);

  const SimTopology* topology_for(const std::string& host, const std::string& vantage_id) const;
};

// One vantage's view of the fixture network. Implements the resolver, HTTP
// transport and probe transport interfaces; pure apart from the optional
// fetch delay, so concurrent use needs no coordination. Reply loss is decided
// by a stateless hash of (seed, destination, ttl, sequence), keeping runs
// reproducible regardless of probe interleaving.
class SimNet : public HttpTransport, public Resolver, public ProbeTransport {
 public:
  SimNet(SimFixture fixture, std::string vantage_id);

  std::optional<std::vector<std::string>> resolve(const std::string& host) override;
  HttpResult roundtrip(const HttpRequestSpec& request) override;
  std::optional<ProbeReply> probe(const ProbeSpec& spec) override;
  bool tcp_handshake(const std::string& destination, std::uint16_t port) override;

  std::int64_t base_ts_ms() const { return fixture_.base_ts_ms; }
  const SimTopology* topology_by_address(const std::string& address) const;

 private:
  bool lose_reply(const ProbeSpec& spec) const;

  SimFixture fixture_;
  std::string vantage_id_;
  std::map<std::string, const SimTopology*> by_address_;
};

}  // namespace blockscope::sim
