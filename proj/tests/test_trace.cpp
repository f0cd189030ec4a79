#include <doctest.h>

#include "blockscope/netsim.hpp"
#include "blockscope/trace.hpp"
#include "oracles.hpp"

using namespace blockscope;

namespace {

// Probe transport over one fixed topology, for engine-level tests.
struct TopologyTransport : ProbeTransport {
  sim::SimTopology topology;

  explicit TopologyTransport(sim::SimTopology t) : topology(std::move(t)) {}
  std::optional<ProbeReply> probe(const ProbeSpec& spec) override {
    return sim::simulate_probe(topology, spec);
  }
  bool tcp_handshake(const std::string&, std::uint16_t) override {
    return sim::simulate_handshake(topology);
  }
};

sim::SimTopology linear_topology(int depth,
                                 sim::ServerBehavior behavior = sim::ServerBehavior::Serve403) {
  sim::SimTopology t;
  for (int i = 1; i <= depth; ++i) t.hop_addresses.push_back("10.9.0." + std::to_string(i));
  t.server_behavior = behavior;
  return t;
}

// Hand-built run whose completeness fields follow the type's invariants.
TraceRun make_run(TraceProtocol protocol, const std::string& destination,
                  const std::vector<HopRecord>& hops) {
  TraceRun run;
  run.protocol = protocol;
  run.destination = destination;
  run.hops = hops;
  int first_dest = 0, last_reply = 0;
  for (const auto& h : hops) {
    if (h.kind == HopKind::NoReply) continue;
    last_reply = h.ttl;
    bool terminal = protocol == TraceProtocol::Icmp   ? h.kind == HopKind::EchoReply
                    : protocol == TraceProtocol::Tcp ? is_transport_reply(h.kind) &&
                                                           h.kind != HopKind::HttpResponse
                                                     : h.kind == HopKind::HttpResponse;
    if (terminal && h.responder == destination && first_dest == 0) first_dest = h.ttl;
  }
  run.complete = first_dest != 0;
  run.path_length = run.complete ? first_dest : last_reply;
  run.underapproximate = !run.complete;
  return run;
}

HopRecord hop(int ttl, HopKind kind, std::string responder) {
  HopRecord h;
  h.ttl = ttl;
  h.kind = kind;
  h.responder = std::move(responder);
  h.rtt_ms = ttl * 1.0;
  return h;
}

HopRecord silent(int ttl) {
  HopRecord h;
  h.ttl = ttl;
  h.kind = HopKind::NoReply;
  return h;
}

// A straight path of TtlExceeded hops ending at the destination.
TraceRun clean_run(TraceProtocol protocol, int depth, HopKind final_kind,
                   const std::string& prefix = "10.9.0.") {
  std::vector<HopRecord> hops;
  for (int i = 1; i < depth; ++i) {
    hops.push_back(hop(i, HopKind::TtlExceeded, prefix + std::to_string(i)));
  }
  hops.push_back(hop(depth, final_kind, prefix + std::to_string(depth)));
  return make_run(protocol, prefix + std::to_string(depth), hops);
}

}  // namespace

TEST_CASE("icmp traceroute completes at the destination depth") {
  ProbeConfig config;
  TopologyTransport transport(linear_topology(8));
  auto run = icmp_traceroute(transport.topology.destination(), config, transport);
  CHECK(run.complete);
  CHECK(run.path_length == 8);
  CHECK(!run.underapproximate);
  CHECK(run.hops.size() == 8);  // stops at the first echo reply
  CHECK(run.hops.back().kind == HopKind::EchoReply);
}

TEST_CASE("unresponsive tail underapproximates the icmp path") {
  ProbeConfig config;
  config.max_ttl = 15;
  auto t = linear_topology(12);
  t.icmp_responsive.assign(12, true);
  for (int i = 8; i < 12; ++i) t.icmp_responsive[i] = false;  // hops 9+ never reply
  TopologyTransport transport(t);
  auto run = icmp_traceroute(t.destination(), config, transport);
  CHECK(!run.complete);
  CHECK(run.path_length == 8);
  CHECK(run.underapproximate);
  CHECK(run.hops.size() == 15);  // swept to max_ttl
}

TEST_CASE("destination at hop 1") {
  ProbeConfig config;
  TopologyTransport transport(linear_topology(1));
  auto run = icmp_traceroute(transport.topology.destination(), config, transport);
  CHECK(run.complete);
  CHECK(run.path_length == 1);
}

TEST_CASE("tcp traceroute stops at the first TCP packet") {
  ProbeConfig config;

  SUBCASE("clean path: server answers at its depth") {
    TopologyTransport transport(linear_topology(10));
    auto run = tcp_traceroute(transport.topology.destination(), 80, config, transport);
    CHECK(run.complete);
    CHECK(run.path_length == 10);
    CHECK(run.hops.back().kind == HopKind::SynAck);
  }
  SUBCASE("spoofing middlebox at hop 5 answers first") {
    auto t = linear_topology(12);
    sim::MiddleboxSpec mb;
    mb.position = 5;
    mb.intercepts = {TraceProtocol::Tcp, TraceProtocol::Http};
    mb.spoof_destination_address = true;
    t.middlebox = mb;
    TopologyTransport transport(t);
    auto run = tcp_traceroute(t.destination(), 80, config, transport);
    CHECK(run.hops.size() == 5);
    CHECK(run.hops.back().kind == HopKind::SynAck);
    CHECK(*run.hops.back().responder == t.destination());  // claims the server
    CHECK(run.path_length == 5);
  }
  SUBCASE("server drops every SYN: routers answer, never TCP") {
    config.max_ttl = 13;
    auto t = linear_topology(13, sim::ServerBehavior::DropSyn);
    TopologyTransport transport(t);
    auto run = tcp_traceroute(t.destination(), 80, config, transport);
    CHECK(!run.complete);
    CHECK(!run.has_reply_kind(HopKind::SynAck));
    CHECK(!run.has_reply_kind(HopKind::Rst));
    CHECK(run.path_length == 12);  // last responding router
  }
}

TEST_CASE("http traceroute is stateful") {
  ProbeConfig config;

  SUBCASE("clean path answers the GET at the server") {
    TopologyTransport transport(linear_topology(10));
    auto run = http_traceroute(transport.topology.destination(), "h.test", "/", config,
                               transport);
    CHECK(run.complete);
    CHECK(run.path_length == 10);
  }
  SUBCASE("an HTTP-injecting middlebox answers at hop 4") {
    auto t = linear_topology(9);
    sim::MiddleboxSpec mb;
    mb.position = 4;
    mb.intercepts = {TraceProtocol::Http};
    mb.spoof_destination_address = true;
    t.middlebox = mb;
    TopologyTransport transport(t);
    auto run = http_traceroute(t.destination(), "h.test", "/", config, transport);
    CHECK(run.hops.back().kind == HopKind::HttpResponse);
    CHECK(run.path_length == 4);
  }
  SUBCASE("handshake then silence leaves the run incomplete") {
    config.max_ttl = 10;
    auto t = linear_topology(7, sim::ServerBehavior::AcceptThenSilent);
    TopologyTransport transport(t);
    auto run = http_traceroute(t.destination(), "h.test", "/", config, transport);
    CHECK(!run.complete);
    CHECK(!run.has_reply_kind(HopKind::HttpResponse));
  }
  SUBCASE("a refused handshake raises a probe error") {
    auto t = linear_topology(7, sim::ServerBehavior::RstSyn);
    TopologyTransport transport(t);
    CHECK_THROWS_AS(http_traceroute(t.destination(), "h.test", "/", config, transport),
                    ProbeError);
  }
}

TEST_CASE("detect_spoof compares responders per TTL") {
  auto icmp = clean_run(TraceProtocol::Icmp, 10, HopKind::EchoReply);

  SUBCASE("differing responder at one hop is a spoof") {
    std::vector<HopRecord> hops;
    for (int i = 1; i < 5; ++i) {
      hops.push_back(hop(i, HopKind::TtlExceeded, "10.9.0." + std::to_string(i)));
    }
    hops.push_back(hop(5, HopKind::SynAck, "10.9.0.9"));  // icmp saw 10.9.0.5 here
    auto tcp = make_run(TraceProtocol::Tcp, "10.9.0.10", hops);
    CHECK(detect_spoof(icmp, tcp));
  }
  SUBCASE("identical responders at every TTL is not") {
    auto tcp = clean_run(TraceProtocol::Tcp, 10, HopKind::SynAck);
    CHECK(!detect_spoof(icmp, tcp));
  }
  SUBCASE("a reply-free run is vacuously clean") {
    auto tcp = make_run(TraceProtocol::Tcp, "10.9.0.10",
                        {silent(1), silent(2), silent(3)});
    CHECK(!detect_spoof(icmp, tcp));
  }
  SUBCASE("only transport replies count as spoof evidence") {
    // Divergent TtlExceeded responders happen on real paths (load balancing);
    // they must not trip the spoof rule.
    std::vector<HopRecord> hops = {hop(1, HopKind::TtlExceeded, "172.16.0.99")};
    auto tcp = make_run(TraceProtocol::Tcp, "10.9.0.10", hops);
    CHECK(!detect_spoof(icmp, tcp));
  }
}

TEST_CASE("detect_middlebox follows the documented rule order") {
  ProbeConfig config;
  auto icmp10 = clean_run(TraceProtocol::Icmp, 10, HopKind::EchoReply);
  auto tcp10 = clean_run(TraceProtocol::Tcp, 10, HopKind::SynAck);
  auto http10 = clean_run(TraceProtocol::Http, 10, HopKind::HttpResponse);

  SUBCASE("equal paths with no spoof end server-side") {
    auto v = detect_middlebox(icmp10, tcp10, http10, config);
    CHECK(v.kind == VerdictKind::ServerSide);
    CHECK(v.reason == VerdictReason::EqualPaths);
  }
  SUBCASE("no icmp baseline wins over no tcp response") {
    auto icmp_empty = make_run(TraceProtocol::Icmp, "10.9.0.10", {silent(1), silent(2)});
    auto tcp_empty = make_run(TraceProtocol::Tcp, "10.9.0.10", {silent(1), silent(2)});
    auto v = detect_middlebox(icmp_empty, tcp_empty, std::nullopt, config);
    CHECK(v.kind == VerdictKind::Inconclusive);
    CHECK(v.reason == VerdictReason::NoIcmpBaseline);
  }
  SUBCASE("tcp with only router replies is inconclusive") {
    std::vector<HopRecord> hops;
    for (int i = 1; i <= 9; ++i) {
      hops.push_back(hop(i, HopKind::TtlExceeded, "10.9.0." + std::to_string(i)));
    }
    auto tcp = make_run(TraceProtocol::Tcp, "10.9.0.10", hops);
    auto v = detect_middlebox(icmp10, tcp, http10, config);
    CHECK(v.kind == VerdictKind::Inconclusive);
    CHECK(v.reason == VerdictReason::NoTcpResponse);
  }
  SUBCASE("a reset also counts as the TCP response") {
    auto tcp = clean_run(TraceProtocol::Tcp, 10, HopKind::Rst);
    auto v = detect_middlebox(icmp10, tcp, http10, config);
    CHECK(v.kind == VerdictKind::ServerSide);
  }
  SUBCASE("missing or unanswered http stays inconclusive") {
    auto v = detect_middlebox(icmp10, tcp10, std::nullopt, config);
    CHECK(v.kind == VerdictKind::Inconclusive);
    CHECK(v.reason == VerdictReason::NoHttpResponse);
  }
  SUBCASE("natural wobble: icmp 12, tcp 10, http 10, no spoof") {
    auto icmp12 = clean_run(TraceProtocol::Icmp, 12, HopKind::EchoReply);
    // TCP/HTTP replies arrive two hops earlier than the echo depth, from the
    // same device the icmp run saw there.
    auto tcp = make_run(TraceProtocol::Tcp, "10.9.0.12",
                        clean_run(TraceProtocol::Tcp, 10, HopKind::SynAck).hops);
    auto http = make_run(TraceProtocol::Http, "10.9.0.12",
                         clean_run(TraceProtocol::Http, 10, HopKind::HttpResponse).hops);
    CHECK(icmp12.path_length - tcp.path_length == 2);
    auto v = detect_middlebox(icmp12, tcp, http, config);
    CHECK(v.kind == VerdictKind::ServerSide);
    CHECK(v.reason == VerdictReason::EqualPaths);
  }
}

TEST_CASE("the hop-delta threshold is exact: 3 passes, 4 flags") {
  ProbeConfig config;
  REQUIRE(config.hop_delta_threshold == 3);

  auto icmp = clean_run(TraceProtocol::Icmp, 12, HopKind::EchoReply);
  auto short_tcp = [&](int length) {
    std::vector<HopRecord> hops;
    for (int i = 1; i < length; ++i) {
      hops.push_back(hop(i, HopKind::TtlExceeded, "10.9.0." + std::to_string(i)));
    }
    hops.push_back(hop(length, HopKind::SynAck, "10.9.0.12"));  // claims the dest
    return make_run(TraceProtocol::Tcp, "10.9.0.12", hops);
  };

  auto at_threshold = detect_middlebox(icmp, short_tcp(9), std::nullopt, config);
  CHECK(at_threshold.reason != VerdictReason::ShortPath);  // delta == 3 continues

  auto beyond = detect_middlebox(icmp, short_tcp(8), std::nullopt, config);
  CHECK(beyond.kind == VerdictKind::MiddleboxSuspected);  // delta == 4 flags
  CHECK(beyond.reason == VerdictReason::ShortPath);
}

TEST_CASE("differential across simulated topologies matches the rule oracle") {
  ProbeConfig config;
  config.per_ttl_probe_count = 1;
  sim::enumerate_topologies(12, [&](const sim::SimTopology& t) {
    TopologyTransport transport(t);
    auto verdict = run_differential(t.destination(), "h.test", "/", config, transport);
    auto expected = oracles::expected_enumeration_verdict(t, config.hop_delta_threshold);
    CHECK(verdict.kind == expected.kind);
    CHECK(verdict.reason == expected.reason);
  });
}

TEST_CASE("truncating the icmp baseline never creates a middlebox flag") {
  ProbeConfig config;
  config.per_ttl_probe_count = 1;
  config.max_ttl = 12;

  sim::enumerate_topologies(8, [&](const sim::SimTopology& t) {
    if (t.depth() < 2) return;
    TopologyTransport full(t);
    auto full_verdict =
        run_differential(t.destination(), "h.test", "/", config, full).kind;

    for (int cut : {1, t.depth() / 2, t.depth()}) {
      if (cut < 1) continue;
      sim::SimTopology truncated = t;
      truncated.icmp_responsive.assign(truncated.hop_addresses.size(), true);
      for (int i = cut - 1; i < truncated.depth(); ++i) {
        truncated.icmp_responsive[static_cast<std::size_t>(i)] = false;
      }
      if (truncated.middlebox && truncated.middlebox->position >= cut) {
        truncated.middlebox->reveals_own_icmp = false;
      }
      TopologyTransport transport(truncated);
      auto verdict =
          run_differential(truncated.destination(), "h.test", "/", config, transport);
      if (verdict.kind == VerdictKind::MiddleboxSuspected) {
        CHECK(full_verdict == VerdictKind::MiddleboxSuspected);
      }
    }
  });
}

TEST_CASE("identical transports yield identical verdicts") {
  ProbeConfig config;
  auto t = linear_topology(9);
  sim::MiddleboxSpec mb;
  mb.position = 4;
  mb.intercepts = {TraceProtocol::Tcp};
  mb.spoof_destination_address = true;
  mb.reveals_own_icmp = true;
  t.middlebox = mb;
  TopologyTransport transport(t);

  auto a = run_differential(t.destination(), "h.test", "/", config, transport);
  auto b = run_differential(t.destination(), "h.test", "/", config, transport);
  CHECK(a.kind == b.kind);
  CHECK(a.reason == b.reason);
  REQUIRE(a.icmp.has_value());
  REQUIRE(b.icmp.has_value());
  CHECK(a.icmp->hops == b.icmp->hops);
  CHECK(a.tcp->hops == b.tcp->hops);
}
