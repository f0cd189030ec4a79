#include <doctest.h>

#include "blockscope/fetcher.hpp"
#include "blockscope/netsim.hpp"
#include "blockscope/trace.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace blockscope;
using namespace blockscope::sim;

namespace {

SimTopology ten_hop() {
  SimTopology t;
  for (int i = 1; i <= 10; ++i) t.hop_addresses.push_back("10.1.0." + std::to_string(i));
  return t;
}

ProbeSpec probe_of(ProbeRole role, int ttl, const std::string& destination) {
  ProbeSpec p;
  p.role = role;
  p.protocol = role == ProbeRole::EchoRequest ? TraceProtocol::Icmp
               : role == ProbeRole::Syn       ? TraceProtocol::Tcp
                                              : TraceProtocol::Http;
  p.ttl = ttl;
  p.destination = destination;
  return p;
}

}  // namespace

TEST_CASE("ttl expiry answers from the owning hop") {
  auto t = ten_hop();
  auto reply = simulate_probe(t, probe_of(ProbeRole::EchoRequest, 3, t.destination()));
  REQUIRE(reply.has_value());
  CHECK(reply->kind == HopKind::TtlExceeded);
  CHECK(reply->responder == t.hop_addresses[2]);
}

TEST_CASE("a spoofing middlebox answers SYNs with the destination's address") {
  auto t = ten_hop();
  MiddleboxSpec mb;
  mb.position = 5;
  mb.intercepts = {TraceProtocol::Tcp};
  mb.spoof_destination_address = true;
  t.middlebox = mb;

  for (int ttl : {5, 7, 10}) {
    auto reply = simulate_probe(t, probe_of(ProbeRole::Syn, ttl, t.destination()));
    REQUIRE(reply.has_value());
    CHECK(reply->kind == HopKind::SynAck);
    CHECK(reply->responder == t.destination());
  }
  // without spoofing the middlebox shows its own hop address
  t.middlebox->spoof_destination_address = false;
  auto reply = simulate_probe(t, probe_of(ProbeRole::Syn, 9, t.destination()));
  CHECK(reply->responder == t.hop_addresses[4]);
}

TEST_CASE("icmp echo passes middleboxes untouched") {
  auto t = ten_hop();
  MiddleboxSpec mb;
  mb.position = 4;
  mb.intercepts = {TraceProtocol::Tcp, TraceProtocol::Http};
  mb.reveals_own_icmp = false;
  t.middlebox = mb;

  for (ServerBehavior behavior :
       {ServerBehavior::Serve200, ServerBehavior::Serve403, ServerBehavior::DropSyn,
        ServerBehavior::RstSyn, ServerBehavior::AcceptThenSilent}) {
    t.server_behavior = behavior;
    auto reply = simulate_probe(t, probe_of(ProbeRole::EchoRequest, 10, t.destination()));
    REQUIRE(reply.has_value());
    CHECK(reply->kind == HopKind::EchoReply);
    CHECK(reply->responder == t.destination());
  }
  // ...but a TTL expiring at the hidden middlebox hop earns no TtlExceeded,
  auto at_mb = simulate_probe(t, probe_of(ProbeRole::EchoRequest, 4, t.destination()));
  CHECK(!at_mb.has_value());
  // unless the middlebox reveals its own address.
  t.middlebox->reveals_own_icmp = true;
  at_mb = simulate_probe(t, probe_of(ProbeRole::EchoRequest, 4, t.destination()));
  REQUIRE(at_mb.has_value());
  CHECK(at_mb->responder == t.hop_addresses[3]);
}

TEST_CASE("middlebox actions Rst and Drop") {
  auto t = ten_hop();
  MiddleboxSpec mb;
  mb.position = 6;
  mb.intercepts = {TraceProtocol::Tcp};
  mb.action = MiddleboxAction::Rst;
  t.middlebox = mb;
  auto rst = simulate_probe(t, probe_of(ProbeRole::Syn, 8, t.destination()));
  REQUIRE(rst.has_value());
  CHECK(rst->kind == HopKind::Rst);

  t.middlebox->action = MiddleboxAction::Drop;
  CHECK(!simulate_probe(t, probe_of(ProbeRole::Syn, 8, t.destination())).has_value());
  // TTLs expiring before the middlebox still see routers.
  auto router = simulate_probe(t, probe_of(ProbeRole::Syn, 2, t.destination()));
  REQUIRE(router.has_value());
  CHECK(router->kind == HopKind::TtlExceeded);
}

TEST_CASE("handshake completion requires a SYN-ACK claiming the destination") {
  auto t = ten_hop();
  CHECK(simulate_handshake(t));  // Serve200 accepts

  t.server_behavior = ServerBehavior::RstSyn;
  CHECK(!simulate_handshake(t));
  t.server_behavior = ServerBehavior::DropSyn;
  CHECK(!simulate_handshake(t));

  t.server_behavior = ServerBehavior::Serve200;
  MiddleboxSpec mb;
  mb.position = 3;
  mb.intercepts = {TraceProtocol::Tcp};
  mb.action = MiddleboxAction::SynAckThenBlockpage;
  mb.spoof_destination_address = true;
  t.middlebox = mb;
  CHECK(simulate_handshake(t));  // the spoofed SYN-ACK fools the client
  t.middlebox->spoof_destination_address = false;
  CHECK(!simulate_handshake(t));  // an own-address SYN-ACK never matches
}

TEST_CASE("topology validation") {
  SimTopology t = ten_hop();
  CHECK_NOTHROW(t.validate());

  SimTopology dup = t;
  dup.hop_addresses[1] = dup.hop_addresses[0];
  CHECK_THROWS_AS(dup.validate(), ContractError);

  SimTopology bad_mb = t;
  MiddleboxSpec mb;
  mb.position = 10;  // must sit strictly before the destination
  mb.intercepts = {TraceProtocol::Tcp};
  bad_mb.middlebox = mb;
  CHECK_THROWS_AS(bad_mb.validate(), ContractError);

  SimTopology icmp_mb = t;
  mb.position = 3;
  mb.intercepts = {TraceProtocol::Icmp};
  icmp_mb.middlebox = mb;
  CHECK_THROWS_AS(icmp_mb.validate(), ContractError);

  SimTopology short_mask = t;
  short_mask.icmp_responsive = {true, false};
  CHECK_THROWS_AS(short_mask.validate(), ContractError);
}

TEST_CASE("enumeration matches the closed form and the independent count") {
  CHECK(enumerate_count(1) == 1);
  CHECK(enumerate_count(2) == 14);
  CHECK(enumerate_count(20) == 2300);

  for (int depth : {1, 2, 5, 20}) {
    std::size_t counted = 0;
    int max_mb_position = 0;
    enumerate_topologies(depth, [&](const SimTopology& t) {
      ++counted;
      CHECK_NOTHROW(t.validate());
      if (t.middlebox) max_mb_position = std::max(max_mb_position, t.middlebox->position);
      if (depth == 1) CHECK(!t.middlebox.has_value());
    });
    CHECK(counted == enumerate_count(depth));
    CHECK(counted == oracles::counted_enumeration_size(depth));
    if (depth == 2) CHECK(max_mb_position == 1);
  }
}

TEST_CASE("replaying a probe sequence yields identical replies") {
  auto t = ten_hop();
  MiddleboxSpec mb;
  mb.position = 5;
  mb.intercepts = {TraceProtocol::Tcp};
  mb.spoof_destination_address = true;
  mb.reveals_own_icmp = true;
  t.middlebox = mb;

  for (int pass = 0; pass < 2; ++pass) {
    std::vector<std::optional<ProbeReply>> replies;
    for (int ttl = 1; ttl <= 10; ++ttl) {
      for (auto role : {ProbeRole::EchoRequest, ProbeRole::Syn, ProbeRole::HttpGet}) {
        replies.push_back(simulate_probe(t, probe_of(role, ttl, t.destination())));
      }
    }
    static std::vector<std::optional<ProbeReply>> first_pass;
    if (pass == 0) {
      first_pass = replies;
    } else {
      REQUIRE(replies.size() == first_pass.size());
      for (std::size_t i = 0; i < replies.size(); ++i) {
        CHECK(replies[i].has_value() == first_pass[i].has_value());
        if (replies[i]) {
          CHECK(replies[i]->kind == first_pass[i]->kind);
          CHECK(replies[i]->responder == first_pass[i]->responder);
        }
      }
    }
  }
}

TEST_CASE("every enumerated trace satisfies the TraceRun invariants") {
  ProbeConfig config;
  config.per_ttl_probe_count = 1;
  config.max_ttl = 25;

  struct Transport : ProbeTransport {
    const SimTopology* t = nullptr;
    std::optional<ProbeReply> probe(const ProbeSpec& spec) override {
      return simulate_probe(*t, spec);
    }
    bool tcp_handshake(const std::string&, std::uint16_t) override {
      return simulate_handshake(*t);
    }
  } transport;

  auto check_run = [](const TraceRun& run, HopKind terminal) {
    CHECK(run.underapproximate == !run.complete);
    bool dest_reached = false;
    int last_reply = 0;
    for (const auto& h : run.hops) {
      CHECK(h.responder.has_value() == (h.kind != HopKind::NoReply));
      if (h.kind != HopKind::NoReply) last_reply = h.ttl;
      if (h.kind == terminal && h.responder == run.destination) dest_reached = true;
    }
    CHECK(run.complete == dest_reached);
    if (last_reply > 0) CHECK(run.path_length >= 1);
    if (!run.complete) CHECK(run.path_length == last_reply);
  };

  enumerate_topologies(10, [&](const SimTopology& t) {
    transport.t = &t;
    check_run(icmp_traceroute(t.destination(), config, transport), HopKind::EchoReply);
    auto tcp = tcp_traceroute(t.destination(), 80, config, transport);
    check_run(tcp, HopKind::SynAck);
    if (simulate_handshake(t)) {
      check_run(http_traceroute(t.destination(), "h.test", "/", config, transport),
                HopKind::HttpResponse);
    }
  });
}

TEST_CASE("serve_fetch mirrors the topology at connection level") {
  HttpRequestSpec request;
  request.url = "http://h.test/";
  request.timeout = std::chrono::milliseconds(500);

  auto t = ten_hop();
  SUBCASE("Serve403 yields a 403 response") {
    t.server_behavior = ServerBehavior::Serve403;
    auto result = serve_fetch(t, request);
    REQUIRE(result.response.has_value());
    CHECK(result.response->status == 403);
  }
  SUBCASE("DropSyn burns the whole timeout") {
    t.server_behavior = ServerBehavior::DropSyn;
    auto result = serve_fetch(t, request);
    REQUIRE(result.failure.has_value());
    CHECK(*result.failure == FailureKind::DeadlineExceeded);
    CHECK(*result.sim_elapsed_ms == 500);
  }
  SUBCASE("RstSyn refuses the connection") {
    t.server_behavior = ServerBehavior::RstSyn;
    auto result = serve_fetch(t, request);
    CHECK(*result.failure == FailureKind::ConnectionRefused);
  }
  SUBCASE("a blockpage middlebox injects a 200") {
    MiddleboxSpec mb;
    mb.position = 4;
    mb.intercepts = {TraceProtocol::Tcp};
    mb.action = MiddleboxAction::SynAckThenBlockpage;
    t.middlebox = mb;
    t.blockpage_body = "<h1>Access Denied</h1>";
    auto result = serve_fetch(t, request);
    REQUIRE(result.response.has_value());
    CHECK(result.response->status == 200);
    CHECK(result.response->body == "<h1>Access Denied</h1>");
  }
  SUBCASE("an HTTP-only middlebox lets the handshake through but resets the GET") {
    MiddleboxSpec mb;
    mb.position = 4;
    mb.intercepts = {TraceProtocol::Http};
    mb.action = MiddleboxAction::Rst;
    t.middlebox = mb;
    auto result = serve_fetch(t, request);
    CHECK(*result.failure == FailureKind::ConnectionReset);
  }
}

TEST_CASE("topology JSON round-trips") {
  auto t = ten_hop();
  t.server_behavior = ServerBehavior::ServeBlockpage;
  t.blockpage_body = "denied";
  MiddleboxSpec mb;
  mb.position = 5;
  mb.intercepts = {TraceProtocol::Tcp, TraceProtocol::Http};
  mb.spoof_destination_address = true;
  mb.reveals_own_icmp = true;
  mb.action = MiddleboxAction::SynAckThenBlockpage;
  t.middlebox = mb;
  t.icmp_responsive.assign(10, true);
  t.icmp_responsive[7] = false;

  auto back = topology_from_json(topology_to_json(t));
  CHECK(back.hop_addresses == t.hop_addresses);
  CHECK(back.server_behavior == t.server_behavior);
  CHECK(back.blockpage_body == t.blockpage_body);
  CHECK(back.icmp_responsive == t.icmp_responsive);
  REQUIRE(back.middlebox.has_value());
  CHECK(back.middlebox->position == 5);
  CHECK(back.middlebox->intercepts == mb.intercepts);
  CHECK(back.middlebox->spoof_destination_address);
  CHECK(back.middlebox->reveals_own_icmp);

  CHECK_THROWS_AS(topology_from_json("{not json"), FileLoadError);
  CHECK_THROWS_AS(topology_from_json(R"({"hops":[]})"), FileLoadError);
}

TEST_CASE("fixtures select views per vantage") {
  auto fixture = SimFixture::from_json(R"({
    "base_ts": "2018-05-18T00:00:00.000Z",
    "targets": {
      "a.test": [
        {"vantages": ["us-1"], "topology": {"hops": ["10.0.0.1"], "server": "Serve200"}},
        {"vantages": ["*"], "topology": {"hops": ["10.0.0.1"], "server": "Serve403"}}
      ],
      "us-only.test": [
        {"vantages": ["us-1"], "topology": {"hops": ["10.0.1.1"], "server": "Serve200"}}
      ]
    }
  })",
                                       "<inline>");
  CHECK(fixture.base_ts_ms == 1526601600000);

  SimNet us(fixture, "us-1");
  SimNet pk(fixture, "pk-1");

  auto us_addrs = us.resolve("a.test");
  REQUIRE(us_addrs.has_value());
  CHECK(us_addrs->front() == "10.0.0.1");
  CHECK(!pk.resolve("us-only.test").has_value());  // view exists only for us-1
  CHECK(!us.resolve("unknown.test").has_value());

  HttpRequestSpec request;
  request.url = "http://a.test/";
  request.timeout = std::chrono::milliseconds(100);
  CHECK(us.roundtrip(request).response->status == 200);
  CHECK(pk.roundtrip(request).response->status == 403);

  ProbeSpec bad;
  bad.destination = "172.31.0.1";
  CHECK_THROWS_AS(pk.probe(bad), ProbeError);
}

TEST_CASE("seeded loss injection is reproducible and survivable with retries") {
  auto fixture = SimFixture::from_json(R"({
    "loss_rate": 0.4, "loss_seed": 11,
    "targets": {"a.test": {"hops": ["10.0.0.1","10.0.0.2","10.0.0.3","10.0.0.4",
                                    "10.0.0.5","10.0.0.6"], "server": "Serve403"}}
  })",
                                       "<inline>");
  SimNet net_a(fixture, "v");
  SimNet net_b(fixture, "v");

  ProbeConfig config;
  config.per_ttl_probe_count = 5;  // retries recover from 40% loss
  auto run_a = icmp_traceroute("10.0.0.6", config, net_a);
  auto run_b = icmp_traceroute("10.0.0.6", config, net_b);
  CHECK(run_a.hops == run_b.hops);  // same seed, same outcome
  CHECK(run_a.complete);

  // Without retries the same loss pattern shows holes.
  ProbeConfig single;
  single.per_ttl_probe_count = 1;
  auto lossy = icmp_traceroute("10.0.0.6", single, net_a);
  std::size_t holes = 0;
  for (const auto& h : lossy.hops) holes += h.kind == HopKind::NoReply;
  CHECK(holes > 0);
}
