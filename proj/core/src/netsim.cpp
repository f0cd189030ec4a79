#include "blockscope/netsim.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "blockscope/records.hpp"
#include "blockscope/url.hpp"

namespace blockscope::sim {

namespace {

constexpr std::string_view kDefaultBlockpageBody =
    "<html><body><h1>Access Denied</h1></body></html>";

double hop_rtt(int hop_index) { return hop_index * 2.0; }

std::string middlebox_address(const SimTopology& t) {
  return t.hop_addresses[static_cast<std::size_t>(t.middlebox->position) - 1];
}

}  // namespace

std::string_view server_behavior_name(ServerBehavior b) {
  switch (b) {
    case ServerBehavior::Serve200: return "Serve200";
    case ServerBehavior::Serve403: return "Serve403";
    case ServerBehavior::ServeBlockpage: return "ServeBlockpage";
    case ServerBehavior::DropSyn: return "DropSyn";
    case ServerBehavior::RstSyn: return "RstSyn";
    case ServerBehavior::AcceptThenSilent: return "AcceptThenSilent";
  }
  return "Serve200";
}

std::optional<ServerBehavior> server_behavior_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ServerBehavior::AcceptThenSilent); ++i) {
    auto b = static_cast<ServerBehavior>(i);
    if (server_behavior_name(b) == name) return b;
  }
  return std::nullopt;
}

std::string_view middlebox_action_name(MiddleboxAction a) {
  switch (a) {
    case MiddleboxAction::Rst: return "Rst";
    case MiddleboxAction::SynAckThenBlockpage: return "SynAckThenBlockpage";
    case MiddleboxAction::Drop: return "Drop";
  }
  return "Drop";
}

std::optional<MiddleboxAction> middlebox_action_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(MiddleboxAction::Drop); ++i) {
    auto a = static_cast<MiddleboxAction>(i);
    if (middlebox_action_name(a) == name) return a;
  }
  return std::nullopt;
}

bool SimTopology::hop_answers_icmp(int hop_index) const {
  if (middlebox && hop_index == middlebox->position) {
    return middlebox->reveals_own_icmp;
  }
  if (icmp_responsive.empty()) return true;
  return icmp_responsive[static_cast<std::size_t>(hop_index) - 1];
}

void SimTopology::validate() const {
  if (hop_addresses.empty()) throw ContractError("topology needs at least one hop");
  std::set<std::string> seen;
  for (const auto& a : hop_addresses) {
    if (a.empty()) throw ContractError("empty hop address");
    if (!seen.insert(a).second) throw ContractError("duplicate hop address " + a);
  }
  if (!icmp_responsive.empty() && icmp_responsive.size() != hop_addresses.size()) {
    throw ContractError("icmp_responsive length must match hop count");
  }
  if (middlebox) {
    if (middlebox->position < 1 || middlebox->position >= depth()) {
      throw ContractError("middlebox position must be in [1, depth)");
    }
    if (middlebox->intercepts.empty()) {
      throw ContractError("middlebox intercepts nothing");
    }
    if (middlebox->intercepts.count(TraceProtocol::Icmp)) {
      throw ContractError("middleboxes never intercept ICMP echo");
    }
  }
}

std::optional<ProbeReply> simulate_probe(const SimTopology& t, const ProbeSpec& p) {
  const int d = t.depth();
  const std::string& dst = t.destination();
  const MiddleboxSpec* mb = t.middlebox ? &*t.middlebox : nullptr;

  // ICMP echo passes middleboxes untouched. A middlebox that intercepts the
  // handshake owns the whole connection, so GET segments terminate at it too.
  bool intercepted = false;
  if (mb && p.role != ProbeRole::EchoRequest) {
    bool owns_connection = mb->intercepts_protocol(TraceProtocol::Tcp);
    intercepted = p.role == ProbeRole::Syn
                      ? owns_connection
                      : owns_connection || mb->intercepts_protocol(TraceProtocol::Http);
  }

  const int responder_depth = intercepted ? mb->position : d;
  if (p.ttl < responder_depth) {
    // TTL expires at an intermediate hop.
    if (!t.hop_answers_icmp(p.ttl)) return std::nullopt;
    return ProbeReply{HopKind::TtlExceeded,
                      t.hop_addresses[static_cast<std::size_t>(p.ttl) - 1],
                      hop_rtt(p.ttl)};
  }

  if (intercepted) {
    std::string source = mb->spoof_destination_address ? dst : middlebox_address(t);
    switch (mb->action) {
      case MiddleboxAction::Drop:
        return std::nullopt;
      case MiddleboxAction::Rst:
        return ProbeReply{HopKind::Rst, source, hop_rtt(mb->position)};
      case MiddleboxAction::SynAckThenBlockpage:
        return ProbeReply{p.role == ProbeRole::Syn ? HopKind::SynAck
                                                   : HopKind::HttpResponse,
                          source, hop_rtt(mb->position)};
    }
  }

  // The probe reached the destination.
  switch (p.role) {
    case ProbeRole::EchoRequest:
      if (!t.hop_answers_icmp(d)) return std::nullopt;
      return ProbeReply{HopKind::EchoReply, dst, hop_rtt(d)};
    case ProbeRole::Syn:
      switch (t.server_behavior) {
        case ServerBehavior::DropSyn: return std::nullopt;
        case ServerBehavior::RstSyn: return ProbeReply{HopKind::Rst, dst, hop_rtt(d)};
        default: return ProbeReply{HopKind::SynAck, dst, hop_rtt(d)};
      }
    case ProbeRole::HttpGet:
      switch (t.server_behavior) {
        case ServerBehavior::Serve200:
        case ServerBehavior::Serve403:
        case ServerBehavior::ServeBlockpage:
          return ProbeReply{HopKind::HttpResponse, dst, hop_rtt(d)};
        case ServerBehavior::RstSyn: return ProbeReply{HopKind::Rst, dst, hop_rtt(d)};
        case ServerBehavior::DropSyn:
        case ServerBehavior::AcceptThenSilent: return std::nullopt;
      }
  }
  return std::nullopt;
}

HttpResult serve_fetch(const SimTopology& t, const HttpRequestSpec& request) {
  HttpResult result;
  const int d = t.depth();
  const MiddleboxSpec* mb = t.middlebox ? &*t.middlebox : nullptr;

  auto timeout = [&]() {
    result.failure = FailureKind::DeadlineExceeded;
    result.sim_elapsed_ms = request.timeout.count();
    return result;
  };
  auto failed = [&](FailureKind kind, int at_hop) {
    result.failure = kind;
    result.sim_elapsed_ms = static_cast<std::int64_t>(hop_rtt(at_hop));
    return result;
  };
  auto respond = [&](int status, std::string body, int at_hop) {
    HttpResponseData resp;
    resp.status = status;
    resp.headers.emplace_back("Content-Type", "text/html");
    resp.body = std::move(body);
    result.response = std::move(resp);
    result.sim_elapsed_ms = static_cast<std::int64_t>(hop_rtt(at_hop));
    return result;
  };
  auto blockpage_body = [&]() {
    return t.blockpage_body.empty() ? std::string(kDefaultBlockpageBody)
                                    : t.blockpage_body;
  };

  if (mb && mb->intercepts_protocol(TraceProtocol::Tcp)) {
    // The connection never reaches the server.
    switch (mb->action) {
      case MiddleboxAction::Drop: return timeout();
      case MiddleboxAction::Rst: return failed(FailureKind::ConnectionReset, mb->position);
      case MiddleboxAction::SynAckThenBlockpage:
        return respond(200, blockpage_body(), mb->position);
    }
  }

  // Handshake with the real server.
  switch (t.server_behavior) {
    case ServerBehavior::DropSyn: return timeout();
    case ServerBehavior::RstSyn: return failed(FailureKind::ConnectionRefused, d);
    default: break;
  }

  if (mb && mb->intercepts_protocol(TraceProtocol::Http)) {
    switch (mb->action) {
      case MiddleboxAction::Drop: return timeout();
      case MiddleboxAction::Rst: return failed(FailureKind::ConnectionReset, mb->position);
      case MiddleboxAction::SynAckThenBlockpage:
        return respond(200, blockpage_body(), mb->position);
    }
  }

  switch (t.server_behavior) {
    case ServerBehavior::Serve200:
      return respond(200, "<html><body>ok</body></html>", d);
    case ServerBehavior::Serve403:
      return respond(403, "<html><body>403 Forbidden</body></html>", d);
    case ServerBehavior::ServeBlockpage:
      return respond(200, blockpage_body(), d);
    case ServerBehavior::AcceptThenSilent:
      return timeout();
    default:
      return timeout();
  }
}

bool simulate_handshake(const SimTopology& topology) {
  ProbeSpec syn;
  syn.protocol = TraceProtocol::Tcp;
  syn.role = ProbeRole::Syn;
  syn.ttl = 255;
  syn.destination = topology.destination();
  auto reply = simulate_probe(topology, syn);
  return reply && reply->kind == HopKind::SynAck &&
         reply->responder == topology.destination();
}

void enumerate_topologies(int max_depth,
                          const std::function<void(const SimTopology&)>& yield) {
  if (max_depth < 1) throw ContractError("max_depth must be >= 1");

  static const std::vector<std::set<TraceProtocol>> kInterceptSets = {
      {TraceProtocol::Tcp},
      {TraceProtocol::Http},
      {TraceProtocol::Tcp, TraceProtocol::Http},
  };

  for (int d = 1; d <= max_depth; ++d) {
    SimTopology base;
    base.server_behavior = ServerBehavior::Serve403;
    for (int hop = 1; hop <= d; ++hop) {
      base.hop_addresses.push_back("198.51.100." + std::to_string(hop));
    }
    yield(base);

    for (int m = 1; m < d; ++m) {
      for (bool spoof : {false, true}) {
        for (bool reveal : {false, true}) {
          for (const auto& intercepts : kInterceptSets) {
            SimTopology t = base;
            MiddleboxSpec mb;
            mb.position = m;
            mb.intercepts = intercepts;
            mb.spoof_destination_address = spoof;
            mb.reveals_own_icmp = reveal;
            mb.action = MiddleboxAction::SynAckThenBlockpage;
            t.middlebox = mb;
            yield(t);
          }
        }
      }
    }
  }
}

std::size_t enumerate_count(int max_depth) {
  // One middlebox-free topology per depth plus 2 (spoof) x 2 (reveal) x 3
  // (intercept sets) per middlebox position: D + 12 * D*(D-1)/2.
  auto d = static_cast<std::size_t>(max_depth);
  return d + 6 * d * (d - 1);
}

// ---- JSON -------------------------------------------------------------------

namespace {

using nlohmann::json;

json topology_to_json_value(const SimTopology& t) {
  json j;
  j["hops"] = t.hop_addresses;
  if (t.server_behavior == ServerBehavior::ServeBlockpage || !t.blockpage_body.empty()) {
    j["server"] = {{"behavior", server_behavior_name(t.server_behavior)},
                   {"body", t.blockpage_body}};
  } else {
    j["server"] = std::string(server_behavior_name(t.server_behavior));
  }
  if (!t.icmp_responsive.empty()) j["icmp_responsive"] = t.icmp_responsive;
  if (t.middlebox) {
    const auto& mb = *t.middlebox;
    json m;
    m["position"] = mb.position;
    json protocols = json::array();
    for (auto p : mb.intercepts) protocols.push_back(trace_protocol_name(p));
    m["intercepts"] = protocols;
    m["spoof_destination_address"] = mb.spoof_destination_address;
    m["reveals_own_icmp"] = mb.reveals_own_icmp;
    m["action"] = middlebox_action_name(mb.action);
    j["middlebox"] = m;
  }
  return j;
}

SimTopology topology_from_json_value(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("hops") || !j["hops"].is_array()) {
    throw FileLoadError(where, 0, "topology needs a 'hops' address array");
  }
  SimTopology t;
  for (const auto& h : j["hops"]) t.hop_addresses.push_back(h.get<std::string>());

  if (j.contains("server")) {
    const auto& s = j["server"];
    std::string name = s.is_object() ? s.value("behavior", "") : s.get<std::string>();
    auto behavior = server_behavior_from_name(name);
    if (!behavior) throw FileLoadError(where, 0, "unknown server behavior '" + name + "'");
    t.server_behavior = *behavior;
    if (s.is_object()) t.blockpage_body = s.value("body", "");
  }
  if (j.contains("icmp_responsive")) {
    for (const auto& b : j["icmp_responsive"]) t.icmp_responsive.push_back(b.get<bool>());
  }
  if (j.contains("middlebox") && !j["middlebox"].is_null()) {
    const auto& m = j["middlebox"];
    MiddleboxSpec mb;
    mb.position = m.value("position", 0);
    for (const auto& p : m.value("intercepts", json::array())) {
      std::string pname = p.get<std::string>();
      if (pname == "tcp") {
        mb.intercepts.insert(TraceProtocol::Tcp);
      } else if (pname == "http") {
        mb.intercepts.insert(TraceProtocol::Http);
      } else {
        throw FileLoadError(where, 0, "middlebox cannot intercept '" + pname + "'");
      }
    }
    mb.spoof_destination_address = m.value("spoof_destination_address", false);
    mb.reveals_own_icmp = m.value("reveals_own_icmp", false);
    std::string action = m.value("action", "SynAckThenBlockpage");
    auto act = middlebox_action_from_name(action);
    if (!act) throw FileLoadError(where, 0, "unknown middlebox action '" + action + "'");
    mb.action = *act;
    t.middlebox = mb;
  }
  try {
    t.validate();
  } catch (const ContractError& e) {
    throw FileLoadError(where, 0, e.what());
  }
  return t;
}

}  // namespace

std::string topology_to_json(const SimTopology& t) {
  return topology_to_json_value(t).dump(2);
}

SimTopology topology_from_json(std::string_view json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw FileLoadError("<topology>", 0, "unparsable JSON");
  return topology_from_json_value(j, "<topology>");
}

SimFixture SimFixture::from_json(std::string_view json_text, const std::string& name) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw FileLoadError(name, 0, "fixture is not a JSON object");
  }
  SimFixture fx;
  if (j.contains("base_ts")) {
    const auto& v = j["base_ts"];
    fx.base_ts_ms = v.is_number_integer() ? v.get<std::int64_t>()
                                          : parse_utc_ms(v.get<std::string>());
  }
  fx.fetch_delay_ms = j.value("fetch_delay_ms", 0);
  fx.loss_rate = j.value("loss_rate", 0.0);
  fx.loss_seed = j.value("loss_seed", std::uint64_t{0});

  if (!j.contains("targets") || !j["targets"].is_object()) {
    throw FileLoadError(name, 0, "fixture needs a 'targets' object");
  }
  for (const auto& [host, value] : j["targets"].items()) {
    std::vector<View> views;
    if (value.is_array()) {
      for (const auto& entry : value) {
        View view;
        for (const auto& v : entry.value("vantages", json::array({"*"}))) {
          view.vantages.push_back(v.get<std::string>());
        }
        view.topology = topology_from_json_value(entry.at("topology"),
                                                 name + " [" + host + "]");
        views.push_back(std::move(view));
      }
    } else {
      View view;
      view.vantages.push_back("*");
      view.topology = topology_from_json_value(value, name + " [" + host + "]");
      views.push_back(std::move(view));
    }
    fx.targets.emplace(host, std::move(views));
  }
  return fx;
}

SimFixture SimFixture::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open fixture");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str(), file.string());
}

const SimTopology* SimFixture::topology_for(const std::string& host,
                                            const std::string& vantage_id) const {
  auto it = targets.find(host);
  if (it == targets.end()) return nullptr;
  for (const auto& view : it->second) {
    for (const auto& v : view.vantages) {
      if (v == "*" || v == vantage_id) return &view.topology;
    }
  }
  return nullptr;
}

// ---- SimNet -----------------------------------------------------------------

SimNet::SimNet(SimFixture fixture, std::string vantage_id)
    : fixture_(std::move(fixture)), vantage_id_(std::move(vantage_id)) {
  for (const auto& [host, views] : fixture_.targets) {
    const SimTopology* t = fixture_.topology_for(host, vantage_id_);
    if (!t) continue;
    auto [it, inserted] = by_address_.emplace(t->destination(), t);
    if (!inserted && it->second != t) {
      throw ContractError("fixture: destination address " + t->destination() +
                          " is shared by different topologies");
    }
  }
}

std::optional<std::vector<std::string>> SimNet::resolve(const std::string& host) {
  const SimTopology* t = fixture_.topology_for(host, vantage_id_);
  if (!t) return std::nullopt;
  return std::vector<std::string>{t->destination()};
}

const SimTopology* SimNet::topology_by_address(const std::string& address) const {
  auto it = by_address_.find(address);
  return it == by_address_.end() ? nullptr : it->second;
}

HttpResult SimNet::roundtrip(const HttpRequestSpec& request) {
  if (fixture_.fetch_delay_ms > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(fixture_.fetch_delay_ms));
  }
  auto parsed = parse_url(request.url);
  if (!parsed) {
    HttpResult result;
    result.failure = FailureKind::ProtocolError;
    result.sim_elapsed_ms = 0;
    return result;
  }
  const SimTopology* t = fixture_.topology_for(parsed->host, vantage_id_);
  if (!t) {
    HttpResult result;
    result.failure = FailureKind::DnsFailure;
    result.sim_elapsed_ms = 1;
    return result;
  }
  return serve_fetch(*t, request);
}

bool SimNet::lose_reply(const ProbeSpec& spec) const {
  if (fixture_.loss_rate <= 0.0) return false;
  // Stateless FNV-1a over the probe identity keeps loss reproducible no
  // matter how concurrent probes interleave.
  std::uint64_t h = 14695981039346656037ull ^ fixture_.loss_seed;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (char c : spec.destination) mix(static_cast<unsigned char>(c));
  mix(static_cast<std::uint64_t>(spec.ttl));
  mix(spec.sequence);
  mix(static_cast<std::uint64_t>(spec.protocol));
  return static_cast<double>(h % 10000) < fixture_.loss_rate * 10000.0;
}

std::optional<ProbeReply> SimNet::probe(const ProbeSpec& spec) {
  const SimTopology* t = topology_by_address(spec.destination);
  if (!t) throw ProbeError("probe to unknown simulated address " + spec.destination);
  auto reply = simulate_probe(*t, spec);
  if (reply && lose_reply(spec)) return std::nullopt;
  return reply;
}

bool SimNet::tcp_handshake(const std::string& destination, std::uint16_t port) {
  (void)port;
  const SimTopology* t = topology_by_address(destination);
  if (!t) throw ProbeError("handshake with unknown simulated address " + destination);
  return simulate_handshake(*t);
}

}  // namespace blockscope::sim
