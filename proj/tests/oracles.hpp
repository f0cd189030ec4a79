#pragma once

// Independent oracles for the derived expectations. Everything here is
// recomputed from first principles (definitions, closed forms, planted
// fixtures) and never calls into the code paths it checks.

#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blockscope/netsim.hpp"
#include "blockscope/records.hpp"
#include "blockscope/trace.hpp"
#include "blockscope/types.hpp"
#include "blockscope/url.hpp"

namespace oracles {

// ---- regional aggregation, recomputed naively ----------------------------------

struct NaiveVerdict {
  bool always_available = false;
  bool always_unavailable_consistent = false;
  bool always_unavailable_mixed = false;
  bool mixed = false;
  std::optional<blockscope::StatusClass> failure_class;
  blockscope::StatusClass majority = blockscope::StatusClass::Other;
};

inline bool naive_available(const blockscope::FetchOutcome& r) {
  if (r.status_class != blockscope::StatusClass::Ok2xx) return false;
  if (!r.blockpage) return true;
  return *r.blockpage == blockscope::BlockpageClass::NotBlockpage;
}

inline NaiveVerdict naive_aggregate(const std::vector<blockscope::FetchOutcome>& records) {
  NaiveVerdict v;
  std::size_t available = 0;
  std::map<blockscope::StatusClass, std::size_t> counts;
  std::set<blockscope::StatusClass> classes;
  for (const auto& r : records) {
    if (naive_available(r)) ++available;
    ++counts[r.status_class];
    classes.insert(r.status_class);
  }
  std::size_t best_count = 0;
  for (const auto& [cls, count] : counts) {  // map order == enum order
    if (count > best_count) {
      best_count = count;
      v.majority = cls;
    }
  }
  if (available == records.size()) {
    v.always_available = true;
  } else if (available > 0) {
    v.mixed = true;
  } else if (classes.size() == 1) {
    v.always_unavailable_consistent = true;
    v.failure_class = *classes.begin();
  } else {
    v.always_unavailable_mixed = true;
  }
  return v;
}

// Set of URLs a naive short-lister keeps: always-available control, one
// consistent failure mode in test.
inline std::set<std::string> naive_shortlist(
    const std::map<std::string, std::vector<blockscope::FetchOutcome>>& control,
    const std::map<std::string, std::vector<blockscope::FetchOutcome>>& test) {
  std::set<std::string> keep;
  for (const auto& [url, test_records] : test) {
    auto it = control.find(url);
    if (it == control.end()) continue;
    if (naive_aggregate(it->second).always_available &&
        naive_aggregate(test_records).always_unavailable_consistent) {
      keep.insert(url);
    }
  }
  return keep;
}

// ---- traceroute differential, evaluated from topology parameters ---------------

struct ExpectedVerdict {
  blockscope::VerdictKind kind;
  blockscope::VerdictReason reason;
};

// Applies the two middlebox heuristics (short response path, spoofed
// response) plus the HTTP escalation rule directly to the analytic path
// lengths of an enumeration topology (403 server, SynAck-then-blockpage
// middlebox, every hop ICMP-responsive). Never touches TraceRun or the
// simulator.
inline ExpectedVerdict expected_enumeration_verdict(const blockscope::sim::SimTopology& t,
                                                    int threshold) {
  using blockscope::TraceProtocol;
  using blockscope::VerdictKind;
  using blockscope::VerdictReason;

  const int d = t.depth();
  const bool has_mb = t.middlebox.has_value();
  const int m = has_mb ? t.middlebox->position : 0;
  const bool spoof = has_mb && t.middlebox->spoof_destination_address;
  const bool reveal = has_mb && t.middlebox->reveals_own_icmp;
  const bool tcp_owned = has_mb && t.middlebox->intercepts.count(TraceProtocol::Tcp) > 0;
  const bool http_hit =
      has_mb && (tcp_owned || t.middlebox->intercepts.count(TraceProtocol::Http) > 0);

  // Echo probes pass middleboxes, every hop answers: the ICMP baseline is the
  // true depth. The TCP response path ends where the SYN is first answered.
  const int icmp_len = d;
  const int tcp_len = tcp_owned ? m : d;
  // Spoof evidence needs both a reply claiming the destination's address and
  // a TTL-exceeded at the same hop revealing a different one.
  const bool tcp_spoof_visible = tcp_owned && spoof && reveal;

  if (icmp_len - tcp_len > threshold) {
    return {VerdictKind::MiddleboxSuspected, VerdictReason::ShortPath};
  }
  if (tcp_spoof_visible) {
    return {VerdictKind::MiddleboxSuspected, VerdictReason::SpoofedResponse};
  }
  // Stateful escalation: the handshake only completes when the SYN-ACK claims
  // the destination's address.
  const bool handshake_ok = !tcp_owned || spoof;
  if (!handshake_ok) {
    return {VerdictKind::Inconclusive, VerdictReason::NoHttpResponse};
  }
  const int http_len = http_hit ? m : d;
  const bool http_spoof_visible = http_hit && spoof && reveal;
  if (icmp_len - http_len > threshold) {
    return {VerdictKind::MiddleboxSuspected, VerdictReason::ShortPath};
  }
  if (http_spoof_visible) {
    return {VerdictKind::MiddleboxSuspected, VerdictReason::SpoofedResponse};
  }
  return {VerdictKind::ServerSide, VerdictReason::EqualPaths};
}

// Independent count of the enumeration cross product.
inline std::size_t counted_enumeration_size(int max_depth) {
  std::size_t n = 0;
  for (int d = 1; d <= max_depth; ++d) {
    n += 1;  // no middlebox
    for (int m = 1; m < d; ++m) {
      for (int spoof = 0; spoof < 2; ++spoof) {
        for (int reveal = 0; reveal < 2; ++reveal) {
          n += 3;  // {Tcp}, {Http}, {Tcp, Http}
        }
      }
    }
  }
  return n;
}

// ---- planted funnel fixture ------------------------------------------------------

struct FunnelPlan {
  std::size_t total = 100;
  std::size_t control_always_available = 60;
  std::size_t test_always_unavailable = 20;
  std::size_t test_same_problem = 15;
  std::size_t short_listed = 7;
};

// Writes multi-vantage JSONL logs planting exactly the funnel above:
//   u000..u059 clean in control, everything else mixed there;
//   u000..u006 consistently 403 in test            (short-listed),
//   u060..u067 consistently timing out in test     (consistent, not listed),
//   u068..u072 unavailable in two different modes  (mixed-mode, filtered),
//   u073..u075 mixed availability in test, the rest clean.
// Control logs land in dir/control, test logs in dir/test; two vantages and
// three runs per side.
inline FunnelPlan write_funnel_fixture(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using namespace blockscope;

  auto url_name = [](std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "u%03zu.test", i);
    return std::string(buf);
  };

  auto make = [&](std::size_t i, const std::string& vantage, int run, StatusClass cls) {
    FetchOutcome out;
    std::string url = "http://" + url_name(i) + "/";
    out.url = make_target(url, url);
    out.vantage_id = vantage;
    out.run_index = run;
    out.status_class = cls;
    if (status_class_is_http(cls)) {
      switch (cls) {
        case StatusClass::Ok2xx: out.http_status = 200; break;
        case StatusClass::Forbidden403: out.http_status = 403; break;
        case StatusClass::Unavailable503: out.http_status = 503; break;
        default: out.http_status = 400; break;
      }
    }
    out.final_url = url;
    out.elapsed_ms = 5;
    out.timestamp_ms = 1526601600000;
    return out;
  };

  FunnelPlan plan;
  const std::vector<std::string> control_vantages = {"cv1", "cv2"};
  const std::vector<std::string> test_vantages = {"tv1", "tv2"};
  const int runs = 3;

  fs::create_directories(dir / "control");
  fs::create_directories(dir / "test");

  for (const auto& side : {std::string("control"), std::string("test")}) {
    const auto& vantages = side == "control" ? control_vantages : test_vantages;
    for (const auto& vantage : vantages) {
      for (int run = 0; run < runs; ++run) {
        std::ofstream out(dir / side / (vantage + ".run" + std::to_string(run) + ".jsonl"));
        for (std::size_t i = 0; i < plan.total; ++i) {
          int obs = (vantage.back() - '1') * runs + run;  // 0..5
          StatusClass cls = StatusClass::Ok2xx;
          if (side == "control") {
            if (i >= 60 && obs == 0) cls = StatusClass::Unavailable503;
          } else {
            if (i < 7) {
              cls = StatusClass::Forbidden403;
            } else if (i >= 60 && i < 68) {
              cls = StatusClass::Timeout;
            } else if (i >= 68 && i < 73) {
              cls = obs % 2 ? StatusClass::Timeout : StatusClass::Forbidden403;
            } else if (i >= 73 && i < 76 && obs == 2) {
              cls = StatusClass::ConnError;
            }
          }
          out << encode_record(make(i, vantage, run, cls)) << "\n";
        }
      }
    }
  }
  return plan;
}

}  // namespace oracles
