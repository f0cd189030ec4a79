// blockscope: find region-scale website blocking in multi-vantage crawl logs
// and confirm server-side blocking with a three-protocol traceroute
// differential. Subcommands: crawl, shortlist, trace, report, annotate.

#include <CLI11.hpp>

#include <iostream>
#include <memory>
#include <string>

#include "blockscope/campaign.hpp"
#include "blockscope/netsim.hpp"
#include "blockscope/realnet.hpp"
#include "blockscope/records.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPermission = 3;

struct TransportSelection {
  bool real = false;
  std::string fixture;  // sim fixture path when !real
};

TransportSelection parse_transport(const std::string& value) {
  TransportSelection sel;
  if (value == "real") {
    sel.real = true;
    return sel;
  }
  if (value.rfind("sim:", 0) == 0 && value.size() > 4) {
    sel.fixture = value.substr(4);
    return sel;
  }
  throw CLI::ValidationError("--transport", "expected 'real' or 'sim:<fixture.json>'");
}

blockscope::Vantage pick_vantage(const std::string& roster_path, std::string id) {
  auto roster = blockscope::load_vantages(roster_path);
  if (roster.empty()) {
    throw std::runtime_error("vantage roster is empty: " + roster_path);
  }
  if (id.empty()) {
    if (roster.size() > 1) {
      throw std::runtime_error("roster has several vantages; pass --vantage-id");
    }
    return roster.front();
  }
  for (const auto& v : roster) {
    if (v.id == id) return v;
  }
  throw std::runtime_error("vantage id '" + id + "' not found in " + roster_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blockscope: regional availability measurement toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "blockscope 0.1.0");

  // ---- crawl ----
  auto* crawl = app.add_subcommand("crawl", "Crawl a URL list from one vantage");
  std::string crawl_urls, crawl_vantage_file, crawl_vantage_id, crawl_out;
  std::string crawl_transport = "real";
  std::string crawl_fingerprints;
  std::string crawl_user_agent;
  int crawl_runs = 3;
  int crawl_timeout_secs = 30;
  int crawl_concurrency = 16;
  std::uint64_t crawl_seed = 1;
  bool crawl_insecure = false;
  crawl->add_option("--urls", crawl_urls, "URL list (one per line)")
      ->required()
      ->envname("BLOCKSCOPE_URLS");
  crawl->add_option("--vantage-file", crawl_vantage_file, "vantage roster (JSONL)")
      ->required()
      ->envname("BLOCKSCOPE_VANTAGE_FILE");
  crawl->add_option("--vantage-id", crawl_vantage_id, "vantage id within the roster")
      ->envname("BLOCKSCOPE_VANTAGE_ID");
  crawl->add_option("--runs", crawl_runs, "crawl repetitions")
      ->envname("BLOCKSCOPE_RUNS");
  crawl->add_option("--out", crawl_out, "output directory")
      ->required()
      ->envname("BLOCKSCOPE_OUT");
  crawl->add_option("--timeout-secs", crawl_timeout_secs, "whole-fetch timeout")
      ->envname("BLOCKSCOPE_TIMEOUT_SECS");
  crawl->add_option("--transport", crawl_transport, "real | sim:<fixture.json>")
      ->envname("BLOCKSCOPE_TRANSPORT");
  crawl->add_option("--concurrency", crawl_concurrency, "simultaneous fetches")
      ->envname("BLOCKSCOPE_CONCURRENCY");
  crawl->add_option("--seed", crawl_seed, "politeness shuffle seed")
      ->envname("BLOCKSCOPE_SEED");
  crawl->add_option("--fingerprints", crawl_fingerprints, "block-page rule file (TSV)")
      ->envname("BLOCKSCOPE_FINGERPRINTS");
  crawl->add_option("--user-agent", crawl_user_agent, "override the crawler user-agent")
      ->envname("BLOCKSCOPE_USER_AGENT");
  crawl->add_flag("--insecure", crawl_insecure, "disable TLS certificate validation")
      ->envname("BLOCKSCOPE_INSECURE");

  // ---- shortlist ----
  auto* short_cmd = app.add_subcommand("shortlist", "Short-list regionally blocked URLs");
  std::vector<std::string> short_control, short_test, short_probes;
  std::string short_control_label, short_test_label, short_out;
  short_cmd->add_option("--control", short_control, "control-region logs (files or dirs)")
      ->required();
  short_cmd->add_option("--test", short_test, "test-region logs (files or dirs)")
      ->required();
  short_cmd->add_option("--control-label", short_control_label, "control region label")
      ->required();
  short_cmd->add_option("--test-label", short_test_label, "test region label")->required();
  short_cmd->add_option("--probe", short_probes,
                        "extra region for listing inference, LABEL=LOGS (repeatable)");
  short_cmd->add_option("--out", short_out, "shortlist CSV path")
      ->required()
      ->envname("BLOCKSCOPE_OUT");

  // ---- trace ----
  auto* trace = app.add_subcommand("trace", "Run the traceroute differential");
  std::string trace_shortlist, trace_out, trace_vantage_id;
  std::string trace_transport = "real";
  int trace_hop_delta = 3;
  int trace_max_ttl = 30;
  int trace_concurrency = 4;
  int trace_hop_timeout_secs = 2;
  trace->add_option("--shortlist", trace_shortlist, "shortlist CSV")->required();
  trace->add_option("--out", trace_out, "verdict JSON path")
      ->required()
      ->envname("BLOCKSCOPE_OUT");
  trace->add_option("--transport", trace_transport, "real | sim:<fixture.json>")
      ->envname("BLOCKSCOPE_TRANSPORT");
  trace->add_option("--vantage-id", trace_vantage_id, "vantage running the traces")
      ->envname("BLOCKSCOPE_VANTAGE_ID");
  trace->add_option("--hop-delta", trace_hop_delta,
                    "flag paths shorter than ICMP by more than this many hops")
      ->envname("BLOCKSCOPE_HOP_DELTA");
  trace->add_option("--max-ttl", trace_max_ttl, "TTL sweep limit")
      ->envname("BLOCKSCOPE_MAX_TTL");
  trace->add_option("--hop-timeout-secs", trace_hop_timeout_secs, "per-hop reply timeout");
  trace->add_option("--concurrency", trace_concurrency, "simultaneous targets")
      ->envname("BLOCKSCOPE_CONCURRENCY");

  // ---- report ----
  auto* report = app.add_subcommand("report", "Emit status-class tables from logs");
  std::vector<std::string> report_logs;
  std::string report_vantage_file, report_out;
  report->add_option("--logs", report_logs, "log files or directories")->required();
  report->add_option("--vantage-file", report_vantage_file, "vantage roster (JSONL)")
      ->required()
      ->envname("BLOCKSCOPE_VANTAGE_FILE");
  report->add_option("--out", report_out, "output directory")
      ->required()
      ->envname("BLOCKSCOPE_OUT");

  // ---- annotate ----
  auto* annotate = app.add_subcommand("annotate", "Merge manual checks into verdicts");
  std::string ann_verdicts, ann_file, ann_out;
  annotate->add_option("--verdicts", ann_verdicts, "verdict JSON from trace")->required();
  annotate->add_option("--annotations", ann_file, "manual annotations (JSONL)")
      ->required();
  annotate->add_option("--out", ann_out, "merged report JSON")
      ->required()
      ->envname("BLOCKSCOPE_OUT");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (crawl->parsed()) {
      blockscope::CampaignManifest manifest;
      manifest.url_list = crawl_urls;
      manifest.vantage = pick_vantage(crawl_vantage_file, crawl_vantage_id);
      manifest.runs = crawl_runs;
      manifest.output_dir = crawl_out;
      manifest.config.fetch_timeout = std::chrono::seconds(crawl_timeout_secs);
      manifest.config.tls_verify = !crawl_insecure;
      if (!crawl_user_agent.empty()) manifest.config.user_agent = crawl_user_agent;
      manifest.concurrency = crawl_concurrency;
      manifest.seed = crawl_seed;
      manifest.fingerprints = crawl_fingerprints;

      auto selection = parse_transport(crawl_transport);
      std::unique_ptr<blockscope::HttpTransport> transport;
      std::unique_ptr<blockscope::Resolver> resolver;
      std::unique_ptr<blockscope::Clock> clock;
      if (selection.real) {
        transport = std::make_unique<blockscope::RealHttpTransport>();
        resolver = std::make_unique<blockscope::SystemResolver>();
        clock = std::make_unique<blockscope::SystemClock>();
      } else {
        auto fixture = blockscope::sim::SimFixture::load(selection.fixture);
        auto sim = std::make_unique<blockscope::sim::SimNet>(fixture, manifest.vantage.id);
        clock = std::make_unique<blockscope::FixedClock>(sim->base_ts_ms());
        resolver = std::make_unique<blockscope::sim::SimNet>(fixture, manifest.vantage.id);
        transport = std::move(sim);
      }

      auto stats = blockscope::cmd_crawl(manifest, *transport, *resolver, *clock,
                                         std::cerr);
      std::cerr << "crawl complete: " << stats.urls << " URLs x " << stats.runs
                << " runs, " << stats.fetched << " fetched, " << stats.resumed
                << " resumed\n";
      return kExitOk;
    }

    if (short_cmd->parsed()) {
      blockscope::ShortlistOptions options;
      for (const auto& p : short_control) options.control_logs.emplace_back(p);
      for (const auto& p : short_test) options.test_logs.emplace_back(p);
      options.control_label = short_control_label;
      options.test_label = short_test_label;
      options.out_csv = short_out;
      for (const auto& probe : short_probes) {
        auto eq = probe.find('=');
        if (eq == std::string::npos) {
          std::cerr << "error: --probe expects LABEL=LOGS, got '" << probe << "'\n";
          return kExitUsage;
        }
        options.probe_logs[probe.substr(0, eq)].emplace_back(probe.substr(eq + 1));
      }
      blockscope::cmd_shortlist(options, std::cout);
      return kExitOk;
    }

    if (trace->parsed()) {
      blockscope::TraceOptions options;
      options.shortlist_csv = trace_shortlist;
      options.out_json = trace_out;
      options.vantage_id = trace_vantage_id;
      options.concurrency = trace_concurrency;
      options.config.hop_delta_threshold = trace_hop_delta;
      options.config.max_ttl = trace_max_ttl;
      options.config.per_hop_timeout = std::chrono::seconds(trace_hop_timeout_secs);

      auto selection = parse_transport(trace_transport);
      std::unique_ptr<blockscope::ProbeTransport> transport;
      std::unique_ptr<blockscope::Resolver> resolver;
      if (selection.real) {
        std::string error = blockscope::probe_capability_error();
        if (!error.empty()) {
          std::cerr << "error: " << error << "\n";
          return kExitPermission;
        }
        transport = std::make_unique<blockscope::RealProbeTransport>(
            options.config.per_hop_timeout);
        resolver = std::make_unique<blockscope::SystemResolver>();
      } else {
        auto fixture = blockscope::sim::SimFixture::load(selection.fixture);
        transport = std::make_unique<blockscope::sim::SimNet>(fixture, trace_vantage_id);
        resolver = std::make_unique<blockscope::sim::SimNet>(fixture, trace_vantage_id);
      }
      blockscope::cmd_trace(options, *transport, *resolver, std::cout);
      return kExitOk;
    }

    if (report->parsed()) {
      blockscope::ReportOptions options;
      for (const auto& p : report_logs) options.logs.emplace_back(p);
      options.vantage_file = report_vantage_file;
      options.out_dir = report_out;
      blockscope::cmd_report(options, std::cout);
      return kExitOk;
    }

    if (annotate->parsed()) {
      blockscope::AnnotateOptions options;
      options.verdicts_json = ann_verdicts;
      options.annotations = ann_file;
      options.out_json = ann_out;
      blockscope::cmd_annotate(options, std::cout);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  return kExitUsage;
}
