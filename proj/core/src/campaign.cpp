#include "blockscope/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "blockscope/records.hpp"
#include "blockscope/url.hpp"

namespace blockscope {

std::int64_t SystemClock::now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

namespace {

// Bounded worker pool over [0, n). The first exception aborts the batch and
// is rethrown on the caller's thread after all workers drain.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  workers = std::clamp<int>(workers, 1, static_cast<int>(n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (int i = 0; i < workers; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// Serialized append-only line sink; every line is flushed so a killed
// campaign loses at most a partial final line.
class AppendSink {
 public:
  explicit AppendSink(const std::filesystem::path& file)
      : out_(file, std::ios::app), path_(file) {
    if (!out_) throw std::runtime_error("cannot open for append: " + file.string());
  }
  void append(const std::string& line) {
    std::lock_guard lock(mutex_);
    out_ << line << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
  std::mutex mutex_;
};

std::string csv_cell(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

}  // namespace

// ---- shared helpers ----------------------------------------------------------

std::vector<std::string> load_url_list(const std::filesystem::path& file,
                                       std::size_t* duplicates) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open URL list");
  std::vector<std::string> urls;
  std::set<std::string> seen;
  std::size_t dup_count = 0;
  std::string line;
  while (std::getline(in, line)) {
    auto key = normalize_url_line(line);
    if (!key) continue;
    if (!seen.insert(*key).second) {
      ++dup_count;
      continue;
    }
    // Keep the entry as listed (trimmed); the key is only for de-duplication.
    auto begin = line.find_first_not_of(" \t\r");
    auto end = line.find_last_not_of(" \t\r");
    urls.push_back(line.substr(begin, end - begin + 1));
  }
  if (duplicates) *duplicates = dup_count;
  return urls;
}

std::vector<std::filesystem::path> expand_log_inputs(
    const std::vector<std::filesystem::path>& inputs) {
  std::vector<std::filesystem::path> files;
  for (const auto& input : inputs) {
    if (std::filesystem::is_directory(input)) {
      for (const auto& entry : std::filesystem::directory_iterator(input)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
          files.push_back(entry.path());
        }
      }
    } else {
      files.push_back(input);
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::filesystem::path crawl_log_path(const std::filesystem::path& dir,
                                     const std::string& vantage_id, int run) {
  return dir / (vantage_id + ".run" + std::to_string(run) + ".jsonl");
}

std::filesystem::path crawl_checkpoint_path(const std::filesystem::path& dir,
                                            const std::string& vantage_id) {
  return dir / (vantage_id + ".checkpoint");
}

// ---- crawl -------------------------------------------------------------------

namespace {

// Valid records of a possibly interrupted log. Only the final line may be
// partial (the writer flushes per line); it is dropped and the file rewritten.
// A malformed line elsewhere means real corruption and aborts.
std::vector<FetchOutcome> recover_log(const std::filesystem::path& file,
                                      std::ostream& diag) {
  std::vector<FetchOutcome> records;
  std::ifstream in(file);
  if (!in) return records;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  in.close();

  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      records.push_back(decode_record(lines[i]));
    } catch (const SchemaError& e) {
      if (i + 1 != lines.size()) {
        throw std::runtime_error(file.string() + ":" + std::to_string(i + 1) +
                                 ": corrupt record mid-log: " + e.what());
      }
      diag << "warning: dropping partial final record in " << file.string() << "\n";
      std::ofstream out(file, std::ios::trunc);
      for (std::size_t k = 0; k + 1 < lines.size(); ++k) out << lines[k] << '\n';
    }
  }
  return records;
}

}  // namespace

CrawlStats cmd_crawl(const CampaignManifest& manifest, HttpTransport& transport,
                     Resolver& resolver, Clock& clock, std::ostream& diag) {
  manifest.config.validate();
  if (manifest.runs < 1) throw ContractError("runs must be >= 1");

  CrawlStats stats;
  auto urls = load_url_list(manifest.url_list, &stats.duplicate_urls);
  if (stats.duplicate_urls > 0) {
    diag << "warning: dropped " << stats.duplicate_urls << " duplicate URL(s)\n";
  }
  if (urls.empty()) {
    throw std::runtime_error("URL list is empty: " + manifest.url_list.string());
  }
  stats.urls = urls.size();
  stats.runs = static_cast<std::size_t>(manifest.runs);

  std::error_code ec;
  std::filesystem::create_directories(manifest.output_dir, ec);
  if (ec || !std::filesystem::is_directory(manifest.output_dir)) {
    throw std::runtime_error("output directory is not writable: " +
                             manifest.output_dir.string());
  }

  std::vector<FingerprintRule> rules;
  if (!manifest.fingerprints.empty()) rules = load_fingerprints(manifest.fingerprints);

  // The log itself is the source of truth for completed work; the checkpoint
  // file mirrors it for quick inspection and is reconciled here.
  std::set<std::pair<int, std::string>> completed;
  for (int run = 0; run < manifest.runs; ++run) {
    for (const auto& record :
         recover_log(crawl_log_path(manifest.output_dir, manifest.vantage.id, run), diag)) {
      completed.emplace(run, record.url.raw);
    }
  }
  {
    std::ofstream checkpoint(crawl_checkpoint_path(manifest.output_dir, manifest.vantage.id),
                             std::ios::trunc);
    for (const auto& [run, url] : completed) checkpoint << run << '\t' << url << '\n';
  }
  stats.resumed = completed.size();

  AppendSink checkpoint_sink(crawl_checkpoint_path(manifest.output_dir, manifest.vantage.id));
  std::atomic<std::size_t> fetched{0};

  for (int run = 0; run < manifest.runs; ++run) {
    std::vector<std::string> order = urls;
    std::mt19937_64 rng(manifest.seed ^ (0x9e3779b97f4a7c15ull * (run + 1)));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::string> pending;
    for (auto& url : order) {
      if (!completed.count({run, url})) pending.push_back(url);
    }
    if (pending.empty()) continue;

    AppendSink log_sink(crawl_log_path(manifest.output_dir, manifest.vantage.id, run));
    parallel_for(pending.size(), manifest.concurrency, [&](std::size_t i) {
      const std::string& url = pending[i];
      FetchRequest request;
      request.config = manifest.config;
      request.vantage_id = manifest.vantage.id;
      request.run_index = run;
      request.timestamp_ms = clock.now_ms();
      try {
        request.target = resolve_with_www_fallback(url, resolver).target;
      } catch (const ContractError&) {
        // Unparsable list entry: record it as a DnsError-class outcome so the
        // campaign never drops a URL silently.
        FetchOutcome outcome;
        outcome.url.raw = url;
        outcome.url.effective = url;
        outcome.url.host = url;
        outcome.vantage_id = manifest.vantage.id;
        outcome.run_index = run;
        outcome.status_class = StatusClass::DnsError;
        outcome.final_url = url;
        outcome.timestamp_ms = request.timestamp_ms;
        log_sink.append(encode_record(outcome));
        checkpoint_sink.append(std::to_string(run) + "\t" + url);
        fetched.fetch_add(1);
        return;
      }
      FetchOutcome outcome = fetch(request, transport, rules);
      log_sink.append(encode_record(outcome));
      checkpoint_sink.append(std::to_string(run) + "\t" + url);
      fetched.fetch_add(1);
    });
    diag << "run " << run << ": " << pending.size() << " fetched, "
         << order.size() - pending.size() << " resumed\n";
  }

  stats.fetched = fetched.load();
  return stats;
}

// ---- shortlist ---------------------------------------------------------------

namespace {

struct RegionLogs {
  std::map<std::string, std::vector<FetchOutcome>> by_url;
  std::set<std::pair<std::string, int>> observations;  // (vantage, run)
};

RegionLogs group_records(const std::vector<std::filesystem::path>& inputs) {
  RegionLogs logs;
  for (const auto& file : expand_log_inputs(inputs)) {
    for (auto& record : read_log(file)) {
      logs.observations.emplace(record.vantage_id, record.run_index);
      logs.by_url[record.url.raw].push_back(std::move(record));
    }
  }
  return logs;
}

bool any_available(const std::vector<FetchOutcome>& records) {
  return std::any_of(records.begin(), records.end(),
                     [](const FetchOutcome& r) { return availability_of(r); });
}

}  // namespace

void write_shortlist_csv(const std::filesystem::path& file,
                         const std::vector<ShortlistEntry>& entries) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write shortlist: " + file.string());
  out << "url,control_region,test_region,failure_class,listing\n";
  for (const auto& e : entries) {
    out << csv_cell(e.url) << ',' << csv_cell(e.control_region) << ','
        << csv_cell(e.test_region) << ',' << status_class_name(e.failure_class) << ','
        << (e.listing ? listing_signal_name(*e.listing) : std::string_view{}) << '\n';
  }
}

std::vector<ShortlistEntry> read_shortlist_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open shortlist");
  std::vector<ShortlistEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line_no == 1) continue;  // header
    auto cells = parse_csv_line(line);
    if (cells.size() < 4) {
      throw FileLoadError(file.string(), line_no, "expected at least 4 columns");
    }
    ShortlistEntry e;
    e.url = cells[0];
    e.control_region = cells[1];
    e.test_region = cells[2];
    auto cls = status_class_from_name(cells[3]);
    if (!cls) {
      throw FileLoadError(file.string(), line_no, "unknown failure class " + cells[3]);
    }
    e.failure_class = *cls;
    if (cells.size() >= 5 && !cells[4].empty()) {
      e.listing = listing_signal_from_name(cells[4]);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

FunnelSummary cmd_shortlist(const ShortlistOptions& options, std::ostream& diag) {
  RegionLogs control = group_records(options.control_logs);
  RegionLogs test = group_records(options.test_logs);
  if (test.by_url.empty()) throw std::runtime_error("no test observations");
  if (control.by_url.empty()) throw std::runtime_error("no control observations");

  // The two sides should cover the same URL universe; survive mismatches by
  // warning and proceeding on the intersection.
  std::vector<std::string> only_control, only_test;
  for (const auto& [url, _] : control.by_url) {
    if (!test.by_url.count(url)) only_control.push_back(url);
  }
  for (const auto& [url, _] : test.by_url) {
    if (!control.by_url.count(url)) only_test.push_back(url);
  }
  if (!only_control.empty() || !only_test.empty()) {
    diag << "warning: URL universes differ; proceeding on the intersection\n";
    for (const auto& u : only_control) diag << "  only in control: " << u << "\n";
    for (const auto& u : only_test) diag << "  only in test: " << u << "\n";
  }

  std::map<std::string, RegionVerdict> control_verdicts;
  std::map<std::string, RegionVerdict> test_verdicts;
  FunnelSummary funnel;
  for (const auto& [url, records] : control.by_url) {
    auto it = test.by_url.find(url);
    if (it == test.by_url.end()) continue;
    ++funnel.total;
    auto cv = aggregate_region_expecting(records, options.control_label,
                                         control.observations.size());
    auto tv = aggregate_region_expecting(it->second, options.test_label,
                                         test.observations.size());
    if (cv.kind == RegionKind::AlwaysAvailable) ++funnel.control_always_available;
    if (tv.kind == RegionKind::AlwaysUnavailableConsistent ||
        tv.kind == RegionKind::AlwaysUnavailableMixed) {
      ++funnel.test_always_unavailable;
    }
    if (tv.kind == RegionKind::AlwaysUnavailableConsistent) ++funnel.test_same_problem;
    control_verdicts.emplace(url, std::move(cv));
    test_verdicts.emplace(url, std::move(tv));
  }

  auto entries = shortlist(control_verdicts, test_verdicts);
  funnel.short_listed = entries.size();

  // Optional whitelist/blacklist inference over extra probe regions.
  if (!options.probe_logs.empty()) {
    std::map<std::string, RegionLogs> probes;
    std::set<std::string> probe_labels;
    for (const auto& [label, inputs] : options.probe_logs) {
      probes.emplace(label, group_records(inputs));
      probe_labels.insert(label);
    }
    for (auto& entry : entries) {
      std::map<std::string, bool> availability;
      availability[options.control_label] =
          control_verdicts.at(entry.url).kind == RegionKind::AlwaysAvailable;
      availability[options.test_label] = any_available(test.by_url.at(entry.url));
      bool missing = false;
      for (const auto& [label, logs] : probes) {
        auto it = logs.by_url.find(entry.url);
        if (it == logs.by_url.end()) {
          missing = true;
          break;
        }
        // Probe vantages are often VPNs: a finding of availability counts,
        // a finding of unavailability stays weak evidence.
        availability[label] = any_available(it->second);
      }
      if (missing) {
        diag << "warning: no probe-region coverage for " << entry.url
             << "; listing left blank\n";
        continue;
      }
      entry.listing = infer_listing(entry.url, availability, options.control_label,
                                    probe_labels);
    }
  }

  write_shortlist_csv(options.out_csv, entries);

  diag << "total: " << funnel.total << "\n";
  diag << "control always available: " << funnel.control_always_available << "\n";
  diag << "test always unavailable: " << funnel.test_always_unavailable << "\n";
  diag << "test same problem: " << funnel.test_same_problem << "\n";
  diag << "short-listed: " << funnel.short_listed << "\n";
  return funnel;
}

// ---- trace -------------------------------------------------------------------

namespace {

using nlohmann::ordered_json;

ordered_json trace_run_to_json(const TraceRun& run) {
  ordered_json j;
  j["protocol"] = trace_protocol_name(run.protocol);
  j["destination"] = run.destination;
  j["complete"] = run.complete;
  j["path_length"] = run.path_length;
  j["underapproximate"] = run.underapproximate;
  ordered_json hops = ordered_json::array();
  for (const auto& h : run.hops) {
    ordered_json hop;
    hop["ttl"] = h.ttl;
    hop["kind"] = hop_kind_name(h.kind);
    if (h.responder) hop["responder"] = *h.responder;
    if (h.rtt_ms) hop["rtt_ms"] = *h.rtt_ms;
    hops.push_back(std::move(hop));
  }
  j["hops"] = std::move(hops);
  return j;
}

TraceRun trace_run_from_json(const nlohmann::json& j) {
  TraceRun run;
  std::string proto = j.value("protocol", "icmp");
  run.protocol = proto == "tcp"    ? TraceProtocol::Tcp
                 : proto == "http" ? TraceProtocol::Http
                                   : TraceProtocol::Icmp;
  run.destination = j.value("destination", "");
  run.complete = j.value("complete", false);
  run.path_length = j.value("path_length", 0);
  run.underapproximate = j.value("underapproximate", false);
  for (const auto& h : j.value("hops", nlohmann::json::array())) {
    HopRecord hop;
    hop.ttl = h.value("ttl", 0);
    std::string kind = h.value("kind", "NoReply");
    for (int k = 0; k <= static_cast<int>(HopKind::NoReply); ++k) {
      if (hop_kind_name(static_cast<HopKind>(k)) == kind) {
        hop.kind = static_cast<HopKind>(k);
        break;
      }
    }
    if (h.contains("responder")) hop.responder = h["responder"].get<std::string>();
    if (h.contains("rtt_ms")) hop.rtt_ms = h["rtt_ms"].get<double>();
    run.hops.push_back(std::move(hop));
  }
  return run;
}

}  // namespace

std::string verdicts_to_json(const std::string& vantage_id,
                             const std::vector<VerdictRecord>& records,
                             const TraceSummary& summary) {
  ordered_json doc;
  doc["vantage"] = vantage_id;
  ordered_json verdicts = ordered_json::array();
  for (const auto& r : records) {
    ordered_json v;
    v["url"] = r.verdict.url;
    v["kind"] = verdict_kind_name(r.verdict.kind);
    v["reason"] = verdict_reason_name(r.verdict.reason);
    v["dns_error"] = r.dns_error;
    v["icmp"] = r.verdict.icmp ? trace_run_to_json(*r.verdict.icmp) : ordered_json();
    v["tcp"] = r.verdict.tcp ? trace_run_to_json(*r.verdict.tcp) : ordered_json();
    v["http"] = r.verdict.http ? trace_run_to_json(*r.verdict.http) : ordered_json();
    verdicts.push_back(std::move(v));
  }
  doc["verdicts"] = std::move(verdicts);
  doc["summary"] = {
      {"server_side", summary.server_side},
      {"middlebox_suspected", summary.middlebox_suspected},
      {"inconclusive", summary.inconclusive},
      {"tree",
       {{"inconclusive",
         {{"dns_error", summary.dns_error},
          {"no_syn_ack", summary.no_syn_ack},
          {"other", summary.other_inconclusive}}},
        {"conclusive",
         {{"stopped_short", summary.stopped_short},
          {"made_it_to_server", summary.made_it_to_server}}}}},
  };
  return doc.dump(2);
}

std::vector<VerdictRecord> verdicts_from_json(std::string_view json_text,
                                              std::string* vantage_id) {
  nlohmann::json doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw SchemaError("<json>", "verdict document is not a JSON object");
  }
  if (vantage_id) *vantage_id = doc.value("vantage", "");
  std::vector<VerdictRecord> out;
  for (const auto& v : doc.value("verdicts", nlohmann::json::array())) {
    VerdictRecord r;
    r.verdict.url = v.value("url", "");
    r.verdict.vantage_id = doc.value("vantage", "");
    auto kind = verdict_kind_from_name(v.value("kind", ""));
    auto reason = verdict_reason_from_name(v.value("reason", ""));
    if (!kind || !reason) throw SchemaError("kind", "unknown verdict kind/reason");
    r.verdict.kind = *kind;
    r.verdict.reason = *reason;
    r.dns_error = v.value("dns_error", false);
    if (v.contains("icmp") && v["icmp"].is_object()) {
      r.verdict.icmp = trace_run_from_json(v["icmp"]);
    }
    if (v.contains("tcp") && v["tcp"].is_object()) {
      r.verdict.tcp = trace_run_from_json(v["tcp"]);
    }
    if (v.contains("http") && v["http"].is_object()) {
      r.verdict.http = trace_run_from_json(v["http"]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

TraceSummary cmd_trace(const TraceOptions& options, ProbeTransport& transport,
                       Resolver& resolver, std::ostream& diag) {
  options.config.validate();
  auto entries = read_shortlist_csv(options.shortlist_csv);
  std::vector<VerdictRecord> records(entries.size());

  parallel_for(entries.size(), options.concurrency, [&](std::size_t i) {
    const auto& entry = entries[i];
    VerdictRecord& record = records[i];
    record.verdict.url = entry.url;
    record.verdict.vantage_id = options.vantage_id;

    auto parsed = parse_url(entry.url);
    std::optional<std::vector<std::string>> addrs;
    if (parsed) addrs = resolver.resolve(parsed->host);
    if (!parsed || !addrs || addrs->empty()) {
      // Never resolved: no probes to send. The verdict is inconclusive with
      // an explicit DNS annotation (its own leaf in the summary tree).
      record.dns_error = true;
      record.verdict.kind = VerdictKind::Inconclusive;
      record.verdict.reason = VerdictReason::NoIcmpBaseline;
      return;
    }
    const std::string& address = addrs->front();
    record.verdict =
        run_differential(address, parsed->host, parsed->path, options.config, transport);
    record.verdict.url = entry.url;
    record.verdict.vantage_id = options.vantage_id;
  });

  TraceSummary summary;
  for (const auto& r : records) {
    switch (r.verdict.kind) {
      case VerdictKind::ServerSide:
        ++summary.server_side;
        ++summary.made_it_to_server;
        break;
      case VerdictKind::MiddleboxSuspected:
        ++summary.middlebox_suspected;
        ++summary.stopped_short;
        break;
      case VerdictKind::Inconclusive:
        ++summary.inconclusive;
        if (r.dns_error) {
          ++summary.dns_error;
        } else if (r.verdict.reason == VerdictReason::NoTcpResponse) {
          ++summary.no_syn_ack;
        } else {
          ++summary.other_inconclusive;
        }
        break;
    }
  }

  std::ofstream out(options.out_json, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write verdicts: " + options.out_json.string());
  out << verdicts_to_json(options.vantage_id, records, summary) << "\n";

  diag << "traced: " << records.size() << "\n";
  diag << "server-side: " << summary.server_side << "\n";
  diag << "middlebox suspected: " << summary.middlebox_suspected << "\n";
  diag << "inconclusive: " << summary.inconclusive << " (dns " << summary.dns_error
       << ", no syn-ack " << summary.no_syn_ack << ", other "
       << summary.other_inconclusive << ")\n";
  return summary;
}

// ---- annotate ----------------------------------------------------------------

AnnotatedTree cmd_annotate(const AnnotateOptions& options, std::ostream& diag) {
  std::ifstream in(options.verdicts_json);
  if (!in) throw FileLoadError(options.verdicts_json.string(), 0, "cannot open verdicts");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string vantage_id;
  auto records = verdicts_from_json(buf.str(), &vantage_id);

  std::set<std::string> known;
  for (const auto& r : records) known.insert(r.verdict.url);

  std::map<std::string, ManualAnnotation> by_url;
  if (!options.annotations.empty()) {
    for (const auto& a : load_annotations(options.annotations)) {
      if (!known.count(a.url)) {
        diag << "warning: annotation for unknown URL skipped: " << a.url << "\n";
        continue;
      }
      if (by_url.count(a.url)) {
        diag << "warning: duplicate annotation for " << a.url << "; last one wins\n";
      }
      by_url[a.url] = a;
    }
  }

  AnnotatedTree tree;
  tree.short_listed = records.size();
  ordered_json urls = ordered_json::array();
  for (const auto& r : records) {
    ordered_json u;
    u["url"] = r.verdict.url;
    u["kind"] = verdict_kind_name(r.verdict.kind);
    u["reason"] = verdict_reason_name(r.verdict.reason);
    u["dns_error"] = r.dns_error;

    auto it = by_url.find(r.verdict.url);
    if (it != by_url.end()) {
      u["manual_result"] = manual_result_name(it->second.result);
      if (!it->second.note.empty()) u["manual_note"] = it->second.note;
    }
    if (it != by_url.end() && it->second.result != ManualResult::NotAvailable) {
      ++tree.manually_available;
      switch (it->second.result) {
        case ManualResult::AvailableWithCaptcha: ++tree.with_captcha; break;
        case ManualResult::AvailableWithDelay: ++tree.with_delay; break;
        default: ++tree.without_issues; break;
      }
    } else {
      ++tree.not_manually_available;
      switch (r.verdict.kind) {
        case VerdictKind::Inconclusive:
          ++tree.inconclusive;
          if (r.dns_error) {
            ++tree.inconclusive_dns_error;
          } else if (r.verdict.reason == VerdictReason::NoTcpResponse) {
            ++tree.inconclusive_no_syn_ack;
          } else {
            ++tree.inconclusive_other;
          }
          break;
        case VerdictKind::MiddleboxSuspected:
          ++tree.conclusive;
          ++tree.stopped_short;
          break;
        case VerdictKind::ServerSide:
          ++tree.conclusive;
          ++tree.made_it_to_server;
          break;
      }
    }
    urls.push_back(std::move(u));
  }

  ordered_json doc;
  doc["vantage"] = vantage_id;
  doc["tree"] = {
      {"short_listed", tree.short_listed},
      {"manually_available",
       {{"total", tree.manually_available},
        {"with_captcha", tree.with_captcha},
        {"with_delay", tree.with_delay},
        {"without_issues", tree.without_issues}}},
      {"not_manually_available",
       {{"total", tree.not_manually_available},
        {"traceroute_inconclusive",
         {{"total", tree.inconclusive},
          {"dns_error", tree.inconclusive_dns_error},
          {"no_syn_ack", tree.inconclusive_no_syn_ack},
          {"other", tree.inconclusive_other}}},
        {"traceroute_conclusive",
         {{"total", tree.conclusive},
          {"stopped_short", tree.stopped_short},
          {"made_it_to_server", tree.made_it_to_server}}}}},
  };
  doc["urls"] = std::move(urls);

  std::ofstream out(options.out_json, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report: " + options.out_json.string());
  out << doc.dump(2) << "\n";

  diag << "Short-listed URLs: " << tree.short_listed << "\n"
       << "  Manually available: " << tree.manually_available << "\n"
       << "    With CAPTCHA: " << tree.with_captcha << "\n"
       << "    With delay: " << tree.with_delay << "\n"
       << "    Without issues: " << tree.without_issues << "\n"
       << "  Not manually available: " << tree.not_manually_available << "\n"
       << "    Traceroute inconclusive: " << tree.inconclusive << "\n"
       << "      DNS error: " << tree.inconclusive_dns_error << "\n"
       << "      No SYN-ACK: " << tree.inconclusive_no_syn_ack << "\n"
       << "      Other: " << tree.inconclusive_other << "\n"
       << "    Traceroute conclusive: " << tree.conclusive << "\n"
       << "      Stopped short: " << tree.stopped_short << "\n"
       << "      Made it to server: " << tree.made_it_to_server << "\n";
  return tree;
}

}  // namespace blockscope
