#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "blockscope/aggregate.hpp"
#include "blockscope/fetcher.hpp"
#include "blockscope/trace.hpp"
#include "blockscope/types.hpp"

namespace blockscope {

// Time source for record timestamps; fixed in simulation so repeated
// campaigns produce identical logs.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
};

class SystemClock : public Clock {
 public:
  std::int64_t now_ms() override;
};

class FixedClock : public Clock {
 public:
  explicit FixedClock(std::int64_t ms) : ms_(ms) {}
  std::int64_t now_ms() override { return ms_; }

 private:
  std::int64_t ms_;
};

// ---- crawl -----------------------------------------------------------------

struct CampaignManifest {
  std::filesystem::path url_list;
  Vantage vantage;
  int runs = 3;
  std::filesystem::path output_dir;
  ProbeConfig config;
  int concurrency = 16;
  std::uint64_t seed = 1;  // politeness shuffle; fixed for reproducibility
  std::filesystem::path fingerprints;  // optional rule file
};

struct CrawlStats {
  std::size_t urls = 0;
  std::size_t runs = 0;
  std::size_t fetched = 0;     // records written by this invocation
  std::size_t resumed = 0;     // records already present and kept
  std::size_t duplicate_urls = 0;
};

// Crawls every URL x run, one JSONL log per run, resumable: completed (url,
// run) pairs are checkpointed and existing log lines are trusted over the
// checkpoint, so an interrupted campaign resumes without duplicating or
// dropping records. Individual URL failures never abort the campaign.
CrawlStats cmd_crawl(const CampaignManifest& manifest, HttpTransport& transport,
                     Resolver& resolver, Clock& clock, std::ostream& diag);

// Log file for one run of a campaign: <dir>/<vantage>.run<k>.jsonl
std::filesystem::path crawl_log_path(const std::filesystem::path& dir,
                                     const std::string& vantage_id, int run);
std::filesystem::path crawl_checkpoint_path(const std::filesystem::path& dir,
                                            const std::string& vantage_id);

// ---- shortlist ---------------------------------------------------------------

struct ShortlistOptions {
  std::vector<std::filesystem::path> control_logs;  // files or directories
  std::vector<std::filesystem::path> test_logs;
  std::string control_label;
  std::string test_label;
  // Optional extra regions for listing inference: label -> logs.
  std::map<std::string, std::vector<std::filesystem::path>> probe_logs;
  std::filesystem::path out_csv;
};

struct FunnelSummary {
  std::size_t total = 0;
  std::size_t control_always_available = 0;
  std::size_t test_always_unavailable = 0;
  std::size_t test_same_problem = 0;
  std::size_t short_listed = 0;
};

// Runs the short-listing pipeline over collected logs and writes the CSV
// (url, control_region, test_region, failure_class, listing). The funnel
// counts are printed to `diag` and returned.
FunnelSummary cmd_shortlist(const ShortlistOptions& options, std::ostream& diag);

std::vector<ShortlistEntry> read_shortlist_csv(const std::filesystem::path& file);
void write_shortlist_csv(const std::filesystem::path& file,
                         const std::vector<ShortlistEntry>& entries);

// ---- trace -------------------------------------------------------------------

struct TraceOptions {
  std::filesystem::path shortlist_csv;
  std::filesystem::path out_json;
  ProbeConfig config;
  std::string vantage_id;
  int concurrency = 4;
};

struct TraceSummary {
  std::size_t server_side = 0;
  std::size_t middlebox_suspected = 0;
  std::size_t inconclusive = 0;
  std::size_t dns_error = 0;     // inconclusive: target never resolved
  std::size_t no_syn_ack = 0;    // inconclusive: no TCP response
  std::size_t other_inconclusive = 0;
  std::size_t stopped_short = 0;         // conclusive: middlebox found
  std::size_t made_it_to_server = 0;     // conclusive: server-side
};

// Runs the three-protocol traceroute differential for every short-listed URL
// and writes verdicts plus full trace evidence as JSON.
TraceSummary cmd_trace(const TraceOptions& options, ProbeTransport& transport,
                       Resolver& resolver, std::ostream& diag);

// Verdict document helpers (shared by trace, annotate, and the tests).
struct VerdictRecord {
  BlockVerdict verdict;
  bool dns_error = false;  // the host never resolved; traces are absent
};
std::string verdicts_to_json(const std::string& vantage_id,
                             const std::vector<VerdictRecord>& records,
                             const TraceSummary& summary);
std::vector<VerdictRecord> verdicts_from_json(std::string_view json_text,
                                              std::string* vantage_id = nullptr);

// ---- report ------------------------------------------------------------------

struct ReportOptions {
  std::vector<std::filesystem::path> logs;  // files or directories
  std::filesystem::path vantage_file;
  std::filesystem::path out_dir;
};

// Emits (a) the per-vantage status-class count table, averaged across runs,
// and (b) the per-URL x per-region majority-class matrix, each as CSV and
// Markdown under out_dir.
void cmd_report(const ReportOptions& options, std::ostream& diag);

// ---- annotate ----------------------------------------------------------------

struct AnnotateOptions {
  std::filesystem::path verdicts_json;
  std::filesystem::path annotations;  // ManualAnnotation JSONL
  std::filesystem::path out_json;
};

struct AnnotatedTree {
  std::size_t short_listed = 0;
  std::size_t manually_available = 0;
  std::size_t with_captcha = 0;
  std::size_t with_delay = 0;
  std::size_t without_issues = 0;
  std::size_t not_manually_available = 0;
  std::size_t inconclusive = 0;
  std::size_t inconclusive_dns_error = 0;
  std::size_t inconclusive_no_syn_ack = 0;
  std::size_t inconclusive_other = 0;
  std::size_t conclusive = 0;
  std::size_t stopped_short = 0;
  std::size_t made_it_to_server = 0;
};

// Merges human manual-check results into a verdict report. Annotations for
// unknown URLs are skipped with a warning; duplicates resolve last-wins.
AnnotatedTree cmd_annotate(const AnnotateOptions& options, std::ostream& diag);

// ---- shared helpers ----------------------------------------------------------

// Reads a URL list: one URL per line, '#' comments, trimmed, de-duplicated
// after normalization (first occurrence wins). Duplicate count is reported.
std::vector<std::string> load_url_list(const std::filesystem::path& file,
                                       std::size_t* duplicates = nullptr);

// Expands files/directories into the .jsonl files they contain (sorted).
std::vector<std::filesystem::path> expand_log_inputs(
    const std::vector<std::filesystem::path>& inputs);

}  // namespace blockscope
