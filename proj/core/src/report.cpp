#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "blockscope/campaign.hpp"
#include "blockscope/records.hpp"

namespace blockscope {

namespace {

// Column order follows the crawl-result table: the HTTP classes, the network
// failures, Other before Timed Out, with the redirect column appended so the
// ten classes still partition every record and rows sum to the list size.
constexpr std::array<StatusClass, kStatusClassCount> kColumnOrder = {
    StatusClass::Ok2xx,        StatusClass::Forbidden403, StatusClass::Client4xxOther,
    StatusClass::Unavailable503, StatusClass::Server5xxOther, StatusClass::ConnError,
    StatusClass::DnsError,     StatusClass::Other,        StatusClass::Timeout,
    StatusClass::RedirectLoop,
};

constexpr std::array<const char*, kStatusClassCount> kColumnNames = {
    "2XX", "403", "4XX (Other)", "503", "5XX (Other)",
    "Conn. Err", "DNS Err", "Other", "Timed Out", "Redirects",
};

std::string format_avg(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::string vantage_row_label(const Vantage& v) {
  return v.country + ", " + v.city + " (" + std::string(network_kind_name(v.network_kind)) +
         ")";
}

struct VantageTally {
  std::array<std::size_t, kStatusClassCount> counts{};
  std::set<int> runs;
  std::size_t total = 0;
};

struct Cell {
  std::array<std::size_t, kStatusClassCount> counts{};
  std::size_t total = 0;

  StatusClass majority() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
      if (counts[i] > counts[best]) best = i;
    }
    return static_cast<StatusClass>(best);
  }
  bool unanimous() const {
    for (std::size_t c : counts) {
      if (c == total) return true;
    }
    return false;
  }
};

}  // namespace

void cmd_report(const ReportOptions& options, std::ostream& diag) {
  auto roster = load_vantages(options.vantage_file);
  std::map<std::string, Vantage> by_id;
  std::vector<std::string> vantage_order;
  std::vector<std::string> region_order;
  for (const auto& v : roster) {
    by_id.emplace(v.id, v);
    vantage_order.push_back(v.id);
    if (std::find(region_order.begin(), region_order.end(), v.region_label) ==
        region_order.end()) {
      region_order.push_back(v.region_label);
    }
  }

  std::map<std::string, VantageTally> tallies;
  std::map<std::string, std::map<std::string, Cell>> matrix;  // url -> region -> cell
  std::set<std::string> urls;

  for (const auto& file : expand_log_inputs(options.logs)) {
    for (const auto& record : read_log(file)) {
      auto vit = by_id.find(record.vantage_id);
      if (vit == by_id.end()) {
        diag << "warning: vantage '" << record.vantage_id
             << "' is not in the roster; using its id as label\n";
        Vantage unknown;
        unknown.id = record.vantage_id;
        unknown.country = record.vantage_id;
        unknown.region_label = record.vantage_id;
        vit = by_id.emplace(record.vantage_id, unknown).first;
        vantage_order.push_back(record.vantage_id);
        region_order.push_back(record.vantage_id);
      }
      auto& tally = tallies[record.vantage_id];
      ++tally.counts[static_cast<std::size_t>(record.status_class)];
      ++tally.total;
      tally.runs.insert(record.run_index);

      auto& cell = matrix[record.url.raw][vit->second.region_label];
      ++cell.counts[static_cast<std::size_t>(record.status_class)];
      ++cell.total;
      urls.insert(record.url.raw);
    }
  }

  std::filesystem::create_directories(options.out_dir);

  // (a) per-vantage class counts, averaged across runs
  {
    std::ofstream csv(options.out_dir / "class_counts.csv", std::ios::trunc);
    std::ofstream md(options.out_dir / "class_counts.md", std::ios::trunc);
    csv << "vantage";
    md << "| Location/response |";
    for (const auto* name : kColumnNames) {
      csv << ',' << name;
      md << ' ' << name << " |";
    }
    csv << ",Total\n";
    md << " Total |\n|---|";
    for (std::size_t i = 0; i <= kColumnNames.size(); ++i) md << "---|";
    md << "\n";

    for (const auto& id : vantage_order) {
      auto it = tallies.find(id);
      if (it == tallies.end()) continue;
      const auto& tally = it->second;
      double runs = tally.runs.empty() ? 1.0 : static_cast<double>(tally.runs.size());
      std::string label = vantage_row_label(by_id.at(id));
      csv << '"' << label << '"';
      md << "| " << label << " |";
      double total = 0;
      for (StatusClass cls : kColumnOrder) {
        double avg = tally.counts[static_cast<std::size_t>(cls)] / runs;
        total += avg;
        csv << ',' << format_avg(avg);
        md << ' ' << format_avg(avg) << " |";
      }
      csv << ',' << format_avg(total) << '\n';
      md << ' ' << format_avg(total) << " |\n";
    }
  }

  // (b) per-URL x per-region majority matrix, dagger when runs disagree
  {
    std::ofstream csv(options.out_dir / "matrix.csv", std::ios::trunc);
    std::ofstream md(options.out_dir / "matrix.md", std::ios::trunc);
    csv << "url";
    md << "| URL/Region |";
    for (const auto& region : region_order) {
      csv << ',' << region;
      md << ' ' << region << " |";
    }
    csv << "\n";
    md << "\n|---|";
    for (std::size_t i = 0; i < region_order.size(); ++i) md << "---|";
    md << "\n";

    for (const auto& url : urls) {
      csv << url;
      md << "| " << url << " |";
      const auto& row = matrix[url];
      for (const auto& region : region_order) {
        std::string text;
        auto cit = row.find(region);
        if (cit != row.end() && cit->second.total > 0) {
          text = std::string(status_class_code(cit->second.majority()));
          if (!cit->second.unanimous()) text += "†";
        }
        csv << ',' << text;
        md << ' ' << (text.empty() ? "-" : text) << " |";
      }
      csv << '\n';
      md << "\n";
    }
  }

  diag << "report: " << urls.size() << " URLs, " << tallies.size() << " vantages, "
       << region_order.size() << " regions -> " << options.out_dir.string() << "\n";
}

}  // namespace blockscope
