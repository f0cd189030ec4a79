#include "blockscope/aggregate.hpp"

#include <algorithm>
#include <array>

namespace blockscope {

std::string_view region_kind_name(RegionKind k) {
  switch (k) {
    case RegionKind::AlwaysAvailable: return "AlwaysAvailable";
    case RegionKind::AlwaysUnavailableConsistent: return "AlwaysUnavailableConsistent";
    case RegionKind::AlwaysUnavailableMixed: return "AlwaysUnavailableMixed";
    case RegionKind::Mixed: return "Mixed";
  }
  return "Mixed";
}

std::string_view listing_signal_name(ListingSignal s) {
  switch (s) {
    case ListingSignal::Whitelisting: return "Whitelisting";
    case ListingSignal::Blacklisting: return "Blacklisting";
    case ListingSignal::Ambiguous: return "Ambiguous";
  }
  return "Ambiguous";
}

std::optional<ListingSignal> listing_signal_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ListingSignal::Ambiguous); ++i) {
    auto s = static_cast<ListingSignal>(i);
    if (listing_signal_name(s) == name) return s;
  }
  return std::nullopt;
}

bool availability_of(const FetchOutcome& outcome) {
  if (outcome.status_class != StatusClass::Ok2xx) return false;
  return !outcome.blockpage || *outcome.blockpage == BlockpageClass::NotBlockpage;
}

RegionVerdict aggregate_region(const std::vector<FetchOutcome>& records,
                               const std::string& region_label) {
  if (records.empty()) {
    throw ContractError("aggregate_region: empty record set");
  }
  const std::string& url = records.front().url.raw;
  for (const auto& r : records) {
    if (r.url.raw != url) {
      throw ContractError("aggregate_region: records span multiple URLs");
    }
  }

  std::array<std::size_t, kStatusClassCount> counts{};
  std::size_t available = 0;
  bool consistent = true;
  StatusClass first_class = records.front().status_class;
  for (const auto& r : records) {
    ++counts[static_cast<std::size_t>(r.status_class)];
    if (availability_of(r)) ++available;
    if (r.status_class != first_class) consistent = false;
  }

  RegionVerdict verdict;
  verdict.url = url;
  verdict.region_label = region_label;

  // Ties break toward the smaller enum value; scanning in declaration order
  // with a strict '>' does exactly that.
  std::size_t best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = i;
  }
  verdict.majority_class = static_cast<StatusClass>(best);

  if (available == records.size()) {
    verdict.kind = RegionKind::AlwaysAvailable;
  } else if (available > 0) {
    verdict.kind = RegionKind::Mixed;
  } else if (consistent) {
    verdict.kind = RegionKind::AlwaysUnavailableConsistent;
    verdict.failure_class = first_class;
  } else {
    verdict.kind = RegionKind::AlwaysUnavailableMixed;
  }
  return verdict;
}

RegionVerdict aggregate_region_expecting(const std::vector<FetchOutcome>& records,
                                         const std::string& region_label,
                                         std::size_t expected_observations) {
  RegionVerdict verdict = aggregate_region(records, region_label);
  if (records.size() < expected_observations && verdict.kind != RegionKind::Mixed) {
    verdict.kind = RegionKind::Mixed;
    verdict.failure_class.reset();
  }
  return verdict;
}

std::vector<ShortlistEntry> shortlist(const std::map<std::string, RegionVerdict>& control,
                                      const std::map<std::string, RegionVerdict>& test) {
  std::vector<ShortlistEntry> out;
  for (const auto& [url, test_verdict] : test) {
    if (test_verdict.kind != RegionKind::AlwaysUnavailableConsistent) continue;
    auto it = control.find(url);
    if (it == control.end() || it->second.kind != RegionKind::AlwaysAvailable) continue;
    ShortlistEntry entry;
    entry.url = url;
    entry.control_region = it->second.region_label;
    entry.test_region = test_verdict.region_label;
    entry.failure_class = *test_verdict.failure_class;
    out.push_back(std::move(entry));
  }
  // std::map iteration is already URL-sorted; keep the guarantee explicit.
  std::sort(out.begin(), out.end(),
            [](const ShortlistEntry& a, const ShortlistEntry& b) { return a.url < b.url; });
  return out;
}

ListingSignal infer_listing(const std::string& url,
                            const std::map<std::string, bool>& availability_by_region,
                            const std::string& home_region,
                            const std::set<std::string>& probe_regions) {
  auto home_it = availability_by_region.find(home_region);
  if (home_it == availability_by_region.end()) {
    throw ContractError("infer_listing: no availability for home region '" + home_region +
                        "' (url " + url + ")");
  }
  for (const auto& probe : probe_regions) {
    if (!availability_by_region.count(probe)) {
      throw ContractError("infer_listing: no availability for probe region '" + probe +
                          "' (url " + url + ")");
    }
  }
  if (!home_it->second) return ListingSignal::Ambiguous;

  bool only_home = true;
  for (const auto& [region, available] : availability_by_region) {
    if (region != home_region && available) {
      only_home = false;
      break;
    }
  }
  if (only_home) return ListingSignal::Whitelisting;

  if (!probe_regions.empty()) {
    bool all_probes = std::all_of(probe_regions.begin(), probe_regions.end(),
                                  [&](const std::string& p) {
                                    return availability_by_region.at(p);
                                  });
    if (all_probes) return ListingSignal::Blacklisting;
  }
  return ListingSignal::Ambiguous;
}

}  // namespace blockscope
