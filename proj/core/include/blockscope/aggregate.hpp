#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blockscope/types.hpp"

namespace blockscope {

enum class RegionKind {
  AlwaysAvailable,
  AlwaysUnavailableConsistent,
  AlwaysUnavailableMixed,
  Mixed,
};
std::string_view region_kind_name(RegionKind k);

// Per-URL, per-region aggregate over every vantage and run of the region.
struct RegionVerdict {
  std::string url;
  std::string region_label;
  RegionKind kind = RegionKind::Mixed;
  std::optional<StatusClass> failure_class;  // iff AlwaysUnavailableConsistent
  StatusClass majority_class = StatusClass::Other;

  bool operator==(const RegionVerdict&) const = default;
};

enum class ListingSignal { Whitelisting, Blacklisting, Ambiguous };
std::string_view listing_signal_name(ListingSignal s);
std::optional<ListingSignal> listing_signal_from_name(std::string_view name);

struct ShortlistEntry {
  std::string url;
  std::string control_region;
  std::string test_region;
  StatusClass failure_class = StatusClass::Other;
  std::optional<ListingSignal> listing;

  bool operator==(const ShortlistEntry&) const = default;
};

// Available = clean 200-class: Ok2xx and no block page. A 200 whose body
// matched a block-page fingerprint counts as unavailable.
bool availability_of(const FetchOutcome& outcome);

// Folds all observations of one URL within one region. Minimum rule: the URL
// is AlwaysAvailable only when every observation is available. Unavailable
// regions split by failure-mode consistency (one StatusClass vs several).
// majority_class is always computed; ties break by enum declaration order.
// Throws ContractError on an empty record set or mixed URLs.
RegionVerdict aggregate_region(const std::vector<FetchOutcome>& records,
                               const std::string& region_label);

// Same fold, but a URL missing observations for any expected (vantage, run)
// pair is demoted to Mixed: absent data must not manufacture blocking claims.
RegionVerdict aggregate_region_expecting(const std::vector<FetchOutcome>& records,
                                         const std::string& region_label,
                                         std::size_t expected_observations);

// Keeps exactly the URLs always available in the control region and always
// unavailable in one consistent failure mode in the test region. Output is
// sorted by URL.
std::vector<ShortlistEntry> shortlist(const std::map<std::string, RegionVerdict>& control,
                                      const std::map<std::string, RegionVerdict>& test);

// Cross-region listing inference for a short-listed URL. Whitelisting: the
// home region is the only available one. Blacklisting: home and every probe
// region load it while the test region is blocked. Anything between is
// Ambiguous. Missing home/probe keys raise ContractError.
ListingSignal infer_listing(const std::string& url,
                            const std::map<std::string, bool>& availability_by_region,
                            const std::string& home_region,
                            const std::set<std::string>& probe_regions);

}  // namespace blockscope
