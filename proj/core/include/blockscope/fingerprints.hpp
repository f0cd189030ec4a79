#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "blockscope/types.hpp"

namespace blockscope {

// One block-page fingerprint. Rules are matched case-insensitively against
// the body text, in file order (first match wins).
struct FingerprintRule {
  std::string pattern;
  BlockpageClass label = BlockpageClass::StaticDeny;
  std::string source_note;
  std::regex compiled;
};

// Tab-separated rule file: label<TAB>pattern<TAB>note. '#' starts a comment
// line. Unknown labels, labels a body rule may not carry (NotBlockpage,
// NonHttpBlock) and regexes that fail to compile raise FileLoadError with the
// line number.
std::vector<FingerprintRule> load_fingerprints(const std::filesystem::path& file);
std::vector<FingerprintRule> parse_fingerprints(std::istream& in, const std::string& name);

// First matching rule's label; NotBlockpage when none match. The status code
// never vetoes a match: a 200 body that matches is still a block page.
BlockpageClass classify_body(std::string_view body, int http_status,
                             const std::vector<FingerprintRule>& rules);

// Block-type taxonomy over a whole outcome: body-derived labels pass through,
// and blockless failure modes (connection/DNS/timeout/redirect trouble) map
// to NonHttpBlock. nullopt when the outcome shows no blocking evidence.
std::optional<BlockpageClass> block_type(StatusClass status_class,
                                         std::optional<BlockpageClass> blockpage);

}  // namespace blockscope
