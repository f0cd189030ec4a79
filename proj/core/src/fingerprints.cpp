#include "blockscope/fingerprints.hpp"

#include <fstream>
#include <sstream>

namespace blockscope {

std::vector<FingerprintRule> parse_fingerprints(std::istream& in, const std::string& name) {
  std::vector<FingerprintRule> rules;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    auto tab1 = line.find('\t');
    if (tab1 == std::string::npos) {
      throw FileLoadError(name, line_no, "expected label<TAB>pattern[<TAB>note]");
    }
    auto tab2 = line.find('\t', tab1 + 1);

    FingerprintRule rule;
    std::string label = line.substr(0, tab1);
    rule.pattern = tab2 == std::string::npos ? line.substr(tab1 + 1)
                                             : line.substr(tab1 + 1, tab2 - tab1 - 1);
    rule.source_note = tab2 == std::string::npos ? "" : line.substr(tab2 + 1);

    auto cls = blockpage_class_from_name(label);
    if (!cls) {
      throw FileLoadError(name, line_no, "unknown label '" + label + "'");
    }
    if (*cls == BlockpageClass::NotBlockpage || *cls == BlockpageClass::NonHttpBlock) {
      throw FileLoadError(name, line_no,
                          "label '" + label + "' cannot be assigned from body text");
    }
    rule.label = *cls;
    if (rule.pattern.empty()) {
      throw FileLoadError(name, line_no, "empty pattern");
    }
    try {
      rule.compiled.assign(rule.pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw FileLoadError(name, line_no, "bad regex: " + std::string(e.what()));
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<FingerprintRule> load_fingerprints(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open fingerprint file");
  return parse_fingerprints(in, file.string());
}

BlockpageClass classify_body(std::string_view body, int http_status,
                             const std::vector<FingerprintRule>& rules) {
  (void)http_status;  // a matching 200 body is still a block page
  for (const auto& rule : rules) {
    if (std::regex_search(body.begin(), body.end(), rule.compiled)) {
      return rule.label;
    }
  }
  return BlockpageClass::NotBlockpage;
}

std::optional<BlockpageClass> block_type(StatusClass status_class,
                                         std::optional<BlockpageClass> blockpage) {
  if (blockpage && *blockpage != BlockpageClass::NotBlockpage) return blockpage;
  switch (status_class) {
    case StatusClass::ConnError:
    case StatusClass::DnsError:
    case StatusClass::Timeout:
    case StatusClass::RedirectLoop:
      return BlockpageClass::NonHttpBlock;
    default:
      return std::nullopt;
  }
}

}  // namespace blockscope
