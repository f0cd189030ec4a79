#include "blockscope/records.hpp"

#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "blockscope/url.hpp"

namespace blockscope {

using ordered_json = nlohmann::ordered_json;

std::string format_utc_ms(std::int64_t epoch_ms) {
  std::time_t secs = static_cast<std::time_t>(epoch_ms / 1000);
  int ms = static_cast<int>(epoch_ms % 1000);
  if (ms < 0) {  // floor division for pre-epoch instants
    ms += 1000;
    secs -= 1;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min,
                tm.tm_sec, ms);
  return buf;
}

std::int64_t parse_utc_ms(std::string_view text) {
  std::tm tm{};
  int ms = 0;
  char tail = 0;
  std::string s(text);
  int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &tm.tm_year, &tm.tm_mon,
                      &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &ms, &tail);
  if (n != 8 || tail != 'Z') {
    // Seconds-precision form is accepted too.
    tm = {};
    ms = 0;
    n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &tm.tm_year, &tm.tm_mon,
                    &tm.tm_mday, &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &tail);
    if (n != 7 || tail != 'Z') throw SchemaError("ts", "not an RFC 3339 UTC instant: " + s);
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::time_t secs = timegm(&tm);
  return static_cast<std::int64_t>(secs) * 1000 + ms;
}

std::string encode_record(const FetchOutcome& outcome) {
  ordered_json j;
  j["url"] = outcome.url.raw;
  j["effective_url"] = outcome.url.effective;
  j["vantage"] = outcome.vantage_id;
  j["run"] = outcome.run_index;
  j["class"] = status_class_name(outcome.status_class);
  if (outcome.http_status) j["http_status"] = *outcome.http_status;
  if (outcome.body_digest) j["body_sha256"] = *outcome.body_digest;
  if (outcome.body_size) j["body_size"] = *outcome.body_size;
  if (outcome.blockpage) j["blockpage"] = blockpage_class_name(*outcome.blockpage);
  j["final_url"] = outcome.final_url;
  j["elapsed_ms"] = outcome.elapsed_ms;
  j["ts"] = format_utc_ms(outcome.timestamp_ms);
  return j.dump();
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw SchemaError(field, "missing");
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_string()) throw SchemaError(field, "expected a string");
  return v.get<std::string>();
}

std::int64_t require_int(const nlohmann::json& j, const char* field) {
  const auto& v = require(j, field);
  if (!v.is_number_integer()) throw SchemaError(field, "expected an integer");
  return v.get<std::int64_t>();
}

}  // namespace

FetchOutcome decode_record(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw SchemaError("<json>", "line is not a JSON object");
  }

  FetchOutcome out;
  std::string raw = require_string(j, "url");
  std::string effective = require_string(j, "effective_url");
  try {
    out.url = make_target(raw, effective);
  } catch (const ContractError& e) {
    throw SchemaError("effective_url", e.what());
  }
  out.vantage_id = require_string(j, "vantage");
  out.run_index = static_cast<int>(require_int(j, "run"));

  std::string class_name = require_string(j, "class");
  auto cls = status_class_from_name(class_name);
  if (!cls) throw SchemaError("class", "unknown status class '" + class_name + "'");
  out.status_class = *cls;

  if (j.contains("http_status")) {
    out.http_status = static_cast<int>(require_int(j, "http_status"));
  }
  if (j.contains("body_sha256")) out.body_digest = require_string(j, "body_sha256");
  if (j.contains("body_size")) {
    out.body_size = static_cast<std::uint64_t>(require_int(j, "body_size"));
  }
  if (j.contains("blockpage")) {
    std::string name = require_string(j, "blockpage");
    auto bp = blockpage_class_from_name(name);
    if (!bp) throw SchemaError("blockpage", "unknown blockpage class '" + name + "'");
    out.blockpage = *bp;
  }
  out.final_url = require_string(j, "final_url");
  out.elapsed_ms = require_int(j, "elapsed_ms");
  out.timestamp_ms = parse_utc_ms(require_string(j, "ts"));

  try {
    out.validate();
  } catch (const ContractError& e) {
    throw SchemaError("<record>", e.what());
  }
  return out;
}

std::vector<FetchOutcome> read_log(std::istream& in, const std::string& name) {
  std::vector<FetchOutcome> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(decode_record(line));
    } catch (const SchemaError& e) {
      throw SchemaError(e.field(),
                        name + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<FetchOutcome> read_log(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open log");
  return read_log(in, file.string());
}

std::vector<Vantage> load_vantages(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open vantage roster");
  std::vector<Vantage> out;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FileLoadError(file.string(), line_no, "not a JSON object");
    }
    Vantage v;
    try {
      v.id = require_string(j, "id");
      v.country = require_string(j, "country");
      v.city = require_string(j, "city");
      std::string kind = require_string(j, "network_kind");
      auto nk = network_kind_from_name(kind);
      if (!nk) throw SchemaError("network_kind", "unknown kind '" + kind + "'");
      v.network_kind = *nk;
      v.region_label = require_string(j, "region_label");
    } catch (const SchemaError& e) {
      throw FileLoadError(file.string(), line_no, e.what());
    }
    if (v.region_label.empty()) {
      throw FileLoadError(file.string(), line_no, "region_label is empty");
    }
    if (!ids.insert(v.id).second) {
      throw FileLoadError(file.string(), line_no, "duplicate vantage id '" + v.id + "'");
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<ManualAnnotation> load_annotations(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileLoadError(file.string(), 0, "cannot open annotations");
  std::vector<ManualAnnotation> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw FileLoadError(file.string(), line_no, "not a JSON object");
    }
    ManualAnnotation a;
    try {
      a.url = require_string(j, "url");
      a.region_label = require_string(j, "region_label");
      std::string result = require_string(j, "result");
      auto r = manual_result_from_name(result);
      if (!r) throw SchemaError("result", "unknown result '" + result + "'");
      a.result = *r;
      a.note = j.value("note", "");
    } catch (const SchemaError& e) {
      throw FileLoadError(file.string(), line_no, e.what());
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace blockscope
