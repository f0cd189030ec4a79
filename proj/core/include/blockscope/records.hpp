#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "blockscope/types.hpp"

namespace blockscope {

// One self-contained JSON line per outcome. Field names are part of the log
// schema: url, effective_url, vantage, run, class, http_status, body_sha256,
// body_size, blockpage, final_url, elapsed_ms, ts. Optional fields are
// omitted, never null. decode_record(encode_record(x)) == x.
std::string encode_record(const FetchOutcome& outcome);

// Inverse of encode_record. Throws SchemaError naming the offending field;
// unparsable JSON reports field "<json>".
FetchOutcome decode_record(std::string_view line);

// Reads every record of a JSONL log. Throws SchemaError on the first bad line
// (message includes the line number). Blank lines are skipped.
std::vector<FetchOutcome> read_log(const std::filesystem::path& file);
std::vector<FetchOutcome> read_log(std::istream& in, const std::string& name);

// Vantage roster: one JSON object per line with id, country, city,
// network_kind, region_label. Duplicate ids are a load error.
std::vector<Vantage> load_vantages(const std::filesystem::path& file);

// Manual-check annotations: one JSON object per line with url, region_label,
// result, note.
std::vector<ManualAnnotation> load_annotations(const std::filesystem::path& file);

// UTC instants on the wire are RFC 3339 with millisecond precision,
// e.g. "2018-05-18T09:30:00.000Z".
std::string format_utc_ms(std::int64_t epoch_ms);
std::int64_t parse_utc_ms(std::string_view text);  // throws SchemaError("ts", ...)

}  // namespace blockscope
