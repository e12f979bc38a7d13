#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "daskt/records.hpp"

namespace daskt {

enum class TimeUnit { epoch_ms, epoch_s, datetime };

// Names the source columns for each canonical field. Empty entries mean
// "not present in this dataset".
struct ColumnMap {
  std::string student_id;
  std::string problem_id;
  std::string kc_id;
  std::string correct;
  std::string start_time;
  std::string end_time;       // optional
  std::string response_time;  // optional; ms unless response_time_unit says else
  std::string attempts;       // optional
  TimeUnit time_unit = TimeUnit::datetime;
  TimeUnit response_time_unit = TimeUnit::epoch_ms;  // ms or s scale for durations
  char delimiter = ',';
  // Optional per-record external affect confidences, passed through to a
  // sidecar aligned with canonical record order.
  std::string conf_frustration;
  std::string conf_concentration;
  std::string conf_boredom;
  std::string conf_confusion;

  static ColumnMap preset(const std::string& dataset);  // assist2012|assistchall
};

struct ParseStats {
  std::int64_t total_rows = 0;
  std::int64_t kept = 0;
  std::int64_t dropped_empty_key = 0;   // missing problem or KC
  std::int64_t dropped_bad_time = 0;    // unparseable timestamp
  std::int64_t dropped_bad_field = 0;   // other unparseable fields
  std::int64_t clamped_response = 0;    // response time capped or floored
};

struct RawRecord {
  std::string student, problem, kc;
  int correct = 0;
  std::int64_t start_ms = 0;
  std::optional<std::int64_t> end_ms;
  std::int64_t response_ms = 0;
  int attempts = 1;
  // external affect confidences (NaN when absent)
  double conf[4] = {0, 0, 0, 0};
  bool has_conf = false;
};

struct ParsedLog {
  std::vector<RawRecord> records;  // globally stable-sorted by start time
  ParseStats stats;
};

// Parses a delimited log, drops rows lacking problem/KC or with unparseable
// timestamps, binarizes correctness, derives and caps response times, and
// stable-sorts the survivors by start time only.
ParsedLog parse_log(const std::string& path, const ColumnMap& map,
                    std::int64_t response_cap_ms = 30 * 60 * 1000);

struct EncodedLog {
  RecordFile records;
  Vocab students, problems, kcs;
  std::vector<std::array<double, 4>> external_affect;  // row-aligned; empty if none
  bool has_external_affect = false;
};

// Assigns dense 1-based ids in canonical record order; id 0 stays reserved
// for padding.
EncodedLog encode_ids(const ParsedLog& log);

// Cuts each student's time-ordered history into target_len-slot sequences:
// hard cuts at target_len boundaries, zero-padded tails.
std::vector<StudentSequence> build_sequences(const std::vector<InteractionRecord>& records,
                                             int target_len);

// Deterministic 5-fold splits keyed on (sorted original ids, seed) only.
std::vector<DatasetSplit> make_folds(const std::vector<std::string>& students,
                                     int k, std::uint64_t seed);

std::int64_t parse_timestamp_ms(const std::string& text, TimeUnit unit);

}  // namespace daskt
