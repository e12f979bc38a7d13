#include "daskt/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <random>

#include "daskt/common.hpp"
#include "daskt/csv.hpp"

namespace daskt {

ColumnMap ColumnMap::preset(const std::string& dataset) {
  ColumnMap m;
  if (dataset == "assist2012") {
    m.student_id = "user_id";
    m.problem_id = "problem_id";
    m.kc_id = "skill_id";
    m.correct = "correct";
    m.start_time = "start_time";
    m.end_time = "end_time";
    m.response_time = "ms_first_response";
    m.attempts = "attempt_count";
    m.time_unit = TimeUnit::datetime;
    m.delimiter = ',';
    m.conf_frustration = "Average_confidence(FRUSTRATED)";
    m.conf_concentration = "Average_confidence(CONCENTRATING)";
    m.conf_boredom = "Average_confidence(BORED)";
    m.conf_confusion = "Average_confidence(CONFUSED)";
  } else if (dataset == "assistchall") {
    m.student_id = "studentId";
    m.problem_id = "problemId";
    m.kc_id = "skill";
    m.correct = "correct";
    m.start_time = "startTime";
    m.end_time = "endTime";
    m.response_time = "timeTaken";
    m.attempts = "attemptCount";
    m.time_unit = TimeUnit::epoch_s;
    m.response_time_unit = TimeUnit::epoch_s;
    m.delimiter = ',';
  } else if (dataset != "custom") {
    fail(ErrorClass::config, "unknown dataset preset: " + dataset);
  }
  return m;
}

std::int64_t parse_timestamp_ms(const std::string& text, TimeUnit unit) {
  std::string t = trim(text);
  if (t.empty()) throw std::invalid_argument("empty timestamp");
  if (unit == TimeUnit::datetime) {
    // "YYYY-MM-DD HH:MM:SS[.frac]"
    int y, mo, d, h, mi;
    double sec;
    if (std::sscanf(t.c_str(), "%d-%d-%d %d:%d:%lf", &y, &mo, &d, &h, &mi, &sec) != 6)
      throw std::invalid_argument("bad datetime: " + t);
    std::int64_t days = 0;
    // days since epoch via civil-from-days inverse (Howard Hinnant's algorithm)
    {
      int yy = y - (mo <= 2);
      int era = (yy >= 0 ? yy : yy - 399) / 400;
      unsigned yoe = static_cast<unsigned>(yy - era * 400);
      unsigned doy = (153u * static_cast<unsigned>(mo + (mo > 2 ? -3 : 9)) + 2) / 5 +
                     static_cast<unsigned>(d) - 1;
      unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
      days = static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
    }
    return ((days * 24 + h) * 60 + mi) * 60000 + static_cast<std::int64_t>(sec * 1000.0);
  }
  double v = std::stod(t);
  if (unit == TimeUnit::epoch_s) return static_cast<std::int64_t>(std::llround(v * 1000.0));
  return static_cast<std::int64_t>(std::llround(v));
}

ParsedLog parse_log(const std::string& path, const ColumnMap& map,
                    std::int64_t response_cap_ms) {
  Table t = read_delimited(path, map.delimiter);
  auto need = [&](const std::string& name) {
    int c = t.column(name);
    if (c < 0) fail(ErrorClass::ingest, "missing mapped column '" + name + "' in " + path);
    return c;
  };
  auto maybe = [&](const std::string& name) {
    return name.empty() ? -1 : t.column(name);
  };
  int c_student = need(map.student_id);
  int c_problem = need(map.problem_id);
  int c_kc = need(map.kc_id);
  int c_correct = need(map.correct);
  int c_start = need(map.start_time);
  int c_end = maybe(map.end_time);
  int c_resp = maybe(map.response_time);
  int c_att = maybe(map.attempts);
  int c_conf[4] = {maybe(map.conf_frustration), maybe(map.conf_concentration),
                   maybe(map.conf_boredom), maybe(map.conf_confusion)};
  bool has_conf = c_conf[0] >= 0 && c_conf[1] >= 0 && c_conf[2] >= 0 && c_conf[3] >= 0;

  ParsedLog out;
  out.stats.total_rows = static_cast<std::int64_t>(t.rows.size());
  for (const auto& row : t.rows) {
    auto field = [&](int c) -> std::string {
      return c >= 0 && c < static_cast<int>(row.size()) ? trim(row[c]) : std::string();
    };
    RawRecord r;
    r.student = field(c_student);
    r.problem = field(c_problem);
    r.kc = field(c_kc);
    if (r.problem.empty() || r.kc.empty() || r.kc == "NA" || r.student.empty()) {
      ++out.stats.dropped_empty_key;
      continue;
    }
    // first listed concept when several (comma/semicolon separated lists)
    for (char sep : {',', ';'}) {
      auto p = r.kc.find(sep);
      if (p != std::string::npos) r.kc = trim(r.kc.substr(0, p));
    }
    try {
      r.start_ms = parse_timestamp_ms(field(c_start), map.time_unit);
    } catch (const std::exception&) {
      ++out.stats.dropped_bad_time;
      continue;
    }
    try {
      // partial credit binarized at >= 1.0
      double corr = std::stod(field(c_correct));
      r.correct = corr >= 1.0 ? 1 : 0;
      if (c_end >= 0 && !field(c_end).empty()) {
        std::int64_t e = parse_timestamp_ms(field(c_end), map.time_unit);
        if (e < r.start_ms) {
          e = r.start_ms;  // clock skew; clamp
          ++out.stats.clamped_response;
        }
        r.end_ms = e;
      }
      if (c_resp >= 0 && !field(c_resp).empty()) {
        double v = std::stod(field(c_resp));
        r.response_ms = static_cast<std::int64_t>(
            std::llround(map.response_time_unit == TimeUnit::epoch_s ? v * 1000.0 : v));
      } else if (r.end_ms) {
        r.response_ms = *r.end_ms - r.start_ms;
      } else {
        r.response_ms = 0;
      }
      if (r.response_ms < 0) {
        r.response_ms = 0;
        ++out.stats.clamped_response;
      } else if (r.response_ms > response_cap_ms) {
        r.response_ms = response_cap_ms;
        ++out.stats.clamped_response;
      }
      if (c_att >= 0 && !field(c_att).empty()) {
        r.attempts = std::max(0, static_cast<int>(std::llround(std::stod(field(c_att)))));
      } else {
        r.attempts = 1;
      }
      if (has_conf) {
        for (int a = 0; a < 4; ++a) {
          auto s = field(c_conf[a]);
          r.conf[a] = s.empty() ? 0.0 : std::stod(s);
        }
        r.has_conf = true;
      }
    } catch (const std::exception&) {
      ++out.stats.dropped_bad_field;
      continue;
    }
    out.records.push_back(std::move(r));
    ++out.stats.kept;
  }
  // stable sort keyed on start time only; file order preserved between ties
  std::stable_sort(out.records.begin(), out.records.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.start_ms < b.start_ms; });
  return out;
}

EncodedLog encode_ids(const ParsedLog& log) {
  EncodedLog out;
  out.has_external_affect = !log.records.empty() &&
                            std::all_of(log.records.begin(), log.records.end(),
                                        [](const RawRecord& r) { return r.has_conf; });
  for (const auto& r : log.records) {
    InteractionRecord e;
    e.student_id = out.students.encode(r.student);
    e.problem_id = out.problems.encode(r.problem);
    e.kc_id = out.kcs.encode(r.kc);
    e.correct = r.correct;
    e.start_ms = r.start_ms;
    e.end_ms = r.end_ms;
    e.response_ms = r.response_ms;
    e.attempts = r.attempts;
    out.records.records.push_back(e);
    if (out.has_external_affect)
      out.external_affect.push_back({r.conf[0], r.conf[1], r.conf[2], r.conf[3]});
  }
  return out;
}

std::vector<StudentSequence> build_sequences(const std::vector<InteractionRecord>& records,
                                             int target_len) {
  if (target_len <= 0) fail(ErrorClass::config, "target_len must be positive");
  // group by student preserving canonical (time-sorted) order
  std::map<int, std::vector<InteractionRecord>> by_student;
  for (const auto& r : records) by_student[r.student_id].push_back(r);

  std::vector<StudentSequence> out;
  for (auto& [sid, recs] : by_student) {
    int n = static_cast<int>(recs.size());
    int parts = (n + target_len - 1) / target_len;
    for (int p = 0; p < parts; ++p) {
      StudentSequence seq;
      seq.student_id = sid;
      seq.virtual_index = p;
      seq.is_virtual = parts > 1;
      seq.target_len = target_len;
      int lo = p * target_len;
      int hi = std::min(n, lo + target_len);
      seq.records.assign(recs.begin() + lo, recs.begin() + hi);
      seq.pad_len = target_len - (hi - lo);
      out.push_back(std::move(seq));
    }
  }
  return out;
}

std::vector<DatasetSplit> make_folds(const std::vector<std::string>& students,
                                     int k, std::uint64_t seed) {
  if (k < 2) fail(ErrorClass::config, "k must be >= 2");
  std::vector<std::string> ids = students;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (static_cast<int>(ids.size()) < k)
    fail(ErrorClass::config, "fewer students than folds");

  std::mt19937_64 rng(derive_seed(seed, "folds"));
  std::shuffle(ids.begin(), ids.end(), rng);

  int n = static_cast<int>(ids.size());
  std::vector<DatasetSplit> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    auto& fo = folds[static_cast<std::size_t>(f)];
    fo.fold_index = f;
    int lo = static_cast<int>(static_cast<std::int64_t>(n) * f / k);
    int hi = static_cast<int>(static_cast<std::int64_t>(n) * (f + 1) / k);
    std::vector<std::string> rest;
    for (int i = 0; i < n; ++i) {
      if (i >= lo && i < hi)
        fo.test_students.push_back(ids[static_cast<std::size_t>(i)]);
      else
        rest.push_back(ids[static_cast<std::size_t>(i)]);
    }
    // of the remainder, ~20% validation, deterministically per fold
    std::mt19937_64 vrng(derive_seed(seed, "val" + std::to_string(f)));
    std::shuffle(rest.begin(), rest.end(), vrng);
    std::size_t nval = rest.size() / 5;
    fo.val_students.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(nval));
    fo.train_students.assign(rest.begin() + static_cast<std::ptrdiff_t>(nval), rest.end());
    std::sort(fo.train_students.begin(), fo.train_students.end());
    std::sort(fo.val_students.begin(), fo.val_students.end());
    std::sort(fo.test_students.begin(), fo.test_students.end());
  }
  return folds;
}

}  // namespace daskt
