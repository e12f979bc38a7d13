#include "daskt/config.hpp"

#include <algorithm>
#include <sstream>

#include "daskt/common.hpp"

namespace daskt {

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d = {
      {"dataset", "custom"},
      {"input", ""},
      {"workdir", "daskt_work"},
      {"seed", "1234"},
      {"target_len", "100"},
      {"response_cap_ms", "1800000"},
      {"folds", "5"},
      {"fold", "0"},
      {"col.student", ""},
      {"col.problem", ""},
      {"col.kc", ""},
      {"col.correct", ""},
      {"col.start", ""},
      {"col.end", ""},
      {"col.response", ""},
      {"col.attempts", ""},
      {"col.time_unit", "datetime"},
      {"col.response_unit", "epoch_ms"},
      {"col.delimiter", ","},
      {"col.conf_frustration", ""},
      {"col.conf_concentration", ""},
      {"col.conf_boredom", ""},
      {"col.conf_confusion", ""},
      {"seg_len", "20"},
      {"zscore", "1"},
      {"cluster_k", "4"},
      {"cluster_max_iter", "100"},
      {"cluster_tol", "1e-9"},
      {"dims", "256"},
      {"heads", "4"},
      {"concat_heads", "0"},
      {"leaky_slope", "0.2"},
      {"affect_source", "embedding"},
      {"ablation", "full"},
      {"affect_lag", "0"},
      {"lr", "0.001"},
      {"lambda", "1e-5"},
      {"batch", "32"},
      {"max_epochs", "30"},
      {"patience", "5"},
      {"clip_norm", "5"},
      {"precision", "double"},
      {"jobs", "1"},
      {"run_folds", "all"},
  };
  return d;
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, _] : defaults()) k.push_back(key);
    return k;
  }();
  return keys;
}

void RunConfig::load_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorClass::config,
           "bad config line " + std::to_string(lineno) + " in " + path + ": " + t);
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key))
    fail(ErrorClass::config, "unknown config key: " + key);
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

std::string RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorClass::config, "unknown config key: " + key);
  return it->second;
}

long long RunConfig::integer(const std::string& key) const {
  try {
    return std::stoll(str(key));
  } catch (const std::exception&) {
    fail(ErrorClass::config, "config key '" + key + "' is not an integer: " + str(key));
  }
}

double RunConfig::real(const std::string& key) const {
  try {
    return std::stod(str(key));
  } catch (const std::exception&) {
    fail(ErrorClass::config, "config key '" + key + "' is not a number: " + str(key));
  }
}

bool RunConfig::boolean(const std::string& key) const {
  const std::string v = str(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  fail(ErrorClass::config, "config key '" + key + "' is not a boolean: " + v);
}

std::uint64_t RunConfig::seed(const std::string& key) const {
  return static_cast<std::uint64_t>(integer(key));
}

ColumnMap RunConfig::column_map() const {
  const std::string dataset = str("dataset");
  ColumnMap m = ColumnMap::preset(dataset);
  if (dataset == "custom") {
    m.student_id = str("col.student");
    m.problem_id = str("col.problem");
    m.kc_id = str("col.kc");
    m.correct = str("col.correct");
    m.start_time = str("col.start");
    m.end_time = str("col.end");
    m.response_time = str("col.response");
    m.attempts = str("col.attempts");
    auto unit = [&](const std::string& key) {
      const std::string v = str(key);
      if (v == "datetime") return TimeUnit::datetime;
      if (v == "epoch_s") return TimeUnit::epoch_s;
      if (v == "epoch_ms") return TimeUnit::epoch_ms;
      fail(ErrorClass::config, "bad time unit for " + key + ": " + v);
    };
    m.time_unit = unit("col.time_unit");
    m.response_time_unit = unit("col.response_unit");
    const std::string d = str("col.delimiter");
    m.delimiter = d == "tab" ? '\t' : (d.empty() ? ',' : d[0]);
    m.conf_frustration = str("col.conf_frustration");
    m.conf_concentration = str("col.conf_concentration");
    m.conf_boredom = str("col.conf_boredom");
    m.conf_confusion = str("col.conf_confusion");
  }
  return m;
}

std::string RunConfig::subset_hash(const std::string& stage,
                                   const std::vector<std::string>& keys,
                                   const std::vector<std::string>& extra) const {
  std::uint64_t h = fnv1a(stage);
  std::vector<std::string> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& k : sorted) h = fnv1a(k + "=" + str(k), h);
  for (const auto& e : extra) h = fnv1a(e, h);
  return to_hex(h);
}

std::string RunConfig::print() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

}  // namespace daskt
