#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "daskt/ingest.hpp"

namespace daskt {

// Layered key=value configuration: defaults, then a config file, then
// command-line overrides. Every artifact embeds the hash of the keys the
// producing stage depends on, so any output is reproducible from its config
// plus inputs.
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string str(const std::string& key) const;
  long long integer(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;

  ColumnMap column_map() const;

  // Hash over a named subset of keys plus extra material (input hashes).
  std::string subset_hash(const std::string& stage,
                          const std::vector<std::string>& keys,
                          const std::vector<std::string>& extra = {}) const;

  std::string print() const;  // effective config, sorted

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace daskt
