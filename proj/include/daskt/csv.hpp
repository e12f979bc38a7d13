#pragma once

#include <string>
#include <vector>

namespace daskt {

// Minimal delimited-text reader. Handles double-quoted fields (embedded
// delimiters, doubled quotes); good enough for the ASSISTments exports.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

Table read_delimited(const std::string& path, char delim);
std::vector<std::string> parse_delimited_line(const std::string& line, char delim);

}  // namespace daskt
