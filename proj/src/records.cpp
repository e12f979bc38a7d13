#include "daskt/records.hpp"

#include <fstream>
#include <sstream>

#include "daskt/common.hpp"

namespace daskt {

std::string StudentSequence::key() const {
  return std::to_string(student_id) + ":" + std::to_string(virtual_index);
}

int Vocab::encode(const std::string& original) {
  auto it = index_.find(original);
  if (it != index_.end()) return it->second;
  names_.push_back(original);
  int id = static_cast<int>(names_.size());
  index_.emplace(original, id);
  return id;
}

int Vocab::lookup(const std::string& original) const {
  auto it = index_.find(original);
  return it == index_.end() ? 0 : it->second;
}

const std::string& Vocab::decode(int id) const {
  static const std::string pad = "<pad>";
  if (id <= 0 || id > static_cast<int>(names_.size())) return pad;
  return names_[static_cast<std::size_t>(id) - 1];
}

void Vocab::save(const std::string& path, const std::string& config_hash) const {
  std::ostringstream out;
  out << "# daskt-vocab v1\n# config_hash=" << config_hash << "\n";
  for (std::size_t i = 0; i < names_.size(); ++i)
    out << (i + 1) << "\t" << names_[i] << "\n";
  write_text_file(path, out.str());
}

Vocab Vocab::load(const std::string& path) {
  Vocab v;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 2) fail(ErrorClass::config, "bad vocab line in " + path);
    int id = v.encode(f[1]);
    if (id != std::stoi(f[0]))
      fail(ErrorClass::config, "non-contiguous vocab ids in " + path);
  }
  return v;
}

void save_records(const std::string& path, const RecordFile& rf) {
  std::ostringstream out;
  out << "# daskt-records v1\n# config_hash=" << rf.config_hash << "\n";
  out << "student\tproblem\tkc\tcorrect\tstart_ms\tend_ms\tresponse_ms\tattempts\n";
  for (const auto& r : rf.records) {
    out << r.student_id << "\t" << r.problem_id << "\t" << r.kc_id << "\t"
        << r.correct << "\t" << r.start_ms << "\t"
        << (r.end_ms ? std::to_string(*r.end_ms) : std::string("-")) << "\t"
        << r.response_ms << "\t" << r.attempts << "\n";
  }
  write_text_file(path, out.str());
}

RecordFile load_records(const std::string& path) {
  RecordFile rf;
  std::istringstream in(read_text_file(path));
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find("config_hash=");
      if (eq != std::string::npos) rf.config_hash = trim(line.substr(eq + 12));
      continue;
    }
    if (!header_seen) {  // column header
      header_seen = true;
      continue;
    }
    auto f = split(line, '\t');
    if (f.size() != 8) fail(ErrorClass::config, "bad record line in " + path);
    InteractionRecord r;
    r.student_id = std::stoi(f[0]);
    r.problem_id = std::stoi(f[1]);
    r.kc_id = std::stoi(f[2]);
    r.correct = std::stoi(f[3]);
    r.start_ms = std::stoll(f[4]);
    if (f[5] != "-") r.end_ms = std::stoll(f[5]);
    r.response_ms = std::stoll(f[6]);
    r.attempts = std::stoi(f[7]);
    rf.records.push_back(r);
  }
  return rf;
}

void save_folds(const std::string& path, const std::vector<DatasetSplit>& folds,
                const std::string& config_hash) {
  std::ostringstream out;
  out << "# daskt-folds v1\n# config_hash=" << config_hash << "\n";
  for (const auto& fo : folds) {
    for (const auto& s : fo.train_students)
      out << fo.fold_index << "\ttrain\t" << s << "\n";
    for (const auto& s : fo.val_students)
      out << fo.fold_index << "\tval\t" << s << "\n";
    for (const auto& s : fo.test_students)
      out << fo.fold_index << "\ttest\t" << s << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<DatasetSplit> load_folds(const std::string& path) {
  std::vector<DatasetSplit> folds;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 3) fail(ErrorClass::config, "bad folds line in " + path);
    int idx = std::stoi(f[0]);
    while (static_cast<int>(folds.size()) <= idx) {
      folds.push_back({});
      folds.back().fold_index = static_cast<int>(folds.size()) - 1;
    }
    if (f[1] == "train")
      folds[idx].train_students.push_back(f[2]);
    else if (f[1] == "val")
      folds[idx].val_students.push_back(f[2]);
    else if (f[1] == "test")
      folds[idx].test_students.push_back(f[2]);
    else
      fail(ErrorClass::config, "bad fold role in " + path);
  }
  return folds;
}

std::string artifact_config_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  std::string line;
  for (int i = 0; i < 4 && std::getline(in, line); ++i) {
    auto eq = line.find("config_hash=");
    if (eq != std::string::npos) return trim(line.substr(eq + 12));
  }
  return "";
}

}  // namespace daskt
