#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace daskt {

// One answered problem after id encoding. Ids are dense and 1-based;
// id 0 is the padding sentinel everywhere.
struct InteractionRecord {
  int student_id = 0;
  int problem_id = 0;
  int kc_id = 0;  // first listed concept of the problem
  int correct = 0;
  std::int64_t start_ms = 0;
  std::optional<std::int64_t> end_ms;
  std::int64_t response_ms = 0;
  int attempts = 1;
};

// Fixed-length slice of one student's history. Over-long histories are cut
// into consecutive virtual students; short tails are zero-padded.
struct StudentSequence {
  int student_id = 0;      // encoded original student
  int virtual_index = 0;   // 0-based slice number within the student
  bool is_virtual = false; // true when the student was split
  int pad_len = 0;
  std::vector<InteractionRecord> records;  // only the real (non-pad) records

  int target_len = 0;
  int effective_len() const { return static_cast<int>(records.size()); }
  std::string key() const;  // "student:part"
};

struct DatasetSplit {
  int fold_index = 0;
  std::vector<std::string> train_students;  // original ids
  std::vector<std::string> val_students;
  std::vector<std::string> test_students;
};

// Dense 1-based vocabulary; 0 reserved for padding.
class Vocab {
 public:
  int encode(const std::string& original);      // inserts when unseen
  int lookup(const std::string& original) const;  // 0 when unseen
  const std::string& decode(int id) const;
  int size() const { return static_cast<int>(names_.size()); }  // excludes pad

  void save(const std::string& path, const std::string& config_hash) const;
  static Vocab load(const std::string& path);

 private:
  std::map<std::string, int> index_;
  std::vector<std::string> names_;  // names_[id-1] = original
};

struct RecordFile {
  std::string config_hash;
  std::vector<InteractionRecord> records;  // canonical (time-sorted) order
};

void save_records(const std::string& path, const RecordFile& rf);
RecordFile load_records(const std::string& path);

void save_folds(const std::string& path, const std::vector<DatasetSplit>& folds,
                const std::string& config_hash);
std::vector<DatasetSplit> load_folds(const std::string& path);

// Reads the "# config_hash=..." header line of an artifact; empty if missing.
std::string artifact_config_hash(const std::string& path);

}  // namespace daskt
