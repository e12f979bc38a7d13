#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "daskt/affect_cluster.hpp"
#include "daskt/config.hpp"
#include "daskt/metrics.hpp"
#include "daskt/model.hpp"
#include "daskt/records.hpp"

namespace daskt {

// Wires the stages together: ingest -> mine-affect -> cluster -> train ->
// evaluate -> reports. Every stage is content-addressed: its outputs embed a
// hash over the stage-relevant config keys and the content hashes of its
// inputs, and a stage whose outputs are present with matching hashes is
// skipped.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }
  std::filesystem::path workdir() const { return workdir_; }

  bool ingest(bool force = false);            // returns true when work ran
  bool mine_affect(int fold, bool force = false);
  bool cluster_stage(int fold, bool force = false);
  bool train_stage(int fold, Ablation ab, bool force = false);
  Metrics evaluate_stage(int fold, Ablation ab, bool force = false);

  // Full pipeline for the configured ablation over run_folds; writes
  // report.tsv and manifest.tsv.
  void run();
  // All five variants over run_folds (or a grid_variants subset); writes
  // ablation_report.tsv and manifest.tsv.
  void ablation_grid(const std::vector<Ablation>& variants, std::ostream& warnings);

  ConsistencyTable consistency(const std::string& assignments_path,
                               const std::string& external_path,
                               const std::string& out_path);
  void export_states(const std::string& checkpoint_path, const std::string& student,
                     int every, const std::string& out_path);

  void write_manifest();

  // path helpers (public: tests drive them)
  std::filesystem::path records_path() const { return workdir_ / "records.tsv"; }
  std::filesystem::path folds_path() const { return workdir_ / "folds.tsv"; }
  std::filesystem::path external_affect_path() const {
    return workdir_ / "external_affect.tsv";
  }
  std::filesystem::path fold_dir(int fold) const {
    return workdir_ / ("fold" + std::to_string(fold));
  }
  std::filesystem::path stats_path(int fold) const { return fold_dir(fold) / "stats.tsv"; }
  std::filesystem::path factors_whole_path(int fold) const {
    return fold_dir(fold) / "factors_whole.tsv";
  }
  std::filesystem::path factors_segments_path(int fold) const {
    return fold_dir(fold) / "factors_segments.tsv";
  }
  std::filesystem::path affect_model_path(int fold) const {
    return fold_dir(fold) / "affect_model.tsv";
  }
  std::filesystem::path assignments_path(int fold) const {
    return fold_dir(fold) / "assignments.tsv";
  }
  std::filesystem::path checkpoint_path(int fold, Ablation ab) const {
    return fold_dir(fold) / ("checkpoint_" + std::string(ablation_name(ab)) + ".bin");
  }
  std::filesystem::path trainlog_path(int fold, Ablation ab) const {
    return fold_dir(fold) / ("train_" + std::string(ablation_name(ab)) + ".log");
  }
  std::filesystem::path eval_path(int fold, Ablation ab) const {
    return fold_dir(fold) / ("eval_" + std::string(ablation_name(ab)) + ".tsv");
  }

  std::vector<int> folds_to_run() const;

  // stage hashes (content-addressed chain)
  std::string ingest_hash() const;
  std::string stats_hash(int fold) const;
  std::string segment_factors_hash(int fold) const;
  std::string cluster_hash(int fold) const;
  std::string train_hash(int fold, Ablation ab) const;

 private:
  struct SeqAffect {
    int whole = -1;
    std::vector<int> segments;
  };
  struct Prepared {
    std::vector<StudentSequence> sequences;
    std::vector<SeqInput> inputs;  // aligned with sequences
    std::vector<int> roles;        // 0 train / 1 val / 2 test
    int num_problems = 0, num_kcs = 0;
  };

  Prepared prepare(int fold, Ablation ab) const;
  std::vector<StudentSequence> load_sequences() const;
  std::map<std::pair<int, int>, SeqAffect> load_assignment_index(int fold) const;
  ModelConfig model_config(int fold, Ablation ab, int num_problems, int num_kcs,
                           int factor_dim) const;
  bool fresh(const std::filesystem::path& p, const std::string& hash) const;
  template <typename S>
  Metrics train_and_eval(int fold, Ablation ab, bool do_train, bool force);

  RunConfig cfg_;
  std::filesystem::path workdir_;
};

// Writes a Table-3-shaped consistency report.
void write_consistency_report(const std::string& path, const ConsistencyTable& t,
                              const std::string& config_hash);

}  // namespace daskt
