#pragma once

#include <span>
#include <string>
#include <vector>

#include "daskt/common.hpp"
#include "daskt/records.hpp"

namespace daskt {

// Layout of a factor vector over K knowledge concepts:
//   [0,K)    per-KC accuracy delta        (confidence)
//   [K,2K)   per-KC response-time delta   (confidence)
//   [2K,3K)  per-KC attempts delta        (effort)
//   3K       inter-question interval delta (effort)
//   3K+1     participation-rate delta     (interest)
struct FactorLayout {
  int num_kcs = 0;
  int dim() const { return 3 * num_kcs + 2; }
  int acc(int kc) const { return kc - 1; }
  int rt(int kc) const { return num_kcs + kc - 1; }
  int att(int kc) const { return 2 * num_kcs + kc - 1; }
  int interval() const { return 3 * num_kcs; }
  int participation() const { return 3 * num_kcs + 1; }
  std::string dim_name(int i) const;
};

// Training-population baselines; all means come from training sequences only.
struct PopulationStats {
  FactorLayout layout;
  VecX acc_mean;       // indexed by kc_id (size num_kcs+1, slot 0 unused)
  VecX rt_mean;        // ms
  VecX att_mean;       // total attempts per sequence
  std::vector<std::uint8_t> kc_seen;  // 0 => never observed in training
  double interval_mean = 0;  // ms
  double pr_mean = 0;        // answers per ms
  bool zscore = true;
  VecX sigma;          // per-dimension std of raw training factors (1 where 0)

  void save(const std::string& path, const std::string& config_hash) const;
  static PopulationStats load(const std::string& path);
};

using RecordSpan = std::span<const InteractionRecord>;

PopulationStats population_stats(const std::vector<StudentSequence>& train,
                                 int num_kcs, bool zscore);

// Per-KC accuracy and response-time deltas (zeros for absent KCs).
VecX confidence(RecordSpan slice, const PopulationStats& stats);
// Participation-rate delta; zero-duration slices yield PR = 0 (flagged).
double interest(RecordSpan slice, const PopulationStats& stats, bool* degenerate = nullptr);
// Per-KC attempts deltas plus the inter-question interval delta.
VecX effort(RecordSpan slice, const PopulationStats& stats);

// concat(confidence, effort, interest), unscaled.
VecX raw_factors(RecordSpan slice, const PopulationStats& stats);

// L2-normalized factor vector (zero vector stays zero).
VecX maf(RecordSpan slice, const PopulationStats& stats);

// Vector used for clustering: optional per-dimension standardization by the
// training std, then L2 normalization.
VecX cluster_vector(RecordSpan slice, const PopulationStats& stats);

VecX l2_normalize(VecX v);

}  // namespace daskt
