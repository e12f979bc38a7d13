#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "daskt/affect_features.hpp"
#include "daskt/common.hpp"
#include "daskt/records.hpp"

namespace daskt {

// Fixed affect naming order used across reports and files.
enum class AffectName : int { frustration = 0, concentration = 1, boredom = 2, confusion = 3 };
const char* affect_name(int idx);
constexpr int kNumAffects = 4;

struct AffectModel {
  int k = 4;
  MatX centers;  // k x dim
  std::uint64_t seed = 0;
  int seg_len = 20;
  // name_map[cluster] = AffectName index; a bijection onto the four affects.
  std::array<int, 4> name_map = {0, 1, 2, 3};

  int nearest(const VecX& v) const;  // squared-Euclidean argmin, lower index wins

  void save(const std::string& path, const std::string& config_hash) const;
  static AffectModel load(const std::string& path);
};

struct KMeansResult {
  MatX centers;
  std::vector<int> assignment;
  double sse = 0;
  int iterations = 0;
};

// Lloyd iterations seeded from k distinct random training points; empty
// clusters are re-seeded from the globally farthest point.
KMeansResult kmeans_fit(const std::vector<VecX>& points, int k, std::uint64_t seed,
                        int max_iter = 100, double tol = 1e-9);

// Deterministic naming heuristic over cluster centers:
// highest confidence+interest composite -> concentration, lowest -> boredom,
// of the remaining two the higher-effort one -> frustration, other -> confusion.
// Ties break toward the lower cluster index.
std::array<int, 4> name_clusters(const MatX& centers, const FactorLayout& layout);

struct SegmentAffect {
  int student_id = 0;
  int virtual_index = 0;
  int segment_index = 0;  // -1 marks the whole-sequence assignment
  int affect_index = 0;   // cluster index (not the name index)
};

// Cuts every sequence into ceil(len/seg_len) segments, recomputes factors per
// segment against the training stats, and assigns the nearest center. Also
// emits a whole-sequence assignment per sequence (segment_index -1).
std::vector<SegmentAffect> segment_and_assign(const std::vector<StudentSequence>& sequences,
                                              const AffectModel& model,
                                              const PopulationStats& stats);

void save_assignments(const std::string& path, const std::vector<SegmentAffect>& rows,
                      const std::string& config_hash);
std::vector<SegmentAffect> load_assignments(const std::string& path);

struct ConsistencyRow {
  int affect = 0;            // AffectName index
  std::int64_t external_count = 0;
  std::int64_t agree_count = 0;
  double rate() const {
    return external_count > 0 ? 100.0 * static_cast<double>(agree_count) /
                                    static_cast<double>(external_count)
                              : 0.0;
  }
};

struct ConsistencyTable {
  std::array<ConsistencyRow, 4> per_affect;
  std::int64_t total = 0;
  std::int64_t total_agree = 0;
  double overall_rate() const {
    return total > 0 ? 100.0 * static_cast<double>(total_agree) / static_cast<double>(total)
                     : 0.0;
  }
};

// Per-record comparison of our (name-mapped) affect against the external
// argmax affect. `ours` and `external` are row-aligned; entries with a
// negative `ours` value are skipped.
ConsistencyTable affect_consistency(const std::vector<int>& ours,
                                    const std::vector<std::array<double, 4>>& external);

}  // namespace daskt
