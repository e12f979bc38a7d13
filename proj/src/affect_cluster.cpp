#include "daskt/affect_cluster.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace daskt {

const char* affect_name(int idx) {
  switch (idx) {
    case 0: return "frustration";
    case 1: return "concentration";
    case 2: return "boredom";
    case 3: return "confusion";
    default: return "null";
  }
}

int AffectModel::nearest(const VecX& v) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    double d = (centers.row(c).transpose() - v).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans_fit(const std::vector<VecX>& points, int k, std::uint64_t seed,
                        int max_iter, double tol) {
  int n = static_cast<int>(points.size());
  if (n < k) fail(ErrorClass::cluster, "kmeans: fewer points than clusters");
  int dim = static_cast<int>(points[0].size());

  // init from k distinct random training points
  std::mt19937_64 rng(seed);
  MatX centers(k, dim);
  {
    std::set<int> chosen;
    std::vector<VecX> picked;
    int guard = 0;
    while (static_cast<int>(picked.size()) < k) {
      if (++guard > 1000 * k + n * 4)
        fail(ErrorClass::cluster, "kmeans: fewer than k distinct vectors");
      int i = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
      if (chosen.count(i)) continue;
      bool dup = false;
      for (const auto& p : picked)
        if ((p - points[static_cast<std::size_t>(i)]).squaredNorm() == 0.0) dup = true;
      chosen.insert(i);
      if (!dup) picked.push_back(points[static_cast<std::size_t>(i)]);
    }
    for (int c = 0; c < k; ++c) centers.row(c) = picked[static_cast<std::size_t>(c)].transpose();
  }

  KMeansResult res;
  res.assignment.assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < max_iter; ++iter) {
    res.iterations = iter + 1;
    // assign
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = (centers.row(c).transpose() - points[static_cast<std::size_t>(i)]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      res.assignment[static_cast<std::size_t>(i)] = best;
    }
    // update
    MatX next = MatX::Zero(k, dim);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      next.row(res.assignment[static_cast<std::size_t>(i)]) +=
          points[static_cast<std::size_t>(i)].transpose();
      counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(i)])]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= counts[static_cast<std::size_t>(c)];
      } else {
        // re-seed from the globally farthest point
        int far = 0;
        double far_d = -1;
        for (int i = 0; i < n; ++i) {
          double d = (centers.row(res.assignment[static_cast<std::size_t>(i)]).transpose() -
                      points[static_cast<std::size_t>(i)])
                         .squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next.row(c) = points[static_cast<std::size_t>(far)].transpose();
      }
    }
    double move = 0;
    for (int c = 0; c < k; ++c)
      move = std::max(move, (next.row(c) - centers.row(c)).norm());
    centers = next;
    if (move < tol) break;
  }
  // final assignment against the converged centers
  res.sse = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      double d = (centers.row(c).transpose() - points[static_cast<std::size_t>(i)]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    res.assignment[static_cast<std::size_t>(i)] = best;
    res.sse += best_d;
  }
  res.centers = std::move(centers);
  return res;
}

std::array<int, 4> name_clusters(const MatX& centers, const FactorLayout& layout) {
  int k = static_cast<int>(centers.rows());
  if (k != 4) fail(ErrorClass::cluster, "name_clusters expects 4 centers");
  int K = layout.num_kcs;
  auto conf_score = [&](int c) {
    double acc = centers.row(c).segment(0, K).mean();
    double rt = centers.row(c).segment(K, K).mean();
    return acc - rt;  // fast and accurate reads as confident
  };
  auto eff_score = [&](int c) {
    double att = centers.row(c).segment(2 * K, K).mean();
    double gap = centers(c, layout.interval());
    return att - gap;  // many attempts, short gaps
  };
  auto composite = [&](int c) { return conf_score(c) + centers(c, layout.participation()); };

  std::array<int, 4> name_map{-1, -1, -1, -1};
  std::vector<int> order{0, 1, 2, 3};
  // stable ordering => ties break toward the lower cluster index
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return composite(a) > composite(b); });
  name_map[static_cast<std::size_t>(order[0])] = static_cast<int>(AffectName::concentration);
  name_map[static_cast<std::size_t>(order[3])] = static_cast<int>(AffectName::boredom);
  int r1 = order[1], r2 = order[2];
  int frus = eff_score(r1) >= eff_score(r2) ? r1 : r2;
  if (eff_score(r1) == eff_score(r2)) frus = std::min(r1, r2);
  int conf = frus == r1 ? r2 : r1;
  name_map[static_cast<std::size_t>(frus)] = static_cast<int>(AffectName::frustration);
  name_map[static_cast<std::size_t>(conf)] = static_cast<int>(AffectName::confusion);
  return name_map;
}

std::vector<SegmentAffect> segment_and_assign(const std::vector<StudentSequence>& sequences,
                                              const AffectModel& model,
                                              const PopulationStats& stats) {
  std::vector<SegmentAffect> out;
  for (const auto& seq : sequences) {
    int n = seq.effective_len();
    if (n == 0) continue;
    RecordSpan all(seq.records);
    SegmentAffect whole;
    whole.student_id = seq.student_id;
    whole.virtual_index = seq.virtual_index;
    whole.segment_index = -1;
    whole.affect_index = model.nearest(cluster_vector(all, stats));
    out.push_back(whole);
    int nseg = (n + model.seg_len - 1) / model.seg_len;
    for (int s = 0; s < nseg; ++s) {
      int lo = s * model.seg_len;
      int hi = std::min(n, lo + model.seg_len);
      SegmentAffect sa;
      sa.student_id = seq.student_id;
      sa.virtual_index = seq.virtual_index;
      sa.segment_index = s;
      sa.affect_index = model.nearest(cluster_vector(all.subspan(
          static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)), stats));
      out.push_back(sa);
    }
  }
  return out;
}

ConsistencyTable affect_consistency(const std::vector<int>& ours,
                                    const std::vector<std::array<double, 4>>& external) {
  if (ours.size() != external.size())
    fail(ErrorClass::consistency, "consistency: unaligned external affect file");
  ConsistencyTable t;
  for (int a = 0; a < 4; ++a) t.per_affect[static_cast<std::size_t>(a)].affect = a;
  for (std::size_t i = 0; i < ours.size(); ++i) {
    if (ours[i] < 0) continue;
    int ext = 0;
    for (int a = 1; a < 4; ++a)
      if (external[i][static_cast<std::size_t>(a)] > external[i][static_cast<std::size_t>(ext)])
        ext = a;
    auto& row = t.per_affect[static_cast<std::size_t>(ext)];
    row.external_count++;
    t.total++;
    if (ours[i] == ext) {
      row.agree_count++;
      t.total_agree++;
    }
  }
  return t;
}

void AffectModel::save(const std::string& path, const std::string& config_hash) const {
  std::ostringstream out;
  out << "# daskt-affect-model v1\n# config_hash=" << config_hash << "\n";
  out << "k\t" << k << "\n";
  out << "dims\t" << centers.cols() << "\n";
  out << "seed\t" << seed << "\n";
  out << "seg_len\t" << seg_len << "\n";
  out << "name_map";
  for (int c = 0; c < 4; ++c) out << "\t" << affect_name(name_map[static_cast<std::size_t>(c)]);
  out << "\n";
  for (int c = 0; c < k; ++c) {
    out << "center\t" << c;
    for (int j = 0; j < centers.cols(); ++j) out << "\t" << fmt_full(centers(c, j));
    out << "\n";
  }
  write_text_file(path, out.str());
}

AffectModel AffectModel::load(const std::string& path) {
  AffectModel m;
  std::istringstream in(read_text_file(path));
  std::string line;
  int dims = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f[0] == "k") m.k = std::stoi(f[1]);
    else if (f[0] == "dims") {
      dims = std::stoi(f[1]);
      m.centers = MatX::Zero(m.k, dims);
    } else if (f[0] == "seed") m.seed = std::stoull(f[1]);
    else if (f[0] == "seg_len") m.seg_len = std::stoi(f[1]);
    else if (f[0] == "name_map") {
      for (int c = 0; c < 4; ++c) {
        for (int a = 0; a < 4; ++a)
          if (f[static_cast<std::size_t>(c) + 1] == affect_name(a))
            m.name_map[static_cast<std::size_t>(c)] = a;
      }
    } else if (f[0] == "center") {
      int c = std::stoi(f[1]);
      for (int j = 0; j < dims; ++j)
        m.centers(c, j) = std::stod(f[static_cast<std::size_t>(j) + 2]);
    }
  }
  return m;
}

void save_assignments(const std::string& path, const std::vector<SegmentAffect>& rows,
                      const std::string& config_hash) {
  std::ostringstream out;
  out << "# daskt-assignments v1\n# config_hash=" << config_hash << "\n";
  out << "student\tpart\tsegment\taffect\n";
  for (const auto& r : rows)
    out << r.student_id << "\t" << r.virtual_index << "\t" << r.segment_index << "\t"
        << r.affect_index << "\n";
  write_text_file(path, out.str());
}

std::vector<SegmentAffect> load_assignments(const std::string& path) {
  std::vector<SegmentAffect> rows;
  std::istringstream in(read_text_file(path));
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    auto f = split(line, '\t');
    if (f.size() != 4) fail(ErrorClass::config, "bad assignments line in " + path);
    rows.push_back({std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3])});
  }
  return rows;
}

}  // namespace daskt
