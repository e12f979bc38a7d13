#include <doctest.h>

#include <random>

#include "daskt/affect_cluster.hpp"
#include "testutil.hpp"

using namespace daskt;

namespace {

// Exhaustive 2-partition SSE optimum, the independent clustering oracle.
double best_two_partition_sse(const std::vector<VecX>& pts) {
  int n = static_cast<int>(pts.size());
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    VecX c0 = VecX::Zero(pts[0].size()), c1 = c0;
    int n0 = 0, n1 = 0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        c0 += pts[static_cast<size_t>(i)];
        ++n0;
      } else {
        c1 += pts[static_cast<size_t>(i)];
        ++n1;
      }
    }
    c0 /= n0;
    c1 /= n1;
    double sse = 0;
    for (int i = 0; i < n; ++i)
      sse += (pts[static_cast<size_t>(i)] - ((mask & (1u << i)) ? c0 : c1)).squaredNorm();
    best = std::min(best, sse);
  }
  return best;
}

double best_of_seeds_sse(const std::vector<VecX>& pts, int k, int n_seeds) {
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_seeds; ++s)
    best = std::min(best, kmeans_fit(pts, k, 1000 + static_cast<std::uint64_t>(s)).sse);
  return best;
}

InteractionRecord rec(int kc, int correct, std::int64_t start_ms, std::int64_t resp_ms,
                      int attempts = 1) {
  InteractionRecord r;
  r.kc_id = kc;
  r.problem_id = kc;
  r.correct = correct;
  r.start_ms = start_ms;
  r.end_ms = start_ms + resp_ms;
  r.response_ms = resp_ms;
  r.attempts = attempts;
  return r;
}

}  // namespace

TEST_CASE("kmeans: two obvious blobs") {
  std::vector<VecX> pts;
  auto at = [](double x, double y) {
    VecX v(2);
    v << x, y;
    return v;
  };
  pts = {at(0, 0), at(0, 1), at(10, 10), at(10, 11)};
  auto res = kmeans_fit(pts, 2, 7);
  // centers must be {(0,0.5),(10,10.5)} in some order
  bool a = res.centers.row(0).isApprox(Eigen::RowVector2d(0, 0.5)) &&
           res.centers.row(1).isApprox(Eigen::RowVector2d(10, 10.5));
  bool b = res.centers.row(1).isApprox(Eigen::RowVector2d(0, 0.5)) &&
           res.centers.row(0).isApprox(Eigen::RowVector2d(10, 10.5));
  CHECK((a || b));
  CHECK(res.sse == doctest::Approx(1.0));
}

TEST_CASE("kmeans: k points give k singleton clusters with zero SSE") {
  std::mt19937_64 rng(3);
  std::vector<VecX> pts;
  for (int i = 0; i < 4; ++i) pts.push_back(daskt::testutil::random_matrix(3, 1, rng));
  auto res = kmeans_fit(pts, 4, 11);
  CHECK(res.sse == doctest::Approx(0.0));
}

TEST_CASE("kmeans: same seed gives bit-identical centers") {
  std::mt19937_64 rng(4);
  std::vector<VecX> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(daskt::testutil::random_matrix(4, 1, rng));
  auto r1 = kmeans_fit(pts, 4, 99);
  auto r2 = kmeans_fit(pts, 4, 99);
  CHECK(std::memcmp(r1.centers.data(), r2.centers.data(),
                    sizeof(double) * static_cast<size_t>(r1.centers.size())) == 0);
  CHECK(r1.assignment == r2.assignment);
}

TEST_CASE("kmeans: converged result is a fixed point and matches the oracle") {
  std::mt19937_64 rng(5);
  for (int inst = 0; inst < 25; ++inst) {
    int n = 4 + static_cast<int>(rng() % 5);  // 4..8
    std::vector<VecX> pts;
    for (int i = 0; i < n; ++i) pts.push_back(daskt::testutil::random_matrix(2, 1, rng));
    auto res = kmeans_fit(pts, 2, rng());
    // fixed point: reassignment changes nothing
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = (res.centers.row(0).transpose() - pts[static_cast<size_t>(i)]).squaredNorm();
      double d1 = (res.centers.row(1).transpose() - pts[static_cast<size_t>(i)]).squaredNorm();
      if (d1 < bd) best = 1;
      CHECK(res.assignment[static_cast<size_t>(i)] == best);
    }
    // best-of-10 seeds matches the exhaustive optimum
    CHECK(best_of_seeds_sse(pts, 2, 10) ==
          doctest::Approx(best_two_partition_sse(pts)).epsilon(1e-9));
  }
}

TEST_CASE("kmeans errors on fewer than k distinct points") {
  std::vector<VecX> pts(5, VecX::Zero(2));
  CHECK_THROWS_AS(kmeans_fit(pts, 2, 1), DasktError);
  CHECK_THROWS_AS(kmeans_fit(std::vector<VecX>{VecX::Zero(2)}, 2, 1), DasktError);
}

TEST_CASE("name_clusters: rule and order invariance") {
  FactorLayout layout;
  layout.num_kcs = 1;  // dims: [acc, rt, att, interval, pr]
  MatX centers(4, 5);
  // concentration: high acc, fast, few attempts, engaged
  centers.row(0) << 0.8, -0.5, -0.2, -0.1, 0.6;
  // boredom: low acc, slow, disengaged
  centers.row(1) << -0.6, 0.7, -0.4, 0.8, -0.7;
  // frustration: low acc but high effort
  centers.row(2) << -0.4, 0.2, 0.9, -0.5, 0.1;
  // confusion: low-ish everything
  centers.row(3) << -0.2, 0.3, -0.1, 0.2, 0.0;

  auto names = name_clusters(centers, layout);
  CHECK(names[0] == static_cast<int>(AffectName::concentration));
  CHECK(names[1] == static_cast<int>(AffectName::boredom));
  CHECK(names[2] == static_cast<int>(AffectName::frustration));
  CHECK(names[3] == static_cast<int>(AffectName::confusion));

  // permuting center order permutes the map identically
  std::vector<int> perm{2, 0, 3, 1};
  MatX shuffled(4, 5);
  for (int i = 0; i < 4; ++i) shuffled.row(i) = centers.row(perm[static_cast<size_t>(i)]);
  auto names2 = name_clusters(shuffled, layout);
  for (int i = 0; i < 4; ++i)
    CHECK(names2[static_cast<size_t>(i)] == names[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
}

TEST_CASE("name_clusters: composite tie breaks to the lower cluster index") {
  FactorLayout layout;
  layout.num_kcs = 1;
  MatX centers = MatX::Zero(4, 5);
  centers.row(0) << 0.5, 0, 0, 0, 0;  // composite 0.5
  centers.row(1) << 0.5, 0, 0, 0, 0;  // tie
  centers.row(2) << -0.5, 0, 0.4, 0, 0;
  centers.row(3) << -0.5, 0, 0.1, 0, 0;  // composite tie with 2, lower effort
  auto names = name_clusters(centers, layout);
  CHECK(names[0] == static_cast<int>(AffectName::concentration));  // lower index wins the tie
  CHECK(names[3] == static_cast<int>(AffectName::boredom));
  CHECK(names[2] == static_cast<int>(AffectName::frustration));
}

TEST_CASE("segment_and_assign: 14 answers at seg_len 5 give segments 5/5/4") {
  std::vector<StudentSequence> seqs(1);
  auto& s = seqs[0];
  s.student_id = 1;
  s.target_len = 20;
  for (int i = 0; i < 14; ++i) s.records.push_back(rec(1, i % 2, i * 1000, 500));
  s.pad_len = 6;

  std::vector<StudentSequence> train = seqs;
  auto stats = population_stats(train, 1, false);
  AffectModel model;
  model.k = 4;
  model.seg_len = 5;
  model.centers = MatX::Zero(4, stats.layout.dim());
  model.centers(1, 0) = 1.0;
  model.centers(2, 0) = -1.0;
  model.centers(3, 1) = 1.0;

  auto rows = segment_and_assign(seqs, model, stats);
  // one whole-sequence row + 3 segments
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].segment_index == -1);
  CHECK(rows[1].segment_index == 0);
  CHECK(rows[3].segment_index == 2);
}

TEST_CASE("segment_and_assign: exact center match and tie rule") {
  std::vector<StudentSequence> train(1);
  train[0].student_id = 1;
  train[0].target_len = 10;
  for (int i = 0; i < 4; ++i) train[0].records.push_back(rec(1, 1, i * 1000, 500));
  train[0].pad_len = 6;
  auto stats = population_stats(train, 1, false);

  VecX v = cluster_vector(RecordSpan(train[0].records), stats);
  AffectModel model;
  model.k = 4;
  model.seg_len = 100;
  model.centers = MatX::Zero(4, stats.layout.dim());
  model.centers.row(2) = v.transpose();  // exact match at index 2
  model.centers.row(3) = v.transpose();  // duplicate: tie goes to lower index
  model.centers.row(0).setConstant(9.0);
  model.centers.row(1).setConstant(-9.0);
  auto rows = segment_and_assign(train, model, stats);
  CHECK(rows[0].affect_index == 2);
  CHECK(rows[1].affect_index == 2);
}

TEST_CASE("whole-sequence assignment equals kmeans assignment when seg_len covers it") {
  std::mt19937_64 rng(12);
  std::vector<StudentSequence> train;
  for (int s = 0; s < 12; ++s) {
    StudentSequence seq;
    seq.student_id = s + 1;
    seq.target_len = 8;
    int n = 3 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i)
      seq.records.push_back(rec(1 + static_cast<int>(rng() % 3), static_cast<int>(rng() % 2),
                                i * 1000 + static_cast<int>(rng() % 100),
                                500 + static_cast<int>(rng() % 3000),
                                1 + static_cast<int>(rng() % 3)));
    seq.pad_len = seq.target_len - seq.effective_len();
    train.push_back(seq);
  }
  auto stats = population_stats(train, 3, true);
  std::vector<VecX> vectors;
  for (const auto& s : train) vectors.push_back(cluster_vector(RecordSpan(s.records), stats));
  auto km = kmeans_fit(vectors, 4, 77);
  AffectModel model;
  model.k = 4;
  model.centers = km.centers;
  model.seg_len = 100;  // >= every sequence length
  auto rows = segment_and_assign(train, model, stats);
  // row order: (whole, seg0) per sequence
  for (int s = 0; s < 12; ++s) {
    CHECK(rows[static_cast<size_t>(2 * s)].affect_index == km.assignment[static_cast<size_t>(s)]);
    CHECK(rows[static_cast<size_t>(2 * s + 1)].affect_index ==
          km.assignment[static_cast<size_t>(s)]);
  }
}

TEST_CASE("affect_consistency: identity 100%, mismatch counted, misaligned errors") {
  std::vector<int> ours{0, 1, 2, 3, 1, 1};
  std::vector<std::array<double, 4>> ext;
  for (int o : ours) {
    std::array<double, 4> c{0.1, 0.1, 0.1, 0.1};
    c[static_cast<size_t>(o)] = 0.9;
    ext.push_back(c);
  }
  auto t = affect_consistency(ours, ext);
  CHECK(t.total == 6);
  CHECK(t.overall_rate() == doctest::Approx(100.0));
  for (const auto& row : t.per_affect)
    if (row.external_count > 0) CHECK(row.rate() == doctest::Approx(100.0));

  ext[0][1] = 1.5;  // external argmax flips to concentration, ours stays frustration
  auto t2 = affect_consistency(ours, ext);
  CHECK(t2.total_agree == 5);

  CHECK_THROWS_AS(affect_consistency({0, 1}, ext), DasktError);
}

TEST_CASE("affect_consistency: uniform random external labels agree ~25%") {
  std::mt19937_64 rng(13);
  std::vector<int> ours;
  std::vector<std::array<double, 4>> ext;
  for (int i = 0; i < 20000; ++i) {
    ours.push_back(static_cast<int>(rng() % 4));
    std::array<double, 4> c{0, 0, 0, 0};
    c[rng() % 4] = 1.0;
    ext.push_back(c);
  }
  auto t = affect_consistency(ours, ext);
  CHECK(t.overall_rate() > 20.0);
  CHECK(t.overall_rate() < 30.0);
}
