#include <doctest.h>

#include <random>

#include "daskt/metrics.hpp"
#include "daskt/common.hpp"

using namespace daskt;

namespace {

// O(n^2) pairwise AUC oracle; returns the same doubled numerator the
// implementation uses so equality can be checked exactly.
double pairwise_auc_numerator2(const std::vector<double>& preds,
                               const std::vector<int>& labels) {
  double num2 = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < preds.size(); ++j) {
      if (labels[j] != 0) continue;
      if (preds[i] > preds[j])
        num2 += 2;
      else if (preds[i] == preds[j])
        num2 += 1;
    }
  }
  return num2;
}

std::optional<double> pairwise_auc(const std::vector<double>& preds,
                                   const std::vector<int>& labels) {
  long np = 0, nn = 0;
  for (int l : labels) (l == 1 ? np : nn)++;
  if (np == 0 || nn == 0) return std::nullopt;
  return pairwise_auc_numerator2(preds, labels) / (2.0 * static_cast<double>(np) *
                                                   static_cast<double>(nn));
}

}  // namespace

TEST_CASE("auc: textbook example") {
  std::vector<double> p{0.1, 0.4, 0.35, 0.8};
  std::vector<int> l{0, 0, 1, 1};
  auto m = compute_metrics(p, l);
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == doctest::Approx(0.75));
  CHECK(*pairwise_auc(p, l) == doctest::Approx(0.75));
}

TEST_CASE("perfect predictions: rmse 0, acc 1") {
  std::vector<double> p{1, 0, 1, 1, 0};
  std::vector<int> l{1, 0, 1, 1, 0};
  auto m = compute_metrics(p, l);
  CHECK(m.rmse == doctest::Approx(0.0));
  CHECK(m.acc == doctest::Approx(1.0));
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == doctest::Approx(1.0));
}

TEST_CASE("rmse direct formula") {
  auto m = compute_metrics({1.0, 0.0}, {0, 0});
  CHECK(m.rmse == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("single-class auc is undefined") {
  auto m = compute_metrics({0.2, 0.7, 0.9}, {1, 1, 1});
  CHECK_FALSE(m.auc.has_value());
}

TEST_CASE("auc equals the pairwise oracle exactly, including ties") {
  std::mt19937_64 rng(77);
  for (int inst = 0; inst < 100; ++inst) {
    int n = 2 + static_cast<int>(rng() % 999);
    std::vector<double> p(static_cast<size_t>(n));
    std::vector<int> l(static_cast<size_t>(n));
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // coarse grid forces plenty of tied scores
      p[static_cast<size_t>(i)] = static_cast<double>(rng() % 21) / 20.0;
      l[static_cast<size_t>(i)] = static_cast<int>(rng() % 2);
      (l[static_cast<size_t>(i)] ? has1 : has0) = true;
    }
    if (!has0 || !has1) {
      l[0] = 0;
      l[1] = 1;
    }
    CHECK(auc_numerator2(p, l) == pairwise_auc_numerator2(p, l));  // exact
    auto m = compute_metrics(p, l);
    REQUIRE(m.auc.has_value());
    CHECK(*m.auc == *pairwise_auc(p, l));  // bitwise: same numerator and denominator
  }
}

TEST_CASE("metrics are invariant to permutation of the prediction set") {
  std::mt19937_64 rng(5);
  std::vector<double> p;
  std::vector<int> l;
  for (int i = 0; i < 200; ++i) {
    p.push_back(static_cast<double>(rng() % 100) / 100.0);
    l.push_back(static_cast<int>(rng() % 2));
  }
  auto m1 = compute_metrics(p, l);
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<double> p2;
  std::vector<int> l2;
  for (auto i : idx) {
    p2.push_back(p[i]);
    l2.push_back(l[i]);
  }
  auto m2 = compute_metrics(p2, l2);
  CHECK(m1.rmse == doctest::Approx(m2.rmse).epsilon(1e-12));
  CHECK(m1.acc == m2.acc);
  CHECK(*m1.auc == *m2.auc);
  CHECK(*m1.r2 == doctest::Approx(*m2.r2).epsilon(1e-12));
}

TEST_CASE("r2 is the squared Pearson correlation, affine-invariant") {
  std::mt19937_64 rng(6);
  std::vector<double> p;
  std::vector<int> l;
  for (int i = 0; i < 300; ++i) {
    l.push_back(static_cast<int>(rng() % 2));
    p.push_back(0.3 * l.back() + static_cast<double>(rng() % 50) / 100.0);
  }
  auto m1 = compute_metrics(p, l);
  std::vector<double> shifted, halved;
  for (double v : p) {
    shifted.push_back(0.25 * v + 0.1);  // positive affine map
    halved.push_back(0.5 * v);          // exact in floating point
  }
  auto m2 = compute_metrics(shifted, l);
  REQUIRE(m1.r2.has_value());
  REQUIRE(m2.r2.has_value());
  CHECK(*m1.r2 == doctest::Approx(*m2.r2).epsilon(1e-9));
  CHECK(*m1.r2 >= 0.0);
  CHECK(*m1.r2 <= 1.0);
  // AUC is exactly invariant under a transform that provably preserves the
  // tie structure (power-of-two scaling)
  auto m3 = compute_metrics(halved, l);
  CHECK(*m1.auc == *m3.auc);
}

TEST_CASE("constant predictions: r2 undefined, acc thresholded at 0.5") {
  auto m = compute_metrics({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 1});
  CHECK_FALSE(m.r2.has_value());
  CHECK(m.acc == doctest::Approx(0.75));  // 0.5 counts as a positive call
  REQUIRE(m.auc.has_value());
  CHECK(*m.auc == doctest::Approx(0.5));  // all ties: half credit
}

TEST_CASE("empty or mismatched inputs error") {
  CHECK_THROWS_AS(compute_metrics({}, {}), DasktError);
  CHECK_THROWS_AS(compute_metrics({0.5}, {1, 0}), DasktError);
}
