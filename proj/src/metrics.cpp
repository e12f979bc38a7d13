#include "daskt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "daskt/common.hpp"

namespace daskt {

double auc_numerator2(const std::vector<double>& preds, const std::vector<int>& labels) {
  std::size_t n = preds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });
  double rank2_pos_sum = 0;  // doubled ranks so tied averages stay integral
  long n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && preds[order[j]] == preds[order[i]]) ++j;
    // the tied block occupies ranks i+1..j; average rank doubled = (i+1)+(j)
    double rank2 = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank2_pos_sum += rank2;
        ++n_pos;
      }
    }
    i = j;
  }
  return rank2_pos_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1);
}

Metrics compute_metrics(const std::vector<double>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    fail(ErrorClass::evaluate, "metrics: empty or mismatched prediction set");
  Metrics m;
  m.n_predictions = static_cast<long>(preds.size());
  double se = 0;
  long correct = 0, n_pos = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double d = preds[i] - labels[i];
    se += d * d;
    int hard = preds[i] >= 0.5 ? 1 : 0;
    if (hard == labels[i]) ++correct;
    if (labels[i] == 1) ++n_pos;
  }
  double n = static_cast<double>(preds.size());
  m.rmse = std::sqrt(se / n);
  m.acc = static_cast<double>(correct) / n;

  long n_neg = m.n_predictions - n_pos;
  if (n_pos > 0 && n_neg > 0)
    m.auc = auc_numerator2(preds, labels) /
            (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));

  // r^2 as the squared Pearson correlation
  double mean_p = 0, mean_l = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    mean_p += preds[i];
    mean_l += labels[i];
  }
  mean_p /= n;
  mean_l /= n;
  double spl = 0, spp = 0, sll = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    double dp = preds[i] - mean_p, dl = labels[i] - mean_l;
    spl += dp * dl;
    spp += dp * dp;
    sll += dl * dl;
  }
  if (spp > 0 && sll > 0) {
    double r = spl / std::sqrt(spp * sll);
    m.r2 = r * r;
  }
  return m;
}

}  // namespace daskt
