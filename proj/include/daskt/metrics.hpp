#pragma once

#include <optional>
#include <vector>

namespace daskt {

struct Metrics {
  double rmse = 0;
  double acc = 0;
  std::optional<double> auc;  // undefined when only one class is present
  std::optional<double> r2;   // undefined when a side has zero variance
  long n_predictions = 0;
};

// Pooled metrics over all predictions. ACC thresholds at 0.5 (>= 0.5 counts
// as a positive prediction). AUC is rank-based with average ranks, i.e. tied
// pairs earn half credit; the numerator is integer-valued (doubled) so it can
// be compared exactly against a pairwise count.
Metrics compute_metrics(const std::vector<double>& preds, const std::vector<int>& labels);

// Doubled AUC numerator: 2*sum(ranks of positives) - n_pos*(n_pos+1).
// AUC = numerator2 / (2 * n_pos * n_neg).
double auc_numerator2(const std::vector<double>& preds, const std::vector<int>& labels);

}  // namespace daskt
