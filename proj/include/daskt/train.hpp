#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "daskt/metrics.hpp"
#include "daskt/model.hpp"

namespace daskt {

struct TrainConfig {
  double lr = 1e-3;
  double lambda = 1e-5;
  double clip_norm = 5.0;
  int batch = 32;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t shuffle_seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  Metrics val;
  bool is_best = false;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_auc = 0;
};

// Minibatch Adam over per-sequence tapes; gradient accumulation order is the
// (deterministic) batch order. Keeps the parameters of the epoch with the
// best validation AUC. Aborts with a diagnostic on NaN loss.
template <typename S>
TrainResult train_model(DasktModelT<S>& model, const std::vector<SeqInput>& train,
                        const std::vector<SeqInput>& val, const TrainConfig& cfg,
                        std::ostream* log = nullptr);

// Pooled predictions for steps 2..n over every sequence; errors on an empty
// split or a split with no predictable steps.
template <typename S>
Metrics evaluate_model(const DasktModelT<S>& model, const std::vector<SeqInput>& split,
                       std::vector<double>* preds_out = nullptr,
                       std::vector<int>* labels_out = nullptr);

std::string format_metrics(const Metrics& m);

extern template TrainResult train_model<double>(DasktModelT<double>&,
                                                const std::vector<SeqInput>&,
                                                const std::vector<SeqInput>&,
                                                const TrainConfig&, std::ostream*);
extern template TrainResult train_model<float>(DasktModelT<float>&,
                                               const std::vector<SeqInput>&,
                                               const std::vector<SeqInput>&,
                                               const TrainConfig&, std::ostream*);
extern template Metrics evaluate_model<double>(const DasktModelT<double>&,
                                               const std::vector<SeqInput>&,
                                               std::vector<double>*, std::vector<int>*);
extern template Metrics evaluate_model<float>(const DasktModelT<float>&,
                                              const std::vector<SeqInput>&,
                                              std::vector<double>*, std::vector<int>*);

}  // namespace daskt
