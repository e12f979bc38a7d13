#include "daskt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace daskt {

namespace {

template <typename S>
std::pair<double, long> run_batch(DasktModelT<S>& model, const std::vector<SeqInput>& seqs,
                                  const std::vector<std::size_t>& order, std::size_t lo,
                                  std::size_t hi, const TrainConfig& cfg) {
  auto& ps = model.params();
  ps.zero_grads();
  double bce = 0;
  long masked = 0;
  ad::TapeT<S> tape;
  for (std::size_t b = lo; b < hi; ++b) {
    const SeqInput& seq = seqs[order[b]];
    if (seq.n() < 2) continue;
    tape.reset();
    auto out = model.forward(tape, seq);
    Mat<S> labels(1, seq.n() - 1);
    for (int t = 1; t < seq.n(); ++t)
      labels(0, t - 1) = static_cast<S>(seq.responses[static_cast<std::size_t>(t)]);
    auto loss = ad::bce_sum<S>(out.preds, labels);
    bce += static_cast<double>(loss.value()(0, 0));
    masked += seq.n() - 1;
    tape.backward(loss);
  }
  if (masked > 0) {
    ps.scale_grads(static_cast<S>(1.0 / static_cast<double>(masked)));
    ps.add_l2_grad(cfg.lambda);
    ps.clip_grads(cfg.clip_norm);
    ps.adam_step({cfg.lr, 0.9, 0.999, 1e-8});
  }
  return {bce, masked};
}

}  // namespace

template <typename S>
Metrics evaluate_model(const DasktModelT<S>& model, const std::vector<SeqInput>& split,
                       std::vector<double>* preds_out, std::vector<int>* labels_out) {
  if (split.empty()) fail(ErrorClass::evaluate, "evaluate: empty split");
  std::vector<double> preds;
  std::vector<int> labels;
  ad::TapeT<S> tape;
  for (const auto& seq : split) {
    if (seq.n() < 2) continue;
    tape.reset();
    auto out = model.forward(tape, seq);
    for (int t = 1; t < seq.n(); ++t) {
      preds.push_back(static_cast<double>(out.preds.value()(0, t - 1)));
      labels.push_back(seq.responses[static_cast<std::size_t>(t)]);
    }
  }
  if (preds.empty()) fail(ErrorClass::evaluate, "evaluate: no predictable steps in split");
  auto m = compute_metrics(preds, labels);
  if (preds_out) *preds_out = std::move(preds);
  if (labels_out) *labels_out = std::move(labels);
  return m;
}

template <typename S>
TrainResult train_model(DasktModelT<S>& model, const std::vector<SeqInput>& train,
                        const std::vector<SeqInput>& val, const TrainConfig& cfg,
                        std::ostream* log) {
  if (train.empty()) fail(ErrorClass::train, "train: empty training split");
  auto& ps = model.params();
  TrainResult res;
  std::vector<Mat<S>> best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.shuffle_seed, "epoch" + std::to_string(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double bce_total = 0;
    long mask_total = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch)) {
      std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch));
      auto [bce, masked] = run_batch(model, train, order, lo, hi, cfg);
      bce_total += bce;
      mask_total += masked;
    }
    if (mask_total == 0) fail(ErrorClass::train, "train: no predictable steps");
    EpochLog el;
    el.epoch = epoch;
    el.train_loss = bce_total / static_cast<double>(mask_total) +
                    cfg.lambda * ps.l2_penalty();
    if (!std::isfinite(el.train_loss))
      fail(ErrorClass::train,
           "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    el.val = evaluate_model(model, val);
    double score = el.val.auc.value_or(0.0);
    if (res.best_epoch < 0 || score > res.best_val_auc) {
      res.best_val_auc = score;
      res.best_epoch = epoch;
      best = ps.snapshot_values();
      el.is_best = true;
    }
    if (log) {
      (*log) << "epoch=" << epoch << " train_loss=" << fmt_fixed(el.train_loss)
             << " " << format_metrics(el.val) << " best=" << (el.is_best ? 1 : 0)
             << "\n";
    }
    res.epochs.push_back(el);
    if (epoch - res.best_epoch >= cfg.patience && epoch >= cfg.patience) break;
  }
  if (!best.empty()) ps.restore_values(best);
  return res;
}

std::string format_metrics(const Metrics& m) {
  std::ostringstream out;
  out << "rmse=" << fmt_fixed(m.rmse) << " acc=" << fmt_fixed(m.acc)
      << " auc=" << (m.auc ? fmt_fixed(*m.auc) : std::string("NA"))
      << " r2=" << (m.r2 ? fmt_fixed(*m.r2) : std::string("NA")) << " n="
      << m.n_predictions;
  return out.str();
}

template TrainResult train_model<double>(DasktModelT<double>&, const std::vector<SeqInput>&,
                                         const std::vector<SeqInput>&, const TrainConfig&,
                                         std::ostream*);
template TrainResult train_model<float>(DasktModelT<float>&, const std::vector<SeqInput>&,
                                        const std::vector<SeqInput>&, const TrainConfig&,
                                        std::ostream*);
template Metrics evaluate_model<double>(const DasktModelT<double>&,
                                        const std::vector<SeqInput>&, std::vector<double>*,
                                        std::vector<int>*);
template Metrics evaluate_model<float>(const DasktModelT<float>&, const std::vector<SeqInput>&,
                                       std::vector<double>*, std::vector<int>*);

}  // namespace daskt
