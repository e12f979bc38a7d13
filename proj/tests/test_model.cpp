#include <doctest.h>

#include <random>

#include "daskt/model.hpp"
#include "testutil.hpp"

using namespace daskt;
using namespace daskt::ad;

namespace {

ModelConfig small_cfg(Ablation ab = Ablation::full) {
  ModelConfig cfg;
  cfg.d_p = cfg.d_k = cfg.d_r = cfg.d_aff = cfg.d = 6;
  cfg.heads = 2;
  cfg.num_problems = 9;
  cfg.num_kcs = 4;
  cfg.ablation = ab;
  cfg.init_seed = 42;
  return cfg;
}

SeqInput demo_seq(int n, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  SeqInput s;
  for (int i = 0; i < n; ++i) {
    s.problems.push_back(1 + static_cast<int>(rng() % 9));
    s.kcs.push_back(1 + static_cast<int>(rng() % 4));
    s.responses.push_back(static_cast<int>(rng() % 2));
    s.affect.push_back(static_cast<int>(rng() % 4));
  }
  return s;
}

}  // namespace

TEST_CASE("forward: all-zero parameters predict 0.5 everywhere") {
  auto cfg = small_cfg();
  DasktModelT<double> model(cfg);
  auto& ps = model.params();
  for (int s = 0; s < ps.count(); ++s) ps.value(s).setZero();
  TapeT<double> t;
  auto out = model.forward(t, demo_seq(7));
  CHECK(out.preds.value().isApproxToConstant(0.5));
}

TEST_CASE("forward: prediction/hidden shapes and input widths per ablation") {
  for (auto ab : {Ablation::full, Ablation::no_a_gat, Ablation::no_at_gat,
                  Ablation::no_ica, Ablation::no_maf}) {
    auto cfg = small_cfg(ab);
    CHECK(cfg.lstm_in_dim() ==
          (ab == Ablation::no_maf ? cfg.d_p + cfg.d_k + cfg.d_r
                                  : cfg.d_p + cfg.d_k + cfg.d_aff + cfg.d_r));
    DasktModelT<double> model(cfg);
    TapeT<double> t;
    auto out = model.forward(t, demo_seq(6), true);
    CHECK(out.preds.cols() == 5);
    CHECK(out.hidden.rows() == cfg.d);
    CHECK(out.hidden.cols() == 6);
  }
  // concat heads widen the affect block in no_a_gat wiring
  auto cfg = small_cfg(Ablation::no_a_gat);
  cfg.concat_heads = true;
  CHECK(cfg.affect_out_dim() == cfg.d_aff * cfg.heads);
  DasktModelT<double> m2(cfg);
  TapeT<double> t2;
  auto out2 = m2.forward(t2, demo_seq(4));
  CHECK(out2.preds.cols() == 3);
}

TEST_CASE("forward is deterministic for a fixed seed and config") {
  auto cfg = small_cfg();
  DasktModelT<double> a(cfg), b(cfg);
  TapeT<double> ta, tb;
  auto oa = a.forward(ta, demo_seq(8));
  auto ob = b.forward(tb, demo_seq(8));
  CHECK(std::memcmp(oa.preds.value().data(), ob.preds.value().data(),
                    sizeof(double) * static_cast<size_t>(oa.preds.value().size())) == 0);
}

TEST_CASE("causality horizon: perturbing records beyond the GAT window leaves "
          "earlier predictions bit-identical") {
  // the two stacked GAT layers give h_t sight of trajectory nodes up to t+2,
  // so predictions y_2..y_{tau-2} cannot depend on records >= tau
  auto cfg = small_cfg();
  DasktModelT<double> model(cfg);
  int n = 12, tau = 7;  // perturb records at 0-based steps >= tau
  auto base = demo_seq(n);
  auto pert = base;
  for (int i = tau; i < n; ++i) {
    pert.problems[static_cast<size_t>(i)] = 1 + (base.problems[static_cast<size_t>(i)] % 9);
    pert.responses[static_cast<size_t>(i)] = 1 - base.responses[static_cast<size_t>(i)];
    pert.affect[static_cast<size_t>(i)] = (base.affect[static_cast<size_t>(i)] + 1) % 4;
  }
  TapeT<double> t1, t2;
  auto o1 = model.forward(t1, base);
  auto o2 = model.forward(t2, pert);
  // prediction column c targets step c+1 (0-based); safe columns are those
  // with c+1 <= tau-2, i.e. every prediction at least 2 steps before tau
  for (int c = 0; c + 1 <= tau - 2; ++c)
    CHECK(o1.preds.value()(0, c) == o2.preds.value()(0, c));
}

TEST_CASE("no_maf ignores affect entirely: lstm input has no affect block") {
  auto cfg = small_cfg(Ablation::no_maf);
  DasktModelT<double> model(cfg);
  auto s1 = demo_seq(6);
  auto s2 = s1;
  for (auto& a : s2.affect) a = (a + 2) % 4;
  TapeT<double> t1, t2;
  auto o1 = model.forward(t1, s1);
  auto o2 = model.forward(t2, s2);
  CHECK(o1.preds.value() == o2.preds.value());
}

TEST_CASE("full model with a zeroed affect path reproduces no_maf bit-for-bit") {
  auto cfg_full = small_cfg(Ablation::full);
  auto cfg_nomaf = small_cfg(Ablation::no_maf);
  DasktModelT<double> full(cfg_full);
  DasktModelT<double> nomaf(cfg_nomaf);

  // zero the affect path in the full model: the dynamic-affect block becomes
  // elu(gat(0)) = 0 for every step
  auto& fp = full.params();
  for (const char* name : {"Aff", "W1", "b1"})
    fp.value(fp.slot(name)).setZero();

  // copy the shared weights; the full LSTM keeps zero columns for the affect
  // block (rows of the input span [d_p+d_k, d_p+d_k+d_aff))
  auto& np = nomaf.params();
  for (const char* name : {"P", "KC", "R", "out.w", "out.b", "lstm.b"})
    np.value(np.slot(name)) = fp.value(fp.slot(name));
  const auto& Wf = fp.value(fp.slot("lstm.W"));
  auto& Wn = np.value(np.slot("lstm.W"));
  int dp = cfg_full.d_p, dk = cfg_full.d_k, daff = cfg_full.d_aff;
  int dr = cfg_full.d_r, d = cfg_full.d;
  Wn.leftCols(dp + dk) = Wf.leftCols(dp + dk);
  Wn.middleCols(dp + dk, dr) = Wf.middleCols(dp + dk + daff, dr);
  Wn.rightCols(d) = Wf.rightCols(d);

  auto seq = demo_seq(9);
  TapeT<double> t1, t2;
  auto of = full.forward(t1, seq);
  auto on = nomaf.forward(t2, seq);
  CHECK(of.preds.value() == on.preds.value());
}

TEST_CASE("gradcheck: full model end to end on a short sequence") {
  auto cfg = small_cfg();
  cfg.d_p = cfg.d_k = cfg.d_r = cfg.d_aff = cfg.d = 3;
  cfg.heads = 2;
  DasktModelT<double> model(cfg);
  auto seq = demo_seq(5);
  Mat<double> labels(1, 4);
  labels << 1, 0, 1, 1;
  auto loss_fn = [&](bool with_grad) {
    TapeT<double> t;
    auto out = model.forward(t, seq);
    auto loss = bce_sum<double>(out.preds, labels);
    double v = loss.value()(0, 0);
    if (with_grad) t.backward(loss);
    return v;
  };
  std::mt19937_64 rng(9);
  CHECK(daskt::testutil::check_param_gradients(model.params(), loss_fn, rng, 1e-5, 3) < 1e-4);
}

TEST_CASE("pad steps are excluded: appending pads does not change loss or grads") {
  // the model only ever sees non-pad steps; this pins the contract that the
  // caller truncates at effective length
  auto cfg = small_cfg();
  DasktModelT<double> model(cfg);
  auto seq = demo_seq(6);
  TapeT<double> t1;
  auto o1 = model.forward(t1, seq);
  Mat<double> labels(1, 5);
  labels << 1, 0, 1, 0, 1;
  auto l1 = bce_sum<double>(o1.preds, labels);
  t1.backward(l1);
  double g1 = model.params().grad_norm();
  model.params().zero_grads();
  TapeT<double> t2;
  auto o2 = model.forward(t2, seq);
  auto l2 = bce_sum<double>(o2.preds, labels);
  t2.backward(l2);
  CHECK(l1.value()(0, 0) == l2.value()(0, 0));
  CHECK(model.params().grad_norm() == doctest::Approx(g1));
}

TEST_CASE("knowledge_state readout: sigma(0) regime and range") {
  auto cfg = small_cfg();
  DasktModelT<double> model(cfg);
  auto& ps = model.params();
  ps.value(ps.slot("out.w")).setZero();
  ps.value(ps.slot("out.b")).setZero();
  Mat<double> h = Mat<double>::Zero(cfg.d, 1);
  for (int kc = 1; kc <= cfg.num_kcs; ++kc)
    CHECK(model.knowledge_state(h, kc) == doctest::Approx(0.5));

  DasktModelT<double> m2(cfg);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    Mat<double> hr = daskt::testutil::random_matrix(cfg.d, 1, rng, -3, 3);
    double v = m2.knowledge_state(hr, 1 + static_cast<int>(rng() % 4));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(m2.knowledge_state(h, 99), DasktError);
}

TEST_CASE("per_step_affect: lag, no_ica, and missing-segment handling") {
  std::vector<int> segs{2, 0, 3};
  auto lag0 = per_step_affect(12, 5, 0, Ablation::full, segs, 1);
  CHECK(lag0[0] == 2);
  CHECK(lag0[4] == 2);
  CHECK(lag0[5] == 0);
  CHECK(lag0[11] == 3);

  auto lag1 = per_step_affect(12, 5, 1, Ablation::full, segs, 1);
  CHECK(lag1[0] == -1);  // no previous segment yet
  CHECK(lag1[4] == -1);
  CHECK(lag1[5] == 2);
  CHECK(lag1[10] == 0);

  auto ica = per_step_affect(12, 5, 0, Ablation::no_ica, segs, 1);
  for (int v : ica) CHECK(v == 1);

  auto nomaf = per_step_affect(12, 5, 0, Ablation::no_maf, segs, 1);
  for (int v : nomaf) CHECK(v == -1);
}
