#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "daskt/affect_graph.hpp"
#include "daskt/params.hpp"
#include "daskt/tape.hpp"

namespace daskt {

enum class Ablation { full, no_a_gat, no_at_gat, no_ica, no_maf };

Ablation parse_ablation(const std::string& s);
const char* ablation_name(Ablation a);

// Where the per-step affect representation comes from: the learned 4-row
// embedding table indexed by cluster id, or the raw cluster-center vector.
enum class AffectSource { embedding, center };

struct ModelConfig {
  int d_p = 256, d_k = 256, d_r = 256, d_aff = 256, d = 256;
  int heads = 4;
  bool concat_heads = false;
  double leaky_slope = 0.2;
  Ablation ablation = Ablation::full;
  AffectSource affect_source = AffectSource::embedding;
  int num_problems = 0;  // vocab sizes, excluding the pad id
  int num_kcs = 0;
  int factor_dim = 0;  // needed when affect_source == center
  std::uint64_t init_seed = 1;

  bool uses_affect() const { return ablation != Ablation::no_maf; }
  bool uses_gat1() const {
    return ablation == Ablation::full || ablation == Ablation::no_a_gat ||
           ablation == Ablation::no_ica;
  }
  bool uses_gat2() const {
    return ablation == Ablation::full || ablation == Ablation::no_ica;
  }
  int affect_in_dim() const {
    return affect_source == AffectSource::embedding ? d_aff : factor_dim;
  }
  // width of the affect block entering the LSTM
  int affect_out_dim() const {
    if (!uses_affect()) return 0;
    if (uses_gat1() && !uses_gat2() && concat_heads) return d_aff * heads;
    return d_aff;
  }
  int lstm_in_dim() const { return d_p + d_k + d_r + affect_out_dim(); }
};

// One encoded sequence as the model consumes it: only the non-pad steps.
struct SeqInput {
  std::vector<int> problems;   // 1-based ids
  std::vector<int> kcs;
  std::vector<int> responses;  // 0/1
  std::vector<int> affect;     // per-step cluster index; -1 = no affect info
  int n() const { return static_cast<int>(problems.size()); }
};

template <typename S>
struct ForwardResult {
  ad::VarT<S> preds;   // 1 x (n-1): predictions for steps 2..n
  Mat<S> hidden;       // d x n hidden states (values only), when requested
  std::vector<Mat<S>> attention;  // per-head layer-1 attention, when requested
};

// All trainable tensors of the model, created in a fixed order with
// fan-in-scaled uniform init.
template <typename S>
class DasktModelT {
 public:
  DasktModelT(const ModelConfig& cfg, const Mat<S>* centers = nullptr)
      : cfg_(cfg) {
    std::mt19937_64 rng(cfg.init_seed);
    auto mk = [&](const std::string& name, Eigen::Index r, Eigen::Index c, double fan_in) {
      return ps_.create(name, r, c, fan_in > 0 ? 1.0 / std::sqrt(fan_in) : 0.0, rng);
    };
    p_P_ = mk("P", cfg.d_p, cfg.num_problems + 1, cfg.d_p);
    p_KC_ = mk("KC", cfg.d_k, cfg.num_kcs + 1, cfg.d_k);
    p_R_ = mk("R", cfg.d_r, 2, cfg.d_r);
    if (cfg.uses_affect()) {
      if (cfg.affect_source == AffectSource::embedding)
        p_Aff_ = mk("Aff", cfg.d_aff, 4, cfg.d_aff);
      p_W1_ = mk("W1", cfg.d_aff, cfg.affect_in_dim() + cfg.d_p,
                 cfg.affect_in_dim() + cfg.d_p);
      p_b1_ = mk("b1", cfg.d_aff, 1, 0);
      if (cfg.uses_gat1()) {
        for (int h = 0; h < cfg.heads; ++h) {
          auto tag = std::to_string(h);
          gat1_W_.push_back(mk("gat1.W." + tag, cfg.d_aff, cfg.d_aff, cfg.d_aff));
          gat1_src_.push_back(mk("gat1.a_src." + tag, cfg.d_aff, 1, cfg.d_aff));
          gat1_dst_.push_back(mk("gat1.a_dst." + tag, cfg.d_aff, 1, cfg.d_aff));
        }
      }
      if (cfg.uses_gat2()) {
        int in2 = cfg.concat_heads ? cfg.d_aff * cfg.heads : cfg.d_aff;
        p_gat2_W_ = mk("gat2.W", cfg.d_aff, in2, in2);
        p_gat2_src_ = mk("gat2.a_src", cfg.d_aff, 1, cfg.d_aff);
        p_gat2_dst_ = mk("gat2.a_dst", cfg.d_aff, 1, cfg.d_aff);
      }
    }
    p_lstmW_ = mk("lstm.W", 4 * cfg.d, cfg.lstm_in_dim() + cfg.d, cfg.lstm_in_dim() + cfg.d);
    p_lstmb_ = mk("lstm.b", 4 * cfg.d, 1, 0);
    p_outw_ = mk("out.w", 1, cfg.d_p + cfg.d_k + cfg.d, cfg.d_p + cfg.d_k + cfg.d);
    p_outb_ = mk("out.b", 1, 1, 0);
    if (cfg.affect_source == AffectSource::center) {
      if (!centers || cfg.factor_dim <= 0)
        fail(ErrorClass::train, "affect_source=center requires cluster centers");
      centers_ = *centers;  // 4 x factor_dim, not trainable
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStoreT<S>& params() { return ps_; }
  const ad::ParamStoreT<S>& params() const { return ps_; }

  ForwardResult<S> forward(ad::TapeT<S>& tape, const SeqInput& seq,
                           bool want_hidden = false, bool want_attention = false) const {
    using namespace ad;
    const int n = seq.n();
    if (n < 1) fail(ErrorClass::train, "forward: empty sequence");
    if (static_cast<int>(seq.affect.size()) != n && cfg_.uses_affect())
      fail(ErrorClass::train, "forward: affect indices misaligned with timesteps");
    auto& ps = const_cast<ad::ParamStoreT<S>&>(ps_);

    VarT<S> Pg = gather_cols(tape, ps, p_P_, seq.problems);
    VarT<S> KCg = gather_cols(tape, ps, p_KC_, seq.kcs);
    VarT<S> Rg = gather_cols(tape, ps, p_R_, seq.responses);

    ForwardResult<S> out;
    std::vector<VarT<S>> input_blocks{Pg, KCg};
    if (cfg_.uses_affect()) {
      VarT<S> affect_feat;
      if (cfg_.affect_source == AffectSource::embedding) {
        affect_feat = gather_cols(tape, ps, p_Aff_, seq.affect);
      } else {
        Mat<S> raw(cfg_.factor_dim, n);
        for (int t = 0; t < n; ++t) {
          if (seq.affect[static_cast<std::size_t>(t)] >= 0)
            raw.col(t) = centers_.row(seq.affect[static_cast<std::size_t>(t)]).transpose();
          else
            raw.col(t).setZero();
        }
        affect_feat = tape.leaf(std::move(raw));
      }
      // affect trajectory (affect ++ problem through the shared affine map)
      VarT<S> atra = affine(pvar(tape, ps, p_W1_), vconcat<S>({affect_feat, Pg}),
                            pvar(tape, ps, p_b1_));
      VarT<S> dyn = atra;
      if (cfg_.uses_gat1()) {
        AffectGraph graph = build_graph(n);
        std::vector<GatHead<S>> heads;
        for (int h = 0; h < cfg_.heads; ++h)
          heads.push_back({pvar(tape, ps, gat1_W_[static_cast<std::size_t>(h)]),
                           pvar(tape, ps, gat1_src_[static_cast<std::size_t>(h)]),
                           pvar(tape, ps, gat1_dst_[static_cast<std::size_t>(h)])});
        dyn = elu(gat_attention<S>(graph, atra, heads, static_cast<S>(cfg_.leaky_slope),
                                   cfg_.concat_heads,
                                   want_attention ? &out.attention : nullptr));
        if (cfg_.uses_gat2()) {
          std::vector<GatHead<S>> head2{{pvar(tape, ps, p_gat2_W_),
                                         pvar(tape, ps, p_gat2_src_),
                                         pvar(tape, ps, p_gat2_dst_)}};
          dyn = elu(gat_attention<S>(graph, dyn, head2, static_cast<S>(cfg_.leaky_slope),
                                     false, nullptr));
        }
      }
      input_blocks.push_back(dyn);
    }
    input_blocks.push_back(Rg);
    VarT<S> X = vconcat<S>(input_blocks);

    VarT<S> W = pvar(tape, ps, p_lstmW_);
    VarT<S> b = pvar(tape, ps, p_lstmb_);
    VarT<S> h = tape.leaf(Mat<S>::Zero(cfg_.d, 1));
    VarT<S> c = tape.leaf(Mat<S>::Zero(cfg_.d, 1));
    std::vector<VarT<S>> hs;
    hs.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
      auto st = lstm_cell<S>(col(X, t), h, c, W, b, cfg_.d);
      h = st.h;
      c = st.c;
      hs.push_back(h);
    }
    if (want_hidden) {
      out.hidden.resize(cfg_.d, n);
      for (int t = 0; t < n; ++t) out.hidden.col(t) = hs[static_cast<std::size_t>(t)].value();
    }
    if (n >= 2) {
      std::vector<int> next_p(seq.problems.begin() + 1, seq.problems.end());
      std::vector<int> next_kc(seq.kcs.begin() + 1, seq.kcs.end());
      VarT<S> Pn = gather_cols(tape, ps, p_P_, next_p);
      VarT<S> KCn = gather_cols(tape, ps, p_KC_, next_kc);
      VarT<S> Hprev = hconcat<S>(std::vector<VarT<S>>(hs.begin(), hs.end() - 1));
      VarT<S> fused = vconcat<S>({Pn, KCn, Hprev});
      out.preds = sigmoid(affine(pvar(tape, ps, p_outw_), fused, pvar(tape, ps, p_outb_)));
    }
    return out;
  }

  // Probes the prediction head with a neutral problem (mean embedding over
  // real problems) and the target KC at hidden state h.
  double knowledge_state(const Mat<S>& h_col, int kc_id) const {
    if (kc_id < 1 || kc_id > cfg_.num_kcs)
      fail(ErrorClass::export_states, "knowledge_state: unknown KC id");
    const Mat<S>& P = ps_.value(p_P_);
    Vec<S> pbar = P.rightCols(P.cols() - 1).rowwise().mean();
    const Mat<S>& KC = ps_.value(p_KC_);
    Vec<S> fused(cfg_.d_p + cfg_.d_k + cfg_.d);
    fused << pbar, KC.col(kc_id), h_col.col(0);
    double z = static_cast<double>((ps_.value(p_outw_) * fused)(0, 0) +
                                   ps_.value(p_outb_)(0, 0));
    return 1.0 / (1.0 + std::exp(-z));
  }

 private:
  ModelConfig cfg_;
  ad::ParamStoreT<S> ps_;
  Mat<S> centers_;
  int p_P_ = -1, p_KC_ = -1, p_R_ = -1, p_Aff_ = -1, p_W1_ = -1, p_b1_ = -1;
  std::vector<int> gat1_W_, gat1_src_, gat1_dst_;
  int p_gat2_W_ = -1, p_gat2_src_ = -1, p_gat2_dst_ = -1;
  int p_lstmW_ = -1, p_lstmb_ = -1, p_outw_ = -1, p_outb_ = -1;
};

// Resolves per-step affect cluster indices for a sequence from its segment
// assignments. lag shifts the segment lookup backwards; steps whose lagged
// segment does not exist get -1 (no affect information). The no_ica wiring
// uses the whole-sequence assignment for every step.
std::vector<int> per_step_affect(int n, int seg_len, int lag, Ablation ablation,
                                 const std::vector<int>& segment_affect,
                                 int whole_sequence_affect);

}  // namespace daskt
