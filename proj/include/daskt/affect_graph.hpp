#pragma once

#include <array>
#include <limits>
#include <memory>
#include <vector>

#include "daskt/tape.hpp"

namespace daskt {

// Chain-plus-self-loop graph over per-timestep affect trajectories. Node t
// aggregates over in-neighbors {t-1, t, t+1} clipped at the boundaries.
struct AffectGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // (node, in-neighbor)

  // in-neighbors of node t in ascending order
  std::array<int, 3> neighbors(int t, int* count) const {
    std::array<int, 3> nb{};
    int c = 0;
    if (t > 0) nb[static_cast<std::size_t>(c++)] = t - 1;
    nb[static_cast<std::size_t>(c++)] = t;
    if (t + 1 < n) nb[static_cast<std::size_t>(c++)] = t + 1;
    *count = c;
    return nb;
  }
};

AffectGraph build_graph(int n);

namespace ad {

template <typename S>
struct GatHead {
  VarT<S> W;      // d_out x d_in
  VarT<S> a_src;  // d_out x 1
  VarT<S> a_dst;  // d_out x 1
};

// One graph-attention layer over the chain graph: per head, additive scores
// with LeakyReLU, softmax over each node's in-neighborhood, then the
// attention-weighted sum of transformed neighbors. Head outputs are averaged
// (or concatenated when concat_heads). The nonlinearity is applied by the
// caller. attention_out, when given, receives one (n x 3) row-stochastic
// matrix per head with columns (prev, self, next); absent slots stay zero.
template <typename S>
VarT<S> gat_attention(const AffectGraph& g, VarT<S> X, const std::vector<GatHead<S>>& heads,
                      S leaky_slope, bool concat_heads,
                      std::vector<Mat<S>>* attention_out = nullptr) {
  TapeT<S>& t = *X.tape();
  const int n = g.n;
  const int nheads = static_cast<int>(heads.size());
  if (n != X.cols()) fail(ErrorClass::internal, "gat_attention: node count mismatch");
  if (nheads < 1) fail(ErrorClass::internal, "gat_attention: needs >= 1 head");
  const Eigen::Index d_out = heads[0].W.rows();

  struct HeadCtx {
    Mat<S> H;              // d_out x n transformed features
    Mat<S> alpha;          // n x 3 attention (prev,self,next)
    Mat<S> z;              // n x 3 pre-activation scores
    int iW, ia_src, ia_dst;
  };
  auto ctxs = std::make_shared<std::vector<HeadCtx>>();
  ctxs->reserve(static_cast<std::size_t>(nheads));

  Mat<S> out = Mat<S>::Zero(concat_heads ? d_out * nheads : d_out, n);
  if (attention_out) attention_out->clear();

  for (int hidx = 0; hidx < nheads; ++hidx) {
    const auto& head = heads[static_cast<std::size_t>(hidx)];
    HeadCtx ctx;
    ctx.iW = head.W.index();
    ctx.ia_src = head.a_src.index();
    ctx.ia_dst = head.a_dst.index();
    ctx.H.noalias() = head.W.value() * X.value();
    Eigen::Matrix<S, 1, Eigen::Dynamic> s = head.a_src.value().col(0).transpose() * ctx.H;
    Eigen::Matrix<S, 1, Eigen::Dynamic> v = head.a_dst.value().col(0).transpose() * ctx.H;
    ctx.alpha = Mat<S>::Zero(n, 3);
    ctx.z = Mat<S>::Zero(n, 3);
    Mat<S> hout = Mat<S>::Zero(d_out, n);
    for (int node = 0; node < n; ++node) {
      int cnt = 0;
      auto nb = g.neighbors(node, &cnt);
      S zmax = -std::numeric_limits<S>::infinity();
      for (int j = 0; j < cnt; ++j) {
        S raw = s[node] + v[nb[static_cast<std::size_t>(j)]];
        S e = raw > S(0) ? raw : leaky_slope * raw;
        ctx.z(node, j) = raw;
        ctx.alpha(node, j) = e;
        zmax = std::max(zmax, e);
      }
      S denom = S(0);
      for (int j = 0; j < cnt; ++j) {
        ctx.alpha(node, j) = std::exp(ctx.alpha(node, j) - zmax);
        denom += ctx.alpha(node, j);
      }
      for (int j = 0; j < cnt; ++j) {
        ctx.alpha(node, j) /= denom;
        hout.col(node) += ctx.alpha(node, j) * ctx.H.col(nb[static_cast<std::size_t>(j)]);
      }
    }
    if (attention_out) {
      // re-index to fixed (prev,self,next) slots
      Mat<S> a = Mat<S>::Zero(n, 3);
      for (int node = 0; node < n; ++node) {
        int cnt = 0;
        auto nb = g.neighbors(node, &cnt);
        for (int j = 0; j < cnt; ++j) {
          int slot = nb[static_cast<std::size_t>(j)] - node + 1;  // 0,1,2
          a(node, slot) = ctx.alpha(node, j);
        }
      }
      attention_out->push_back(a);
    }
    if (concat_heads)
      out.middleRows(static_cast<Eigen::Index>(hidx) * d_out, d_out) = hout;
    else
      out += hout / static_cast<S>(nheads);
    ctxs->push_back(std::move(ctx));
  }

  int iX = X.index();
  const AffectGraph graph = g;  // small; copy into the closure
  return t.make(std::move(out), [iX, ctxs, graph, nheads, d_out, leaky_slope, concat_heads](
                                    TapeT<S>& tp, const Mat<S>& gout) {
    const Mat<S>& Xv = tp.node(iX).value;
    for (int hidx = 0; hidx < nheads; ++hidx) {
      const HeadCtx& ctx = (*ctxs)[static_cast<std::size_t>(hidx)];
      const Mat<S>& a_src = tp.node(ctx.ia_src).value;
      const Mat<S>& a_dst = tp.node(ctx.ia_dst).value;
      Mat<S> G;
      if (concat_heads)
        G = gout.middleRows(static_cast<Eigen::Index>(hidx) * d_out, d_out);
      else
        G = gout / static_cast<S>(nheads);
      Mat<S> dH = Mat<S>::Zero(ctx.H.rows(), ctx.H.cols());
      Vec<S> da_src = Vec<S>::Zero(ctx.H.rows());
      Vec<S> da_dst = Vec<S>::Zero(ctx.H.rows());
      for (int node = 0; node < graph.n; ++node) {
        int cnt = 0;
        auto nb = graph.neighbors(node, &cnt);
        S dot = S(0);
        std::array<S, 3> dalpha{};
        for (int j = 0; j < cnt; ++j) {
          dalpha[static_cast<std::size_t>(j)] =
              G.col(node).dot(ctx.H.col(nb[static_cast<std::size_t>(j)]));
          dot += ctx.alpha(node, j) * dalpha[static_cast<std::size_t>(j)];
        }
        S ds = S(0);
        for (int j = 0; j < cnt; ++j) {
          S de = ctx.alpha(node, j) * (dalpha[static_cast<std::size_t>(j)] - dot);
          S dz = de * (ctx.z(node, j) > S(0) ? S(1) : leaky_slope);
          ds += dz;
          int nj = nb[static_cast<std::size_t>(j)];
          dH.col(nj) += ctx.alpha(node, j) * G.col(node) + dz * a_dst.col(0);
          da_dst += dz * ctx.H.col(nj);
        }
        dH.col(node) += ds * a_src.col(0);
        da_src += ds * ctx.H.col(node);
      }
      const Mat<S>& Wv = tp.node(ctx.iW).value;
      tp.grad_ref(iX).noalias() += Wv.transpose() * dH;
      tp.grad_ref(ctx.iW).noalias() += dH * Xv.transpose();
      tp.grad_ref(ctx.ia_src) += da_src;
      tp.grad_ref(ctx.ia_dst) += da_dst;
    }
  });
}

}  // namespace ad
}  // namespace daskt
