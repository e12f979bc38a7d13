#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "daskt/common.hpp"
#include "daskt/params.hpp"

namespace daskt::ad {

using daskt::Mat;
using daskt::Vec;

template <typename S>
class TapeT;

// Lightweight handle to a tape node.
template <typename S>
class VarT {
 public:
  VarT() = default;
  const Mat<S>& value() const;
  const Mat<S>& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  TapeT<S>* tape() const { return tape_; }
  int index() const { return idx_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class TapeT<S>;
  VarT(TapeT<S>* t, int i) : tape_(t), idx_(i) {}
  TapeT<S>* tape_ = nullptr;
  int idx_ = -1;
};

// Append-only reverse-mode tape. Creation order is a topological order, so
// the backward pass is a single reverse sweep.
template <typename S>
class TapeT {
 public:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    std::function<void(TapeT<S>&, const Mat<S>&)> backward;  // empty for leaves
  };

  VarT<S> leaf(Mat<S> value) {
    nodes_.push_back(Node{std::move(value), {}, {}});
    return VarT<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  VarT<S> make(Mat<S> value, std::function<void(TapeT<S>&, const Mat<S>&)> backward) {
    nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
    return VarT<S>(this, static_cast<int>(nodes_.size()) - 1);
  }

  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_.size(); }

  Mat<S>& grad_ref(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  // Reverse sweep from `loss` (must be 1x1). Using a tape twice without
  // reset() double-counts gradients, so it is rejected.
  void backward(VarT<S> loss) {
    if (consumed_)
      fail(ErrorClass::internal, "tape: backward called twice without reset");
    consumed_ = true;
    if (loss.rows() != 1 || loss.cols() != 1)
      fail(ErrorClass::internal, "tape: backward target must be scalar");
    grad_ref(loss.index())(0, 0) = S(1);
    for (int i = loss.index(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
  }

  void reset() {
    nodes_.clear();
    consumed_ = false;
  }

  bool consumed() const { return consumed_; }

 private:
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

template <typename S>
const Mat<S>& VarT<S>::value() const {
  return tape_->node(idx_).value;
}
template <typename S>
const Mat<S>& VarT<S>::grad() const {
  return tape_->node(idx_).grad;
}

// ---- parameter binding ----

template <typename S>
VarT<S> pvar(TapeT<S>& t, ParamStoreT<S>& ps, int slot) {
  VarT<S> v = t.make(ps.value(slot), [&ps, slot](TapeT<S>&, const Mat<S>& g) {
    ps.grad(slot) += g;
  });
  return v;
}

// Gathers embedding-table columns by id; negative ids produce zero columns
// and receive no gradient.
template <typename S>
VarT<S> gather_cols(TapeT<S>& t, ParamStoreT<S>& ps, int slot, std::vector<int> ids) {
  const Mat<S>& table = ps.value(slot);
  Mat<S> out(table.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= 0 && ids[i] < table.cols())
      out.col(static_cast<Eigen::Index>(i)) = table.col(ids[i]);
    else
      out.col(static_cast<Eigen::Index>(i)).setZero();
  }
  return t.make(std::move(out), [&ps, slot, ids = std::move(ids)](TapeT<S>&, const Mat<S>& g) {
    Mat<S>& tg = ps.grad(slot);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] >= 0 && ids[i] < tg.cols())
        tg.col(ids[i]) += g.col(static_cast<Eigen::Index>(i));
  });
}

// ---- elementwise & linear ops ----

template <typename S>
VarT<S> operator+(VarT<S> a, VarT<S> b) {
  TapeT<S>& t = *a.tape();
  int ia = a.index(), ib = b.index();
  return t.make(a.value() + b.value(), [ia, ib](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia) += g;
    tp.grad_ref(ib) += g;
  });
}

template <typename S>
VarT<S> operator-(VarT<S> a, VarT<S> b) {
  TapeT<S>& t = *a.tape();
  int ia = a.index(), ib = b.index();
  return t.make(a.value() - b.value(), [ia, ib](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia) += g;
    tp.grad_ref(ib) -= g;
  });
}

template <typename S>
VarT<S> cmul(VarT<S> a, VarT<S> b) {
  TapeT<S>& t = *a.tape();
  int ia = a.index(), ib = b.index();
  return t.make(a.value().cwiseProduct(b.value()), [ia, ib](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia) += g.cwiseProduct(tp.node(ib).value);
    tp.grad_ref(ib) += g.cwiseProduct(tp.node(ia).value);
  });
}

template <typename S>
VarT<S> matmul(VarT<S> a, VarT<S> b) {
  TapeT<S>& t = *a.tape();
  if (a.cols() != b.rows()) fail(ErrorClass::internal, "matmul: shape mismatch");
  int ia = a.index(), ib = b.index();
  return t.make(a.value() * b.value(), [ia, ib](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia).noalias() += g * tp.node(ib).value.transpose();
    tp.grad_ref(ib).noalias() += tp.node(ia).value.transpose() * g;
  });
}

template <typename S>
VarT<S> scale(VarT<S> a, S s) {
  TapeT<S>& t = *a.tape();
  int ia = a.index();
  return t.make(a.value() * s, [ia, s](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia) += g * s;
  });
}

// Broadcast-adds a column vector to every column.
template <typename S>
VarT<S> add_colvec(VarT<S> a, VarT<S> b) {
  TapeT<S>& t = *a.tape();
  if (b.cols() != 1 || a.rows() != b.rows())
    fail(ErrorClass::internal, "add_colvec: shape mismatch");
  Mat<S> out = a.value();
  out.colwise() += Vec<S>(b.value().col(0));
  int ia = a.index(), ib = b.index();
  return t.make(std::move(out), [ia, ib](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia) += g;
    tp.grad_ref(ib) += g.rowwise().sum();
  });
}

// y = W x + b with column-broadcast bias.
template <typename S>
VarT<S> affine(VarT<S> W, VarT<S> x, VarT<S> b) {
  return add_colvec(matmul(W, x), b);
}

// ---- activations ----

template <typename S>
VarT<S> sigmoid(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  Mat<S> y = a.value().unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
  int ia = a.index();
  VarT<S> out = t.make(std::move(y), {});
  int iy = out.index();
  t.node(iy).backward = [ia, iy](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& yv = tp.node(iy).value;
    tp.grad_ref(ia) += g.cwiseProduct(
        yv.cwiseProduct((Mat<S>::Ones(yv.rows(), yv.cols()) - yv)));
  };
  return out;
}

template <typename S>
VarT<S> tanh_op(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  Mat<S> y = a.value().array().tanh().matrix();
  int ia = a.index();
  VarT<S> out = t.make(std::move(y), {});
  int iy = out.index();
  t.node(iy).backward = [ia, iy](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& yv = tp.node(iy).value;
    tp.grad_ref(ia) +=
        g.cwiseProduct((Mat<S>::Ones(yv.rows(), yv.cols()) - yv.cwiseProduct(yv)));
  };
  return out;
}

template <typename S>
VarT<S> elu(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  Mat<S> y = a.value().unaryExpr([](S v) { return v > S(0) ? v : std::expm1(v); });
  int ia = a.index();
  VarT<S> out = t.make(std::move(y), {});
  int iy = out.index();
  t.node(iy).backward = [ia, iy](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& xv = tp.node(ia).value;
    const Mat<S>& yv = tp.node(iy).value;
    Mat<S> d = xv.binaryExpr(yv, [](S x, S y2) { return x > S(0) ? S(1) : y2 + S(1); });
    tp.grad_ref(ia) += g.cwiseProduct(d);
  };
  return out;
}

template <typename S>
VarT<S> leaky_relu(VarT<S> a, S slope) {
  TapeT<S>& t = *a.tape();
  Mat<S> y = a.value().unaryExpr([slope](S v) { return v > S(0) ? v : slope * v; });
  int ia = a.index();
  return t.make(std::move(y), [ia, slope](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& xv = tp.node(ia).value;
    tp.grad_ref(ia) += g.cwiseProduct(
        xv.unaryExpr([slope](S v) { return v > S(0) ? S(1) : slope; }));
  });
}

// Softmax along each row (rows sum to 1).
template <typename S>
VarT<S> softmax_rows(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  Mat<S> y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    S m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  int ia = a.index();
  VarT<S> out = t.make(std::move(y), {});
  int iy = out.index();
  t.node(iy).backward = [ia, iy](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& yv = tp.node(iy).value;
    Mat<S>& ga = tp.grad_ref(ia);
    for (Eigen::Index r = 0; r < yv.rows(); ++r) {
      S dot = yv.row(r).dot(g.row(r));
      ga.row(r) += yv.row(r).cwiseProduct(g.row(r)) - dot * yv.row(r);
    }
  };
  return out;
}

// Softmax along each column (columns sum to 1).
template <typename S>
VarT<S> softmax_cols(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  Mat<S> y = a.value();
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    S m = y.col(c).maxCoeff();
    y.col(c) = (y.col(c).array() - m).exp();
    y.col(c) /= y.col(c).sum();
  }
  int ia = a.index();
  VarT<S> out = t.make(std::move(y), {});
  int iy = out.index();
  t.node(iy).backward = [ia, iy](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& yv = tp.node(iy).value;
    Mat<S>& ga = tp.grad_ref(ia);
    for (Eigen::Index c = 0; c < yv.cols(); ++c) {
      S dot = yv.col(c).dot(g.col(c));
      ga.col(c) += yv.col(c).cwiseProduct(g.col(c)) - dot * yv.col(c);
    }
  };
  return out;
}

// ---- shaping ----

template <typename S>
VarT<S> vconcat(const std::vector<VarT<S>>& parts) {
  TapeT<S>& t = *parts.front().tape();
  Eigen::Index rows = 0, cols = parts.front().cols();
  for (const auto& p : parts) rows += p.rows();
  Mat<S> out(rows, cols);
  Eigen::Index r = 0;
  std::vector<std::pair<int, Eigen::Index>> idx;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    idx.emplace_back(p.index(), p.rows());
    r += p.rows();
  }
  return t.make(std::move(out), [idx](TapeT<S>& tp, const Mat<S>& g) {
    Eigen::Index r2 = 0;
    for (auto [i, n] : idx) {
      tp.grad_ref(i) += g.middleRows(r2, n);
      r2 += n;
    }
  });
}

template <typename S>
VarT<S> hconcat(const std::vector<VarT<S>>& parts) {
  TapeT<S>& t = *parts.front().tape();
  Eigen::Index cols = 0, rows = parts.front().rows();
  for (const auto& p : parts) cols += p.cols();
  Mat<S> out(rows, cols);
  Eigen::Index c = 0;
  std::vector<std::pair<int, Eigen::Index>> idx;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    idx.emplace_back(p.index(), p.cols());
    c += p.cols();
  }
  return t.make(std::move(out), [idx](TapeT<S>& tp, const Mat<S>& g) {
    Eigen::Index c2 = 0;
    for (auto [i, n] : idx) {
      tp.grad_ref(i) += g.middleCols(c2, n);
      c2 += n;
    }
  });
}

template <typename S>
VarT<S> col(VarT<S> a, Eigen::Index j) {
  TapeT<S>& t = *a.tape();
  int ia = a.index();
  return t.make(Mat<S>(a.value().col(j)), [ia, j](TapeT<S>& tp, const Mat<S>& g) {
    tp.grad_ref(ia).col(j) += g.col(0);
  });
}

template <typename S>
VarT<S> slice_rows(VarT<S> a, Eigen::Index r0, Eigen::Index n) {
  TapeT<S>& t = *a.tape();
  int ia = a.index();
  return t.make(Mat<S>(a.value().middleRows(r0, n)),
                [ia, r0, n](TapeT<S>& tp, const Mat<S>& g) {
                  tp.grad_ref(ia).middleRows(r0, n) += g;
                });
}

template <typename S>
VarT<S> sum_all(VarT<S> a) {
  TapeT<S>& t = *a.tape();
  int ia = a.index();
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return t.make(std::move(out), [ia](TapeT<S>& tp, const Mat<S>& g) {
    const auto& av = tp.node(ia).value;
    tp.grad_ref(ia).array() += g(0, 0) * Mat<S>::Ones(av.rows(), av.cols()).array();
  });
}

// ---- losses ----

// Sum of binary cross-entropy over all entries; predictions are clamped to
// [eps, 1-eps] and the clamp saturates the gradient.
template <typename S>
VarT<S> bce_sum(VarT<S> pred, const Mat<S>& labels, S eps = S(1e-7)) {
  TapeT<S>& t = *pred.tape();
  if (pred.rows() != labels.rows() || pred.cols() != labels.cols())
    fail(ErrorClass::internal, "bce_sum: shape mismatch");
  const Mat<S>& y = pred.value();
  S total = S(0);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    S yc = std::min(std::max(y(i), eps), S(1) - eps);
    S r = labels(i);
    total -= r * std::log(yc) + (S(1) - r) * std::log(S(1) - yc);
  }
  int ip = pred.index();
  Mat<S> out(1, 1);
  out(0, 0) = total;
  return t.make(std::move(out), [ip, labels, eps](TapeT<S>& tp, const Mat<S>& g) {
    const Mat<S>& yv = tp.node(ip).value;
    Mat<S>& gp = tp.grad_ref(ip);
    for (Eigen::Index i = 0; i < yv.size(); ++i) {
      S yc = std::min(std::max(yv(i), eps), S(1) - eps);
      if (yv(i) <= eps || yv(i) >= S(1) - eps) continue;  // clamped flat
      gp(i) += g(0, 0) * (yc - labels(i)) / (yc * (S(1) - yc));
    }
  });
}

// ---- LSTM ----

template <typename S>
struct LstmState {
  VarT<S> h, c;
};

// Standard 4-gate cell; W is (4d x (in+d)), b is (4d x 1), gate order i,f,g,o.
template <typename S>
LstmState<S> lstm_cell(VarT<S> x, VarT<S> h_prev, VarT<S> c_prev, VarT<S> W, VarT<S> b,
                       Eigen::Index hidden) {
  VarT<S> xh = vconcat<S>({x, h_prev});
  VarT<S> z = affine(W, xh, b);
  VarT<S> i = sigmoid(slice_rows(z, 0, hidden));
  VarT<S> f = sigmoid(slice_rows(z, hidden, hidden));
  VarT<S> g = tanh_op(slice_rows(z, 2 * hidden, hidden));
  VarT<S> o = sigmoid(slice_rows(z, 3 * hidden, hidden));
  VarT<S> c = cmul(f, c_prev) + cmul(i, g);
  VarT<S> h = cmul(o, tanh_op(c));
  return {h, c};
}

}  // namespace daskt::ad
