#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "daskt/common.hpp"

namespace daskt::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named trainable parameters with Adam state. Iteration order is insertion
// order, which model construction keeps fixed, so updates are deterministic.
template <typename S>
class ParamStoreT {
 public:
  struct Param {
    std::string name;
    Mat<S> value, grad, m, v;
  };

  // Uniform(-scale, scale) init; scale 0 gives zeros (biases).
  int create(const std::string& name, Eigen::Index rows, Eigen::Index cols, double scale,
             std::mt19937_64& rng) {
    if (index_.count(name)) fail(ErrorClass::internal, "duplicate parameter: " + name);
    Param p;
    p.name = name;
    p.value = Mat<S>::Zero(rows, cols);
    if (scale > 0) {
      std::uniform_real_distribution<double> dist(-scale, scale);
      for (Eigen::Index i = 0; i < p.value.size(); ++i)
        p.value(i) = static_cast<S>(dist(rng));
    }
    p.grad = Mat<S>::Zero(rows, cols);
    p.m = Mat<S>::Zero(rows, cols);
    p.v = Mat<S>::Zero(rows, cols);
    params_.push_back(std::move(p));
    int slot = static_cast<int>(params_.size()) - 1;
    index_[name] = slot;
    return slot;
  }

  int slot(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorClass::internal, "unknown parameter: " + name);
    return it->second;
  }
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Mat<S>& value(int slot) { return params_[static_cast<std::size_t>(slot)].value; }
  const Mat<S>& value(int slot) const { return params_[static_cast<std::size_t>(slot)].value; }
  Mat<S>& grad(int slot) { return params_[static_cast<std::size_t>(slot)].grad; }
  const std::string& name(int slot) const { return params_[static_cast<std::size_t>(slot)].name; }
  int count() const { return static_cast<int>(params_.size()); }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

  void scale_grads(S factor) {
    for (auto& p : params_) p.grad *= factor;
  }

  double grad_norm() const {
    double sq = 0;
    for (const auto& p : params_) sq += static_cast<double>(p.grad.squaredNorm());
    return std::sqrt(sq);
  }

  void clip_grads(double max_norm) {
    double n = grad_norm();
    if (n > max_norm && n > 0) scale_grads(static_cast<S>(max_norm / n));
  }

  double l2_penalty() const {
    double sq = 0;
    for (const auto& p : params_) sq += static_cast<double>(p.value.squaredNorm());
    return sq;
  }

  // d/dp of lambda*||theta||^2
  void add_l2_grad(double lambda) {
    for (auto& p : params_) p.grad += static_cast<S>(2.0 * lambda) * p.value;
  }

  void adam_step(const AdamConfig& cfg) {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    for (auto& p : params_) {
      p.m = static_cast<S>(cfg.beta1) * p.m + static_cast<S>(1 - cfg.beta1) * p.grad;
      p.v = static_cast<S>(cfg.beta2) * p.v +
            static_cast<S>(1 - cfg.beta2) * p.grad.cwiseProduct(p.grad);
      Mat<S> mhat = p.m / static_cast<S>(bc1);
      Mat<S> denom = ((p.v / static_cast<S>(bc2)).cwiseSqrt().array() +
                      static_cast<S>(cfg.eps)).matrix();
      p.value -= static_cast<S>(cfg.lr) * mhat.cwiseQuotient(denom);
    }
  }

  long step() const { return step_; }

  // Snapshot/restore of values only (early-stopping bookkeeping).
  std::vector<Mat<S>> snapshot_values() const {
    std::vector<Mat<S>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
  }
  void restore_values(const std::vector<Mat<S>>& vals) {
    if (vals.size() != params_.size())
      fail(ErrorClass::internal, "restore_values: arity mismatch");
    for (std::size_t i = 0; i < vals.size(); ++i) params_[i].value = vals[i];
  }

  void save(const std::string& path, const std::string& config_hash) const;
  void load(const std::string& path);  // shapes/names must match exactly

 private:
  std::map<std::string, int> index_;
  std::vector<Param> params_;
  long step_ = 0;
};

template <typename S>
void ParamStoreT<S>::save(const std::string& path, const std::string& config_hash) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorClass::train, "cannot write checkpoint: " + path);
  out << "daskt-checkpoint v1\n";
  out << "config_hash=" << config_hash << "\n";
  out << "dtype=" << (sizeof(S) == 8 ? "float64" : "float32") << "\n";
  out << "count=" << params_.size() << "\n";
  for (const auto& p : params_)
    out << p.name << " " << p.value.rows() << " " << p.value.cols() << "\n";
  out << "BINARY\n";
  for (const auto& p : params_)
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(sizeof(S) * static_cast<std::size_t>(p.value.size())));
  if (!out) fail(ErrorClass::train, "short checkpoint write: " + path);
}

template <typename S>
void ParamStoreT<S>::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorClass::train, "cannot open checkpoint: " + path);
  std::string line;
  std::getline(in, line);
  if (line != "daskt-checkpoint v1")
    fail(ErrorClass::train, "bad checkpoint header: " + path);
  std::getline(in, line);  // config_hash
  std::getline(in, line);
  std::string want = sizeof(S) == 8 ? "dtype=float64" : "dtype=float32";
  if (line != want) fail(ErrorClass::train, "checkpoint dtype mismatch: " + path);
  std::getline(in, line);
  std::size_t count = std::stoul(line.substr(line.find('=') + 1));
  if (count != params_.size())
    fail(ErrorClass::train, "checkpoint parameter count mismatch: " + path);
  for (std::size_t i = 0; i < count; ++i) {
    std::getline(in, line);
    auto f = split(line, ' ');
    if (f.size() != 3 || f[0] != params_[i].name ||
        std::stol(f[1]) != params_[i].value.rows() ||
        std::stol(f[2]) != params_[i].value.cols())
      fail(ErrorClass::train, "checkpoint manifest mismatch at " + params_[i].name);
  }
  std::getline(in, line);
  if (line != "BINARY") fail(ErrorClass::train, "bad checkpoint body marker");
  for (auto& p : params_) {
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(sizeof(S) * static_cast<std::size_t>(p.value.size())));
  }
  if (!in) fail(ErrorClass::train, "truncated checkpoint: " + path);
}

}  // namespace daskt::ad
