#include "daskt/affect_features.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace daskt {

std::string FactorLayout::dim_name(int i) const {
  if (i < num_kcs) return "dAcc:kc" + std::to_string(i + 1);
  if (i < 2 * num_kcs) return "dRT:kc" + std::to_string(i - num_kcs + 1);
  if (i < 3 * num_kcs) return "dAtt:kc" + std::to_string(i - 2 * num_kcs + 1);
  if (i == interval()) return "dInterval";
  if (i == participation()) return "dPartRate";
  return "?";
}

namespace {

struct SeqKcStats {
  std::map<int, int> count;
  std::map<int, int> correct;
  std::map<int, std::int64_t> resp_sum;
  std::map<int, std::int64_t> att_sum;
};

SeqKcStats per_kc(RecordSpan slice) {
  SeqKcStats s;
  for (const auto& r : slice) {
    s.count[r.kc_id] += 1;
    s.correct[r.kc_id] += r.correct;
    s.resp_sum[r.kc_id] += r.response_ms;
    s.att_sum[r.kc_id] += r.attempts;
  }
  return s;
}

double slice_pr(RecordSpan slice, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (slice.empty()) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  std::int64_t t_s = slice.front().start_ms;
  std::int64_t t_e = slice.back().end_ms ? *slice.back().end_ms : slice.back().start_ms;
  if (t_e <= t_s) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return static_cast<double>(slice.size()) / static_cast<double>(t_e - t_s);
}

std::int64_t slice_interval_sum(RecordSpan slice) {
  // telescoping sum of consecutive start-time gaps; empty for < 2 records
  if (slice.size() < 2) return 0;
  return slice.back().start_ms - slice.front().start_ms;
}

}  // namespace

PopulationStats population_stats(const std::vector<StudentSequence>& train,
                                 int num_kcs, bool zscore) {
  if (train.empty()) fail(ErrorClass::affect, "population_stats: empty training set");
  PopulationStats st;
  st.layout.num_kcs = num_kcs;
  st.zscore = zscore;
  st.acc_mean = VecX::Zero(num_kcs + 1);
  st.rt_mean = VecX::Zero(num_kcs + 1);
  st.att_mean = VecX::Zero(num_kcs + 1);
  st.kc_seen.assign(static_cast<std::size_t>(num_kcs) + 1, 0);

  VecX acc_n = VecX::Zero(num_kcs + 1), rt_n = acc_n, att_n = acc_n;
  double pr_sum = 0, it_sum = 0;
  for (const auto& seq : train) {
    RecordSpan slice(seq.records);
    auto s = per_kc(slice);
    for (const auto& [kc, n] : s.count) {
      if (kc < 1 || kc > num_kcs) continue;
      st.kc_seen[static_cast<std::size_t>(kc)] = 1;
      st.acc_mean[kc] += static_cast<double>(s.correct[kc]) / n;
      acc_n[kc] += 1;
      st.rt_mean[kc] += static_cast<double>(s.resp_sum[kc]) / n;
      rt_n[kc] += 1;
      st.att_mean[kc] += static_cast<double>(s.att_sum[kc]);
      att_n[kc] += 1;
    }
    pr_sum += slice_pr(slice, nullptr);
    it_sum += static_cast<double>(slice_interval_sum(slice));
  }
  for (int k = 1; k <= num_kcs; ++k) {
    if (acc_n[k] > 0) st.acc_mean[k] /= acc_n[k];
    if (rt_n[k] > 0) st.rt_mean[k] /= rt_n[k];
    if (att_n[k] > 0) st.att_mean[k] /= att_n[k];
  }
  double nseq = static_cast<double>(train.size());
  st.pr_mean = pr_sum / nseq;
  st.interval_mean = it_sum / nseq;

  // per-dimension std of raw whole-sequence factors, for optional z-scoring
  int dim = st.layout.dim();
  VecX mean = VecX::Zero(dim), m2 = VecX::Zero(dim);
  double n = 0;
  for (const auto& seq : train) {
    VecX v = raw_factors(RecordSpan(seq.records), st);
    n += 1;
    VecX delta = v - mean;
    mean += delta / n;
    m2 += delta.cwiseProduct(v - mean);
  }
  st.sigma = (m2 / n).cwiseSqrt();
  for (int i = 0; i < dim; ++i)
    if (!(st.sigma[i] > 0)) st.sigma[i] = 1.0;
  return st;
}

VecX confidence(RecordSpan slice, const PopulationStats& stats) {
  const auto& L = stats.layout;
  VecX out = VecX::Zero(2 * L.num_kcs);
  auto s = per_kc(slice);
  for (const auto& [kc, n] : s.count) {
    if (kc < 1 || kc > L.num_kcs) continue;
    out[L.acc(kc)] = static_cast<double>(s.correct[kc]) / n - stats.acc_mean[kc];
    out[L.rt(kc)] = static_cast<double>(s.resp_sum[kc]) / n - stats.rt_mean[kc];
  }
  return out;
}

double interest(RecordSpan slice, const PopulationStats& stats, bool* degenerate) {
  return slice_pr(slice, degenerate) - stats.pr_mean;
}

VecX effort(RecordSpan slice, const PopulationStats& stats) {
  const auto& L = stats.layout;
  VecX out = VecX::Zero(L.num_kcs + 1);
  auto s = per_kc(slice);
  for (const auto& [kc, n] : s.count) {
    if (kc < 1 || kc > L.num_kcs) continue;
    out[kc - 1] = static_cast<double>(s.att_sum[kc]) - stats.att_mean[kc];
  }
  out[L.num_kcs] =
      static_cast<double>(slice_interval_sum(slice)) - stats.interval_mean;
  return out;
}

VecX raw_factors(RecordSpan slice, const PopulationStats& stats) {
  const auto& L = stats.layout;
  VecX v = VecX::Zero(L.dim());
  v.head(2 * L.num_kcs) = confidence(slice, stats);
  v.segment(2 * L.num_kcs, L.num_kcs + 1) = effort(slice, stats);
  v[L.participation()] = interest(slice, stats, nullptr);
  return v;
}

VecX l2_normalize(VecX v) {
  double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

VecX maf(RecordSpan slice, const PopulationStats& stats) {
  return l2_normalize(raw_factors(slice, stats));
}

VecX cluster_vector(RecordSpan slice, const PopulationStats& stats) {
  VecX v = raw_factors(slice, stats);
  if (stats.zscore) v = v.cwiseQuotient(stats.sigma);
  return l2_normalize(std::move(v));
}

void PopulationStats::save(const std::string& path, const std::string& config_hash) const {
  std::ostringstream out;
  out << "# daskt-stats v1\n# config_hash=" << config_hash << "\n";
  out << "num_kcs\t" << layout.num_kcs << "\n";
  out << "zscore\t" << (zscore ? 1 : 0) << "\n";
  out << "pr_mean\t" << fmt_full(pr_mean) << "\n";
  out << "interval_mean\t" << fmt_full(interval_mean) << "\n";
  for (int k = 1; k <= layout.num_kcs; ++k) {
    out << "kc\t" << k << "\t" << static_cast<int>(kc_seen[static_cast<std::size_t>(k)])
        << "\t" << fmt_full(acc_mean[k]) << "\t" << fmt_full(rt_mean[k]) << "\t"
        << fmt_full(att_mean[k]) << "\n";
  }
  out << "sigma";
  for (int i = 0; i < sigma.size(); ++i) out << "\t" << fmt_full(sigma[i]);
  out << "\n";
  write_text_file(path, out.str());
}

PopulationStats PopulationStats::load(const std::string& path) {
  PopulationStats st;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f[0] == "num_kcs") {
      st.layout.num_kcs = std::stoi(f[1]);
      st.acc_mean = VecX::Zero(st.layout.num_kcs + 1);
      st.rt_mean = VecX::Zero(st.layout.num_kcs + 1);
      st.att_mean = VecX::Zero(st.layout.num_kcs + 1);
      st.kc_seen.assign(static_cast<std::size_t>(st.layout.num_kcs) + 1, 0);
    } else if (f[0] == "zscore") {
      st.zscore = f[1] == "1";
    } else if (f[0] == "pr_mean") {
      st.pr_mean = std::stod(f[1]);
    } else if (f[0] == "interval_mean") {
      st.interval_mean = std::stod(f[1]);
    } else if (f[0] == "kc") {
      int k = std::stoi(f[1]);
      st.kc_seen[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(std::stoi(f[2]));
      st.acc_mean[k] = std::stod(f[3]);
      st.rt_mean[k] = std::stod(f[4]);
      st.att_mean[k] = std::stod(f[5]);
    } else if (f[0] == "sigma") {
      st.sigma = VecX::Zero(static_cast<int>(f.size()) - 1);
      for (std::size_t i = 1; i < f.size(); ++i)
        st.sigma[static_cast<int>(i) - 1] = std::stod(f[i]);
    }
  }
  if (st.sigma.size() != st.layout.dim())
    fail(ErrorClass::config, "stats file dimension mismatch: " + path);
  return st;
}

}  // namespace daskt
