#include "daskt/model.hpp"

namespace daskt {

Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_a_gat") return Ablation::no_a_gat;
  if (s == "no_at_gat") return Ablation::no_at_gat;
  if (s == "no_ica") return Ablation::no_ica;
  if (s == "no_maf") return Ablation::no_maf;
  fail(ErrorClass::config, "unknown ablation tag: " + s);
}

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_a_gat: return "no_a_gat";
    case Ablation::no_at_gat: return "no_at_gat";
    case Ablation::no_ica: return "no_ica";
    case Ablation::no_maf: return "no_maf";
  }
  return "?";
}

std::vector<int> per_step_affect(int n, int seg_len, int lag, Ablation ablation,
                                 const std::vector<int>& segment_affect,
                                 int whole_sequence_affect) {
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  if (ablation == Ablation::no_maf) return out;
  if (ablation == Ablation::no_ica) {
    std::fill(out.begin(), out.end(), whole_sequence_affect);
    return out;
  }
  for (int t = 0; t < n; ++t) {
    int seg = t / seg_len - lag;
    if (seg >= 0 && seg < static_cast<int>(segment_affect.size()))
      out[static_cast<std::size_t>(t)] = segment_affect[static_cast<std::size_t>(seg)];
  }
  return out;
}

}  // namespace daskt
