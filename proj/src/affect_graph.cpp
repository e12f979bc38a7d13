#include "daskt/affect_graph.hpp"

namespace daskt {

AffectGraph build_graph(int n) {
  if (n < 1) fail(ErrorClass::internal, "build_graph: empty sequence");
  AffectGraph g;
  g.n = n;
  for (int t = 0; t < n; ++t) {
    if (t > 0) g.edges.emplace_back(t, t - 1);
    g.edges.emplace_back(t, t);
    if (t + 1 < n) g.edges.emplace_back(t, t + 1);
  }
  return g;
}

}  // namespace daskt
