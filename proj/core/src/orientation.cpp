#include "streetvae/orientation.hpp"

#include <cmath>

namespace streetvae {

int orientation_bin(double bearing_deg) {
  double shifted = std::fmod(bearing_deg + 5.0, 360.0);
  if (shifted < 0.0) shifted += 360.0;
  const int bin = static_cast<int>(std::floor(shifted / 10.0));
  return bin >= kOrientationBins ? 0 : bin;
}

OrientationHistogram orientation_histogram(const StreetGraph& g, bool length_weighted) {
  OrientationHistogram h;
  for (const auto& e : g.edges()) {
    const PointXY a = g.node(e.u);
    const PointXY b = g.node(e.v);
    if (a.x == b.x && a.y == b.y) continue;
    const double w = length_weighted ? g.edge_length(e) : 1.0;
    for (double brg : {bearing(a, b), bearing(b, a)}) {
      const int bin = orientation_bin(brg);
      h.weights[static_cast<std::size_t>(bin)] += w;
      h.counts[static_cast<std::size_t>(bin)] += 1;
    }
  }
  double total = 0.0;
  for (double w : h.weights) total += w;
  if (total > 0.0) {
    for (double w : h.weights) {
      if (w > 0.0) {
        const double p = w / total;
        h.entropy -= p * std::log(p);
      }
    }
  }
  return h;
}

}  // namespace streetvae
