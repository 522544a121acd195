#pragma once

#include <array>

#include "streetvae/graph.hpp"

namespace streetvae {

inline constexpr int kOrientationBins = 36;

struct OrientationHistogram {
  std::array<double, kOrientationBins> weights{};  // length-weighted (or unit) mass per bin
  std::array<int, kOrientationBins> counts{};      // bearings per bin; sums to 2E
  double entropy = 0.0;                            // nats, from `weights`
};

/// Bin of a compass bearing: bin 0 spans [-5, 5) degrees, bin k [10k - 5, 10k + 5).
int orientation_bin(double bearing_deg);

/// Both directions of every edge (chord bearing), weighted by the edge's
/// geometric length unless `length_weighted` is false.
OrientationHistogram orientation_histogram(const StreetGraph& g, bool length_weighted = true);

}  // namespace streetvae
