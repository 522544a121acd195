#pragma once

#include <cstddef>
#include <vector>

#include "streetvae/graph.hpp"

namespace streetvae {

struct GraphMetrics {
  double avg_street_length = 0.0;     // meters
  double avg_streets_per_node = 0.0;  // 2E / N
  double avg_circuity = 1.0;          // sum of lengths / sum of endpoint distances
  double mean_edge_circuity = 1.0;    // mean of per-edge ratios (zero-chord edges skipped)
};

/// Throws ArgumentError when the graph has no edge.
GraphMetrics topo_metrics(const StreetGraph& g);

struct BlockRecord {
  std::size_t face = 0;
  double area = 0.0;
  double perimeter = 0.0;
  double form_factor = 0.0;
  double compactness = 0.0;
  bool touches_outer = false;
};

struct BlockMetrics {
  std::size_t blocks = 0;
  std::size_t zero_area_excluded = 0;
  double avg_area = 0.0;
  double avg_form_factor = 0.0;
  double avg_compactness = 0.0;
  std::vector<BlockRecord> table;
};

struct BlockOptions {
  /// Drop blocks sharing an edge with the outer face.
  bool exclude_boundary = false;
  double min_area = 1e-9;
};

/// Interior-face statistics: area, form factor (area over the area of the
/// minimum enclosing circle) and compactness (perimeter over area). Averages
/// are zero when no block qualifies. Propagates NonPlanarError.
BlockMetrics block_metrics(const StreetGraph& g, const BlockOptions& options = {});

}  // namespace streetvae
