#include "streetvae/metrics.hpp"

#include <cmath>
#include <numbers>
#include <unordered_set>

#include "streetvae/error.hpp"

namespace streetvae {

GraphMetrics topo_metrics(const StreetGraph& g) {
  if (g.edge_count() == 0 || g.node_count() == 0) throw ArgumentError("topo_metrics: graph has no edges");
  double total_length = 0.0;
  double total_chord = 0.0;
  double ratio_sum = 0.0;
  std::size_t ratio_count = 0;
  for (const auto& e : g.edges()) {
    const double len = g.edge_length(e);
    const double chord = distance(g.node(e.u), g.node(e.v));
    total_length += len;
    total_chord += chord;
    if (chord > 0.0) {
      ratio_sum += len / chord;
      ++ratio_count;
    }
  }
  GraphMetrics m;
  const auto e = static_cast<double>(g.edge_count());
  m.avg_street_length = total_length / e;
  m.avg_streets_per_node = 2.0 * e / static_cast<double>(g.node_count());
  m.avg_circuity = total_chord > 0.0 ? total_length / total_chord : 1.0;
  m.mean_edge_circuity = ratio_count > 0 ? ratio_sum / static_cast<double>(ratio_count) : 1.0;
  return m;
}

BlockMetrics block_metrics(const StreetGraph& g, const BlockOptions& options) {
  check_planar(g);
  const auto faces = extract_faces(g);
  std::unordered_set<int> outer_edges;
  for (const auto& f : faces) {
    if (f.is_outer) outer_edges.insert(f.half_edges.begin(), f.half_edges.end());
  }

  BlockMetrics out;
  for (std::size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    if (f.is_outer || f.signed_area <= 0.0) continue;
    const auto ring = face_polygon(g, f);
    const AreaPerimeter ap = polygon_area_perimeter(ring);
    if (ap.area < options.min_area) {
      ++out.zero_area_excluded;
      continue;
    }
    BlockRecord rec;
    rec.face = fi;
    rec.area = ap.area;
    rec.perimeter = ap.perimeter;
    const Circle c = min_enclosing_circle(ring);
    rec.form_factor = ap.area / (std::numbers::pi * c.radius * c.radius);
    rec.compactness = ap.perimeter / ap.area;
    for (int he : f.half_edges) {
      if (outer_edges.count(he)) {
        rec.touches_outer = true;
        break;
      }
    }
    if (options.exclude_boundary && rec.touches_outer) continue;
    out.table.push_back(rec);
  }
  out.blocks = out.table.size();
  if (out.blocks > 0) {
    for (const auto& r : out.table) {
      out.avg_area += r.area;
      out.avg_form_factor += r.form_factor;
      out.avg_compactness += r.compactness;
    }
    const auto n = static_cast<double>(out.blocks);
    out.avg_area /= n;
    out.avg_form_factor /= n;
    out.avg_compactness /= n;
  }
  return out;
}

}  // namespace streetvae
