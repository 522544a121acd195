#include <algorithm>
#include <cmath>
#include <numeric>

#include "streetvae/error.hpp"
#include "streetvae/graph.hpp"

namespace streetvae {

namespace {

double cross(PointXY o, PointXY a, PointXY b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

int orientation(PointXY o, PointXY a, PointXY b) {
  const double c = cross(o, a, b);
  const double scale = std::max({std::abs(a.x - o.x), std::abs(a.y - o.y), std::abs(b.x - o.x),
                                 std::abs(b.y - o.y), 1e-300});
  if (std::abs(c) <= 1e-12 * scale * scale) return 0;
  return c > 0 ? 1 : -1;
}

bool on_segment(PointXY a, PointXY b, PointXY p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

/// Closed-segment intersection test.
bool segments_touch(PointXY p1, PointXY p2, PointXY q1, PointXY q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

bool edges_conflict(const StreetGraph& g, const StreetEdge& a, const StreetEdge& b) {
  const PointXY a1 = g.node(a.u), a2 = g.node(a.v);
  const PointXY b1 = g.node(b.u), b2 = g.node(b.v);
  // Shared endpoint: conflict only when the two chords overlap along a line.
  int shared = -1, other_a = -1, other_b = -1;
  if (a.u == b.u) shared = a.u, other_a = a.v, other_b = b.v;
  else if (a.u == b.v) shared = a.u, other_a = a.v, other_b = b.u;
  else if (a.v == b.u) shared = a.v, other_a = a.u, other_b = b.v;
  else if (a.v == b.v) shared = a.v, other_a = a.u, other_b = b.u;
  if (shared >= 0) {
    const PointXY s = g.node(shared), pa = g.node(other_a), pb = g.node(other_b);
    if (orientation(s, pa, pb) != 0) return false;
    return (pa.x - s.x) * (pb.x - s.x) + (pa.y - s.y) * (pb.y - s.y) > 0.0;
  }
  return segments_touch(a1, a2, b1, b2);
}

}  // namespace

void check_planar(const StreetGraph& g) {
  const auto& edges = g.edges();
  // Sweep over x-extents so only edges with overlapping x-ranges are tested.
  std::vector<std::size_t> idx(edges.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto xmin = [&](std::size_t i) { return std::min(g.node(edges[i].u).x, g.node(edges[i].v).x); };
  auto xmax = [&](std::size_t i) { return std::max(g.node(edges[i].u).x, g.node(edges[i].v).x); };
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double xa = xmin(a), xb = xmin(b);
    return xa != xb ? xa < xb : a < b;
  });
  std::vector<std::size_t> active;
  for (std::size_t i : idx) {
    const double x0 = xmin(i);
    std::erase_if(active, [&](std::size_t j) { return xmax(j) < x0; });
    const auto& ei = edges[i];
    const double ylo = std::min(g.node(ei.u).y, g.node(ei.v).y);
    const double yhi = std::max(g.node(ei.u).y, g.node(ei.v).y);
    for (std::size_t j : active) {
      const auto& ej = edges[j];
      const double jlo = std::min(g.node(ej.u).y, g.node(ej.v).y);
      const double jhi = std::max(g.node(ej.u).y, g.node(ej.v).y);
      if (jhi < ylo || jlo > yhi) continue;
      if (edges_conflict(g, ei, ej)) throw NonPlanarError(std::min(i, j), std::max(i, j));
    }
    active.push_back(i);
  }
}

std::vector<Face> extract_faces(const StreetGraph& g) {
  check_planar(g);
  const auto& edges = g.edges();
  const std::size_t n = g.node_count();
  const std::size_t half_count = 2 * edges.size();

  auto origin = [&](std::size_t h) { return h % 2 == 0 ? edges[h / 2].u : edges[h / 2].v; };
  auto target = [&](std::size_t h) { return h % 2 == 0 ? edges[h / 2].v : edges[h / 2].u; };

  // Outgoing half-edges per node sorted counter-clockwise by chord angle.
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t h = 0; h < half_count; ++h) out[static_cast<std::size_t>(origin(h))].push_back(h);
  std::vector<std::size_t> pos_in_rotation(half_count);
  for (std::size_t v = 0; v < n; ++v) {
    auto& rot = out[v];
    const PointXY p = g.node(static_cast<int>(v));
    std::vector<double> angle(rot.size());
    for (std::size_t k = 0; k < rot.size(); ++k) {
      const PointXY q = g.node(target(rot[k]));
      angle[k] = std::atan2(q.y - p.y, q.x - p.x);
    }
    std::vector<std::size_t> order(rot.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return angle[a] != angle[b] ? angle[a] < angle[b] : rot[a] < rot[b];
    });
    std::vector<std::size_t> sorted(rot.size());
    for (std::size_t k = 0; k < order.size(); ++k) sorted[k] = rot[order[k]];
    rot = std::move(sorted);
    for (std::size_t k = 0; k < rot.size(); ++k) pos_in_rotation[rot[k]] = k;
  }

  // Next half-edge after arriving on h: the clockwise neighbour of h's twin.
  auto next = [&](std::size_t h) {
    const std::size_t twin = h ^ 1U;
    const auto& rot = out[static_cast<std::size_t>(target(h))];
    const std::size_t k = pos_in_rotation[twin];
    return rot[(k + rot.size() - 1) % rot.size()];
  };

  std::vector<Face> faces;
  std::vector<bool> used(half_count, false);
  for (std::size_t start = 0; start < half_count; ++start) {
    if (used[start]) continue;
    Face f;
    std::size_t h = start;
    do {
      used[h] = true;
      f.ring.push_back(origin(h));
      f.half_edges.push_back(static_cast<int>(h / 2));
      f.forward.push_back(h % 2 == 0);
      h = next(h);
    } while (h != start);
    std::vector<PointXY> pts;
    pts.reserve(f.ring.size());
    for (int v : f.ring) pts.push_back(g.node(v));
    f.signed_area = signed_area(pts);
    faces.push_back(std::move(f));
  }

  if (!faces.empty()) {
    std::size_t outer = 0;
    for (std::size_t i = 1; i < faces.size(); ++i) {
      if (faces[i].signed_area < faces[outer].signed_area) outer = i;
    }
    faces[outer].is_outer = true;
  }
  return faces;
}

std::vector<PointXY> face_polygon(const StreetGraph& g, const Face& face) {
  std::vector<PointXY> ring;
  for (std::size_t i = 0; i < face.half_edges.size(); ++i) {
    const auto& e = g.edges()[static_cast<std::size_t>(face.half_edges[i])];
    auto line = g.edge_polyline(e);
    if (!face.forward[i]) std::reverse(line.begin(), line.end());
    ring.insert(ring.end(), line.begin(), line.end() - 1);
  }
  return ring;
}

}  // namespace streetvae
