#include "streetvae/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "streetvae/error.hpp"
#include "streetvae/ingest.hpp"

namespace streetvae {

std::uint64_t StreetGraph::key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

int StreetGraph::add_node(PointXY p) {
  nodes_.push_back(p);
  return static_cast<int>(nodes_.size() - 1);
}

bool StreetGraph::add_edge(int a, int b, std::optional<std::vector<PointXY>> geometry) {
  const int n = static_cast<int>(nodes_.size());
  if (a < 0 || b < 0 || a >= n || b >= n) throw ArgumentError("add_edge: endpoint out of range");
  if (a == b) return false;
  if (a > b) {
    std::swap(a, b);
    if (geometry) std::reverse(geometry->begin(), geometry->end());
  }
  if (!edge_keys_.insert(key(a, b)).second) return false;
  if (geometry && geometry->size() <= 2) geometry.reset();
  if (geometry) {
    geometry->front() = nodes_[static_cast<std::size_t>(a)];
    geometry->back() = nodes_[static_cast<std::size_t>(b)];
  }
  edges_.push_back({a, b, std::move(geometry)});
  return true;
}

bool StreetGraph::has_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  return edge_keys_.contains(key(a, b));
}

std::vector<PointXY> StreetGraph::edge_polyline(const StreetEdge& e) const {
  if (e.geometry) return *e.geometry;
  return {node(e.u), node(e.v)};
}

double StreetGraph::edge_length(const StreetEdge& e) const {
  if (e.geometry) return polyline_length(*e.geometry);
  return distance(node(e.u), node(e.v));
}

std::vector<int> StreetGraph::degrees() const {
  std::vector<int> deg(nodes_.size(), 0);
  for (const auto& e : edges_) {
    ++deg[static_cast<std::size_t>(e.u)];
    ++deg[static_cast<std::size_t>(e.v)];
  }
  return deg;
}

StreetGraph StreetGraph::permuted(std::span<const int> order) const {
  if (order.size() != nodes_.size()) throw ArgumentError("permuted: order size mismatch");
  std::vector<int> new_id(nodes_.size(), -1);
  StreetGraph out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int old = order[k];
    if (old < 0 || static_cast<std::size_t>(old) >= nodes_.size() || new_id[static_cast<std::size_t>(old)] != -1) {
      throw ArgumentError("permuted: order is not a permutation");
    }
    new_id[static_cast<std::size_t>(old)] = static_cast<int>(k);
    out.add_node(nodes_[static_cast<std::size_t>(old)]);
  }
  // Edges sorted by new endpoint ids keep files canonical.
  std::vector<StreetEdge> relabeled;
  relabeled.reserve(edges_.size());
  for (const auto& e : edges_) {
    StreetEdge r{new_id[static_cast<std::size_t>(e.u)], new_id[static_cast<std::size_t>(e.v)], e.geometry};
    if (r.u > r.v) {
      std::swap(r.u, r.v);
      if (r.geometry) std::reverse(r.geometry->begin(), r.geometry->end());
    }
    relabeled.push_back(std::move(r));
  }
  std::sort(relabeled.begin(), relabeled.end(),
            [](const StreetEdge& a, const StreetEdge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  for (auto& e : relabeled) out.add_edge(e.u, e.v, std::move(e.geometry));
  return out;
}

void StreetGraph::validate() const {
  const int n = static_cast<int>(nodes_.size());
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!std::isfinite(nodes_[i].x) || !std::isfinite(nodes_[i].y)) {
      throw ArgumentError("node " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    const std::string tag = "edge " + std::to_string(i);
    if (e.u < 0 || e.v >= n) throw ArgumentError(tag + ": endpoint out of range");
    if (e.u >= e.v) throw ArgumentError(tag + ": endpoints not stored as u < v");
    if (!seen.insert(key(e.u, e.v)).second) throw ArgumentError(tag + ": duplicate edge");
    if (e.geometry) {
      if (e.geometry->size() < 2 || e.geometry->front() != node(e.u) || e.geometry->back() != node(e.v)) {
        throw ArgumentError(tag + ": geometry does not start/end at its endpoints");
      }
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<std::vector<PointXY>> project_polylines(const RawStreetData& data, int zone, bool north) {
  std::vector<std::vector<PointXY>> out;
  out.reserve(data.polylines.size());
  for (const auto& line : data.polylines) {
    std::vector<PointXY> xy;
    xy.reserve(line.size());
    for (const auto& g : line) xy.push_back(utm_project(g, zone, north).xy);
    out.push_back(std::move(xy));
  }
  return out;
}

namespace {

struct SnapKey {
  long long x;
  long long y;
  friend bool operator==(const SnapKey&, const SnapKey&) = default;
};

struct SnapKeyHash {
  std::size_t operator()(const SnapKey& k) const noexcept {
    return std::hash<long long>()(k.x) ^ (std::hash<long long>()(k.y) * 0x9e3779b97f4a7c15ULL);
  }
};

SnapKey snap(PointXY p) {
  return {std::llround(p.x / kSnapTolerance), std::llround(p.y / kSnapTolerance)};
}

}  // namespace

StreetGraph build_graph(std::span<const std::vector<PointXY>> polylines) {
  std::unordered_map<SnapKey, int, SnapKeyHash> visits;
  for (const auto& line : polylines) {
    for (const auto& p : line) ++visits[snap(p)];
  }

  StreetGraph g;
  std::unordered_map<SnapKey, int, SnapKeyHash> node_of;
  auto node_at = [&](PointXY p) {
    const auto k = snap(p);
    if (auto it = node_of.find(k); it != node_of.end()) return it->second;
    const int id = g.add_node(p);
    node_of.emplace(k, id);
    return id;
  };
  auto is_junction = [&](PointXY p) {
    const auto k = snap(p);
    return node_of.contains(k) || visits[k] >= 2;
  };

  for (const auto& raw : polylines) {
    // Drop consecutive duplicates after snapping.
    std::vector<PointXY> line;
    for (const auto& p : raw) {
      if (line.empty() || !(snap(line.back()) == snap(p))) line.push_back(p);
    }
    if (line.size() < 2) continue;

    std::size_t start = 0;
    int start_node = node_at(line.front());
    for (std::size_t i = 1; i < line.size(); ++i) {
      const bool last = i + 1 == line.size();
      if (!last && !is_junction(line[i])) continue;
      const int end_node = node_at(line[i]);
      std::vector<PointXY> seg(line.begin() + static_cast<std::ptrdiff_t>(start),
                               line.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      if (end_node == start_node) {
        // Closed loop: every vertex becomes a node so no self-loop is needed.
        int prev = start_node;
        for (std::size_t j = 1; j < seg.size(); ++j) {
          const int cur = node_at(seg[j]);
          g.add_edge(prev, cur);
          prev = cur;
        }
      } else {
        g.add_edge(start_node, end_node, std::move(seg));
      }
      start = i;
      start_node = end_node;
    }
  }
  return g;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

/// One single-linkage pass. Returns the group index of every node, groups
/// numbered by their smallest member.
std::vector<int> link_groups(std::span<const PointXY> pts, double threshold, int& group_count) {
  const std::size_t n = pts.size();
  UnionFind uf(n);
  if (threshold > 0.0 && n > 1) {
    // Grid buckets of side `threshold`; candidate pairs live in adjacent cells.
    std::unordered_map<SnapKey, std::vector<std::size_t>, SnapKeyHash> cells;
    auto cell_of = [&](PointXY p) {
      return SnapKey{static_cast<long long>(std::floor(p.x / threshold)),
                     static_cast<long long>(std::floor(p.y / threshold))};
    };
    for (std::size_t i = 0; i < n; ++i) cells[cell_of(pts[i])].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = cell_of(pts[i]);
      for (long long dx = -1; dx <= 1; ++dx) {
        for (long long dy = -1; dy <= 1; ++dy) {
          const auto it = cells.find({c.x + dx, c.y + dy});
          if (it == cells.end()) continue;
          for (std::size_t j : it->second) {
            if (j > i && distance(pts[i], pts[j]) < threshold) uf.unite(i, j);
          }
        }
      }
    }
  }
  std::vector<int> group(n, -1);
  std::vector<int> root_group(n, -1);
  group_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = uf.find(i);
    if (root_group[r] < 0) root_group[r] = group_count++;
    group[i] = root_group[r];
  }
  return group;
}

}  // namespace

StreetGraph simplify_merge(const StreetGraph& g, double threshold_m) {
  if (!(threshold_m >= 0.0)) throw ArgumentError("simplify_merge: threshold must be >= 0");
  const std::size_t n = g.node_count();

  // Each current node carries the original nodes it absorbed, so centroids
  // always average original positions.
  std::vector<PointXY> pts = g.nodes();
  std::vector<double> weight(n, 1.0);
  std::vector<int> final_group(n);
  std::iota(final_group.begin(), final_group.end(), 0);

  while (true) {
    int count = 0;
    const auto group = link_groups(pts, threshold_m, count);
    if (static_cast<std::size_t>(count) == pts.size()) break;
    std::vector<PointXY> sum(static_cast<std::size_t>(count));
    std::vector<double> w(static_cast<std::size_t>(count), 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto gi = static_cast<std::size_t>(group[i]);
      sum[gi] = sum[gi] + weight[i] * pts[i];
      w[gi] += weight[i];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = (1.0 / w[k]) * sum[k];
    for (auto& fg : final_group) fg = group[static_cast<std::size_t>(fg)];
    pts = std::move(sum);
    weight = std::move(w);
  }

  StreetGraph out(pts);
  for (const auto& e : g.edges()) {
    const int a = final_group[static_cast<std::size_t>(e.u)];
    const int b = final_group[static_cast<std::size_t>(e.v)];
    if (a == b) continue;
    std::optional<std::vector<PointXY>> geom;
    if (e.geometry) {
      std::vector<PointXY> gm = *e.geometry;
      gm.front() = pts[static_cast<std::size_t>(a)];
      gm.back() = pts[static_cast<std::size_t>(b)];
      gm.erase(std::unique(gm.begin(), gm.end()), gm.end());
      geom = std::move(gm);
    }
    out.add_edge(a, b, std::move(geom));
  }
  return out;
}

// ---------------------------------------------------------------------------

AdjacencyMatrix AdjacencyMatrix::identity(Eigen::Index n) {
  AdjacencyMatrix m;
  m.a = Eigen::MatrixXd::Identity(n, n);
  m.degree = Eigen::VectorXd::Ones(n);
  m.normalized = Eigen::MatrixXd::Identity(n, n);
  return m;
}

AdjacencyMatrix normalize_adjacency(const StreetGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  if (n < 1) throw ArgumentError("normalize_adjacency: empty graph");
  AdjacencyMatrix m;
  m.a = Eigen::MatrixXd::Identity(n, n);
  for (const auto& e : g.edges()) {
    m.a(e.u, e.v) = 1.0;
    m.a(e.v, e.u) = 1.0;
  }
  m.degree = m.a.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = m.degree.array().rsqrt();
  m.normalized = inv_sqrt.asDiagonal() * m.a * inv_sqrt.asDiagonal();
  return m;
}

std::vector<int> order_nodes(const StreetGraph& g) {
  std::vector<int> order(g.node_count());
  std::iota(order.begin(), order.end(), 0);
  const auto& pts = g.nodes();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& pa = pts[static_cast<std::size_t>(a)];
    const auto& pb = pts[static_cast<std::size_t>(b)];
    if (pa.y != pb.y) return pa.y < pb.y;
    if (pa.x != pb.x) return pa.x < pb.x;
    return a < b;
  });
  return order;
}

TokenSeq flatten_sequence(std::span<const QuantizedPoint> ordered_nodes) {
  TokenSeq seq;
  seq.reserve(2 * ordered_nodes.size() + 2);
  seq.push_back(kTokenStart);
  for (const auto& q : ordered_nodes) {
    seq.push_back(q.qx);
    seq.push_back(q.qy);
  }
  seq.push_back(kTokenStop);
  return seq;
}

PreparedGraph prepare_graph(const StreetGraph& g) {
  PreparedGraph out;
  out.graph = g.permuted(order_nodes(g));
  const auto norm = center_and_normalize(out.graph.nodes());
  out.normalization = norm.record;
  std::vector<QuantizedPoint> q;
  q.reserve(norm.points.size());
  for (const auto& p : norm.points) q.push_back(quantize(p));
  out.tokens = flatten_sequence(q);
  return out;
}

std::vector<QuantizedPoint> detokenize(std::span<const int> tokens) {
  if (tokens.size() < 2 || tokens.front() != kTokenStart || tokens.back() != kTokenStop) {
    throw ArgumentError("detokenize: sequence must start with START and end with STOP");
  }
  const auto body = tokens.subspan(1, tokens.size() - 2);
  if (body.size() % 2 != 0) throw ArgumentError("detokenize: odd number of coordinate tokens");
  std::vector<QuantizedPoint> out;
  out.reserve(body.size() / 2);
  for (std::size_t i = 0; i < body.size(); i += 2) {
    for (int t : {body[i], body[i + 1]}) {
      if (t < 0 || t >= kQuantBins) throw ArgumentError("detokenize: non-coordinate token inside sequence");
    }
    out.push_back({static_cast<std::uint8_t>(body[i]), static_cast<std::uint8_t>(body[i + 1])});
  }
  return out;
}

}  // namespace streetvae
