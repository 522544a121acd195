#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "streetvae/geom.hpp"

namespace streetvae {

struct RawStreetData;

/// Undirected street edge with u < v. Geometry, when present, runs from u to v
/// and includes both endpoint coordinates.
struct StreetEdge {
  int u = 0;
  int v = 0;
  std::optional<std::vector<PointXY>> geometry;
};

/// Undirected simple graph embedded in the plane. Node ids are the dense
/// indices 0..N-1 into `nodes()`.
class StreetGraph {
 public:
  StreetGraph() = default;
  explicit StreetGraph(std::vector<PointXY> nodes) : nodes_(std::move(nodes)) {}

  int add_node(PointXY p);

  /// Adds the edge {a, b}. Returns false (and adds nothing) for self-loops and
  /// edges already present. Geometry is re-oriented to run from min to max.
  bool add_edge(int a, int b, std::optional<std::vector<PointXY>> geometry = std::nullopt);

  bool has_edge(int a, int b) const;

  const std::vector<PointXY>& nodes() const { return nodes_; }
  const std::vector<StreetEdge>& edges() const { return edges_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  PointXY node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  /// Edge polyline from u to v: the stored geometry or the straight chord.
  std::vector<PointXY> edge_polyline(const StreetEdge& e) const;
  double edge_length(const StreetEdge& e) const;

  std::vector<int> degrees() const;

  /// Relabels nodes so that new id k is old id order[k].
  StreetGraph permuted(std::span<const int> order) const;

  /// Throws ArgumentError describing the first violated structural invariant.
  void validate() const;

 private:
  static std::uint64_t key(int a, int b);

  std::vector<PointXY> nodes_;
  std::vector<StreetEdge> edges_;
  std::unordered_set<std::uint64_t> edge_keys_;
};

inline constexpr double kSnapTolerance = 1e-6;
inline constexpr double kDefaultMergeThreshold = 10.0;

/// Projects every polyline into one UTM zone.
std::vector<std::vector<PointXY>> project_polylines(const RawStreetData& data, int zone, bool north);

/// Nodes at polyline endpoints and at vertices visited more than once (within
/// kSnapTolerance). Closed loops are split at every vertex.
StreetGraph build_graph(std::span<const std::vector<PointXY>> polylines);

/// Single-linkage merge of nodes closer than `threshold_m`, each group replaced
/// by its centroid; repeated until no two nodes are closer than the threshold.
StreetGraph simplify_merge(const StreetGraph& g, double threshold_m = kDefaultMergeThreshold);

/// A (with self-loops), its degree diagonal D and Ã = D^-1/2 A D^-1/2.
struct AdjacencyMatrix {
  Eigen::MatrixXd a;
  Eigen::VectorXd degree;
  Eigen::MatrixXd normalized;

  Eigen::Index size() const { return a.rows(); }
  static AdjacencyMatrix identity(Eigen::Index n);
};

AdjacencyMatrix normalize_adjacency(const StreetGraph& g);

/// Ascending y, then ascending x, then id. Returns old ids in rank order.
std::vector<int> order_nodes(const StreetGraph& g);

// ---------------------------------------------------------------------------
// Token sequences

inline constexpr int kTokenStop = 256;
inline constexpr int kTokenStart = 257;
inline constexpr int kTokenPad = 258;
inline constexpr int kVocabSize = 259;

using TokenSeq = std::vector<int>;

/// [START, qx1, qy1, ..., qxN, qyN, STOP].
TokenSeq flatten_sequence(std::span<const QuantizedPoint> ordered_nodes);

/// A graph in canonical node order with its normalization and token sequence.
struct PreparedGraph {
  StreetGraph graph;
  NormalizationRecord normalization;
  TokenSeq tokens;
};

/// order_nodes, then center_and_normalize, quantize and flatten_sequence.
PreparedGraph prepare_graph(const StreetGraph& g);

/// Inverse of flatten_sequence. Throws ArgumentError on a malformed sequence.
std::vector<QuantizedPoint> detokenize(std::span<const int> tokens);

// ---------------------------------------------------------------------------
// Faces

/// Closed walk of the rotation-system traversal. `half_edges[i]` is the edge
/// index traversed from ring[i] to ring[(i+1) % n], `forward[i]` whether it is
/// walked u->v.
struct Face {
  std::vector<int> ring;
  std::vector<int> half_edges;
  std::vector<bool> forward;
  double signed_area = 0.0;  // of the straight-chord ring; > 0 for bounded faces
  bool is_outer = false;
};

/// Throws NonPlanarError naming the first pair of crossing (or overlapping) edges.
void check_planar(const StreetGraph& g);

/// Faces of the straight-line embedding. Exactly one face (the most negative
/// signed area) is marked outer when the graph has an edge.
std::vector<Face> extract_faces(const StreetGraph& g);

/// Face boundary with edge geometry substituted for chords, not repeated at the end.
std::vector<PointXY> face_polygon(const StreetGraph& g, const Face& face);

}  // namespace streetvae
