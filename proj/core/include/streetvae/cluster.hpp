#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace streetvae {

struct ClusterResult {
  int k = 0;
  std::vector<int> labels;            // one per row
  Eigen::MatrixXd centroids;          // [k, d]
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // after each Lloyd iteration
};

/// k-means++ seeding then Lloyd iterations to an assignment fixpoint or
/// `max_iter`. An emptied cluster is re-seeded at the point farthest from its
/// centroid. Throws ArgumentError unless 1 <= k <= rows; throws NumericError
/// if inertia increases between iterations.
ClusterResult kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int max_iter = 300);

/// Lloyd iterations from the given centroids.
ClusterResult kmeans_from(const Eigen::MatrixXd& data, Eigen::MatrixXd centroids, int max_iter = 300);

/// Sum of squared distances from each row to its assigned centroid.
double inertia_of(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids, const std::vector<int>& labels);

struct ElbowPoint {
  int k = 0;
  double inertia = 0.0;
};

struct ElbowResult {
  std::vector<ElbowPoint> curve;
  int suggested_k = 0;
};

/// Inertia for each k in [k_min, k_max] (best of `restarts` seeded runs, one
/// warm-started from the k-1 solution plus the worst-fit point). Suggested k
/// maximizes the distance from its point to the chord between the endpoints.
ElbowResult elbow_curve(const Eigen::MatrixXd& data, int k_min, int k_max, std::uint64_t seed, int restarts = 5);

struct CountrySummary {
  std::string country;
  int mode = 0;
  bool mode_tied = false;
  int variety = 0;
  std::vector<int> counts;  // per label
};

struct ClusterSummary {
  std::vector<int> histogram;  // per label
  std::vector<CountrySummary> countries;  // sorted by country
};

/// `countries[i]` is the country of row i. Mode ties resolve to the lowest label.
ClusterSummary cluster_summaries(const ClusterResult& result, const std::vector<std::string>& countries);

/// Joins graph ids to countries; throws ArgumentError listing unmapped ids.
std::vector<std::string> join_countries(const std::vector<std::string>& graph_ids,
                                        const std::map<std::string, std::string>& country_by_id);

}  // namespace streetvae
