#include "streetvae/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "streetvae/error.hpp"

namespace streetvae {

namespace {

struct Assignment {
  std::vector<int> labels;
  std::vector<double> dist2;
};

Assignment assign(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids) {
  Assignment a;
  a.labels.resize(static_cast<std::size_t>(data.rows()));
  a.dist2.resize(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (data.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    a.labels[static_cast<std::size_t>(i)] = arg;
    a.dist2[static_cast<std::size_t>(i)] = best;
  }
  return a;
}

Eigen::MatrixXd kmeanspp(const Eigen::MatrixXd& data, int k, std::mt19937_64& rng) {
  const Eigen::Index m = data.rows();
  Eigen::MatrixXd centroids(k, data.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, m - 1);
  centroids.row(0) = data.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) d2[static_cast<std::size_t>(i)] = (data.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double r = u(rng);
      double acc = 0.0;
      chosen = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (r < acc) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = data.row(chosen);
    for (Eigen::Index i = 0; i < m; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (data.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double inertia_of(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids, const std::vector<int>& labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    s += (data.row(i) - centroids.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return s;
}

ClusterResult kmeans_from(const Eigen::MatrixXd& data, Eigen::MatrixXd centroids, int max_iter) {
  const Eigen::Index m = data.rows();
  const auto k = static_cast<int>(centroids.rows());
  if (k < 1 || k > m) throw ArgumentError("kmeans: need 1 <= k <= rows");
  if (centroids.cols() != data.cols()) throw ShapeError("kmeans: centroid width differs from data width");
  if (!data.allFinite()) throw NumericError("kmeans: non-finite input");

  ClusterResult r;
  r.k = k;
  Assignment a = assign(data, centroids);
  double current = sum(a.dist2);
  // Tolerance for rounding in the recomputed means.
  auto slack = [](double v) { return 1e-9 * std::max(1.0, std::abs(v)); };

  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, data.cols());
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
      const int l = a.labels[static_cast<std::size_t>(i)];
      next.row(l) += data.row(i);
      ++sizes[static_cast<std::size_t>(l)];
    }
    std::vector<bool> taken(static_cast<std::size_t>(m), false);
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) {
        next.row(c) /= sizes[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it onto the worst-fit point not already used.
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (!taken[static_cast<std::size_t>(i)] && a.dist2[static_cast<std::size_t>(i)] > far_d) {
          far_d = a.dist2[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      taken[static_cast<std::size_t>(far)] = true;
      next.row(c) = data.row(far);
    }
    Assignment b = assign(data, next);
    const double updated = sum(b.dist2);
    if (updated > current + slack(current)) {
      throw NumericError("kmeans: inertia increased from " + std::to_string(current) + " to " +
                         std::to_string(updated));
    }
    r.inertia_trace.push_back(updated);
    r.iterations = it + 1;
    const bool fixpoint = b.labels == a.labels;
    centroids = std::move(next);
    a = std::move(b);
    current = updated;
    if (fixpoint) break;
  }
  r.labels = std::move(a.labels);
  r.centroids = std::move(centroids);
  r.inertia = current;
  return r;
}

ClusterResult kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int max_iter) {
  if (k < 1 || k > data.rows()) {
    throw ArgumentError("kmeans: k = " + std::to_string(k) + " with " + std::to_string(data.rows()) + " rows");
  }
  std::mt19937_64 rng(seed);
  return kmeans_from(data, kmeanspp(data, k, rng), max_iter);
}

ElbowResult elbow_curve(const Eigen::MatrixXd& data, int k_min, int k_max, std::uint64_t seed, int restarts) {
  if (k_min < 1 || k_max < k_min || k_max > data.rows()) {
    throw ArgumentError("elbow_curve: k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                        "] invalid for " + std::to_string(data.rows()) + " rows");
  }
  if (restarts < 1) throw ArgumentError("elbow_curve: restarts must be >= 1");
  ElbowResult out;
  std::mt19937_64 rng(seed);
  std::optional<ClusterResult> previous;
  for (int k = k_min; k <= k_max; ++k) {
    std::optional<ClusterResult> best;
    for (int r = 0; r < restarts; ++r) {
      ClusterResult c = kmeans(data, k, rng());
      if (!best || c.inertia < best->inertia) best = std::move(c);
    }
    if (previous) {
      // Warm start: previous solution plus a centroid on its worst-fit point
      // can only lower the inertia, which keeps the curve non-increasing.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double d =
            (data.row(i) - previous->centroids.row(previous->labels[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      Eigen::MatrixXd init(k, data.cols());
      init.topRows(k - 1) = previous->centroids;
      init.row(k - 1) = data.row(far);
      ClusterResult warm = kmeans_from(data, init);
      if (warm.inertia < best->inertia) best = std::move(warm);
    }
    out.curve.push_back({k, best->inertia});
    previous = std::move(best);
  }

  // Knee: largest distance from (k, inertia) to the chord joining the ends,
  // both axes scaled to [0, 1].
  out.suggested_k = out.curve.front().k;
  if (out.curve.size() >= 3) {
    const double k0 = out.curve.front().k, k1 = out.curve.back().k;
    const double i0 = out.curve.front().inertia, i1 = out.curve.back().inertia;
    const double span = std::max(i0 - i1, 1e-300);
    double best = -1.0;
    for (const auto& p : out.curve) {
      const double x = (p.k - k0) / (k1 - k0);
      const double y = (p.inertia - i1) / span;
      // Chord runs from (0, 1) to (1, 0): distance is |x + y - 1| / sqrt(2).
      const double d = std::abs(x + y - 1.0) / std::sqrt(2.0);
      if (d > best) {
        best = d;
        out.suggested_k = p.k;
      }
    }
  }
  return out;
}

ClusterSummary cluster_summaries(const ClusterResult& result, const std::vector<std::string>& countries) {
  if (countries.size() != result.labels.size()) {
    throw ArgumentError("cluster_summaries: " + std::to_string(countries.size()) + " countries for " +
                        std::to_string(result.labels.size()) + " labels");
  }
  ClusterSummary s;
  s.histogram.assign(static_cast<std::size_t>(result.k), 0);
  std::map<std::string, std::vector<int>> per_country;
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    const int l = result.labels[i];
    ++s.histogram[static_cast<std::size_t>(l)];
    auto& counts = per_country[countries[i]];
    if (counts.empty()) counts.assign(static_cast<std::size_t>(result.k), 0);
    ++counts[static_cast<std::size_t>(l)];
  }
  for (auto& [country, counts] : per_country) {
    CountrySummary c;
    c.country = country;
    c.counts = counts;
    const int top = *std::max_element(counts.begin(), counts.end());
    c.mode = static_cast<int>(std::find(counts.begin(), counts.end(), top) - counts.begin());
    c.mode_tied = std::count(counts.begin(), counts.end(), top) > 1;
    c.variety = static_cast<int>(std::count_if(counts.begin(), counts.end(), [](int n) { return n > 0; }));
    s.countries.push_back(std::move(c));
  }
  return s;
}

std::vector<std::string> join_countries(const std::vector<std::string>& graph_ids,
                                        const std::map<std::string, std::string>& country_by_id) {
  std::vector<std::string> out;
  std::vector<std::string> orphans;
  for (const auto& id : graph_ids) {
    auto it = country_by_id.find(id);
    if (it == country_by_id.end()) {
      orphans.push_back(id);
    } else {
      out.push_back(it->second);
    }
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o;
    throw ArgumentError("no place record for graph id(s): " + list);
  }
  return out;
}

}  // namespace streetvae
