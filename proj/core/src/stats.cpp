#include "streetvae/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "streetvae/error.hpp"

namespace streetvae {

double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  if (positive_scores.empty() || negative_scores.empty()) {
    throw ArgumentError("roc_auc: need at least one positive and one negative score");
  }
  // Mann-Whitney U from midranks of the pooled sample.
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positive_scores.size() + negative_scores.size());
  for (double s : positive_scores) items.push_back({s, true});
  for (double s : negative_scores) items.push_back({s, false});
  for (const auto& it : items) {
    if (!std::isfinite(it.score)) throw NumericError("roc_auc: non-finite score");
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].positive) rank_sum += midrank;
    }
    i = j;
  }
  const auto np = static_cast<double>(positive_scores.size());
  const auto nn = static_cast<double>(negative_scores.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("ks_statistic: both samples must be non-empty");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    const double fa = static_cast<double>(i) / static_cast<double>(x.size());
    const double fb = static_cast<double>(j) / static_cast<double>(y.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace streetvae
