#pragma once

#include <string>
#include <vector>

#include "streetvae/graph.hpp"

namespace streetvae::cli {

struct Series {
  std::string label;
  std::vector<double> values;
};

/// Vertical bars, one per category. `labels` may be shorter than `values`.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

/// Overlaid step histograms sharing one set of bin edges.
std::string svg_histogram(const std::string& title, const std::vector<double>& edges,
                          const std::vector<Series>& counts);

/// Polylines over x = 0..n-1 (or the given x values).
std::string svg_line_chart(const std::string& title, const std::vector<double>& x, const std::vector<Series>& ys);

/// Polar rose of 36 bearing bins, bin 0 pointing north.
std::string svg_orientation_rose(const std::string& title, const std::vector<double>& weights);

/// Straight-line drawing of a street graph, y up.
std::string svg_graph(const std::string& title, const StreetGraph& g);

}  // namespace streetvae::cli
