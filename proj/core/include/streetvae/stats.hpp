#pragma once

#include <span>

namespace streetvae {

/// Area under the ROC curve: probability that a random positive scores above a
/// random negative, ties counting one half. Throws ArgumentError when either
/// set is empty.
double roc_auc(std::span<const double> positive_scores, std::span<const double> negative_scores);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

}  // namespace streetvae
