#pragma once

#include <Eigen/Dense>

namespace streetvae {

struct PcaModel {
  Eigen::RowVectorXd mean;            // [D]
  Eigen::MatrixXd components;         // [d, D], orthonormal rows
  Eigen::VectorXd explained_variance; // [d], non-increasing

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return components.rows(); }
  Eigen::MatrixXd transform(const Eigen::MatrixXd& data) const;
  Eigen::MatrixXd inverse_transform(const Eigen::MatrixXd& projected) const;
};

/// Top-d principal axes of `data` [M, D]. Each component's sign is fixed so
/// that its largest-magnitude entry is positive. Throws ArgumentError unless
/// M >= 2 and 1 <= d <= min(M, D).
PcaModel pca_fit(const Eigen::MatrixXd& data, Eigen::Index d);

/// mu [N, F] padded with zero rows to n_cap and flattened row-major.
/// Throws ArgumentError when N > n_cap.
Eigen::RowVectorXd pad_flatten(const Eigen::MatrixXd& mu, Eigen::Index n_cap);

/// pca.transform(pad_flatten(mu, n_cap)).
Eigen::RowVectorXd graph_embedding(const Eigen::MatrixXd& mu, const PcaModel& pca, Eigen::Index n_cap);

}  // namespace streetvae
