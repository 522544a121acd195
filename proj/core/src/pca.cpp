#include "streetvae/pca.hpp"

#include <string>

#include "streetvae/error.hpp"

namespace streetvae {

PcaModel pca_fit(const Eigen::MatrixXd& data, Eigen::Index d) {
  const Eigen::Index m = data.rows();
  const Eigen::Index dim = data.cols();
  if (m < 2) throw ArgumentError("pca_fit: need at least 2 rows");
  if (d < 1 || d > std::min(m, dim)) {
    throw ArgumentError("pca_fit: d = " + std::to_string(d) + " outside [1, " + std::to_string(std::min(m, dim)) +
                        "]");
  }
  if (!data.allFinite()) throw NumericError("pca_fit: non-finite input");
  PcaModel pca;
  pca.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - pca.mean;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  pca.components = svd.matrixV().leftCols(d).transpose();
  pca.explained_variance = sv.head(d).array().square() / static_cast<double>(m - 1);
  for (Eigen::Index i = 0; i < d; ++i) {
    Eigen::Index arg = 0;
    pca.components.row(i).cwiseAbs().maxCoeff(&arg);
    if (pca.components(i, arg) < 0.0) pca.components.row(i) *= -1.0;
  }
  return pca;
}

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& data) const {
  if (data.cols() != input_dim()) {
    throw ShapeError("pca transform: input width " + std::to_string(data.cols()) + ", expected " +
                     std::to_string(input_dim()));
  }
  return (data.rowwise() - mean) * components.transpose();
}

Eigen::MatrixXd PcaModel::inverse_transform(const Eigen::MatrixXd& projected) const {
  return (projected * components).rowwise() + mean;
}

Eigen::RowVectorXd pad_flatten(const Eigen::MatrixXd& mu, Eigen::Index n_cap) {
  if (mu.rows() > n_cap) {
    throw ArgumentError("graph has " + std::to_string(mu.rows()) + " nodes, capacity is " + std::to_string(n_cap));
  }
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(n_cap * mu.cols());
  for (Eigen::Index i = 0; i < mu.rows(); ++i) out.segment(i * mu.cols(), mu.cols()) = mu.row(i);
  return out;
}

Eigen::RowVectorXd graph_embedding(const Eigen::MatrixXd& mu, const PcaModel& pca, Eigen::Index n_cap) {
  return pca.transform(pad_flatten(mu, n_cap));
}

}  // namespace streetvae
