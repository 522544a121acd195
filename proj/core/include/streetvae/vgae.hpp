#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "streetvae/checkpoint.hpp"
#include "streetvae/graph.hpp"
#include "streetvae/nodemodel.hpp"
#include "streetvae/tensor.hpp"

namespace streetvae {

struct VgaeConfig {
  int in_dim = 128;
  int hidden = 64;
  int latent = 16;

  void validate() const;
};

/// GCN encoder weights: shared layer W0 [in, hidden], mean head W_mu and
/// log-variance head W_sigma [hidden, latent].
class VgaeModel {
 public:
  VgaeModel(const VgaeConfig& config, std::uint64_t seed);

  const VgaeConfig& config() const { return config_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }
  const Tensor& w0() const { return params_[0].tensor; }
  const Tensor& w_mu() const { return params_[1].tensor; }
  const Tensor& w_sigma() const { return params_[2].tensor; }

  Checkpoint to_checkpoint() const;
  static VgaeModel from_checkpoint(const Checkpoint& ckpt);

 private:
  VgaeConfig config_;
  ParamList params_;
};

struct Posterior {
  Tensor mu;       // [N, latent]
  Tensor log_var;  // [N, latent]
};

/// H = relu(Ã X W0); mu = Ã H W_mu; log_var = Ã H W_sigma. `a_norm` is the
/// normalized adjacency with self-loops. Throws ShapeError on mismatched widths.
Posterior encode(const VgaeModel& model, const Tensor& a_norm, const Tensor& x);

struct LatentSample {
  Tensor mu;
  Tensor log_var;
  Eigen::MatrixXd epsilon;
  Tensor z;
};

/// Z = mu + exp(log_var / 2) * epsilon with epsilon drawn from a seeded
/// standard normal.
LatentSample reparameterize(const Tensor& mu, const Tensor& log_var, std::uint64_t seed);
/// Same with a given epsilon (replay).
LatentSample reparameterize(const Tensor& mu, const Tensor& log_var, const Eigen::MatrixXd& epsilon);

/// Inner-product logits Z Z^T.
Tensor decode_logits(const Tensor& z);
/// sigmoid(Z Z^T).
Eigen::MatrixXd decode(const Tensor& z);

struct LossWeights {
  double pos_weight = 1.0;
  double norm = 1.0;
};

/// pos_weight = (N^2 - sum A) / sum A and norm = N^2 / (2 (N^2 - sum A)) for
/// an adjacency with self-loops. Throws ArgumentError when A is all zeros or
/// all ones.
LossWeights loss_weights(const Eigen::MatrixXd& a_raw);

struct ElboTerms {
  Tensor loss;            // reconstruction + kl
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// Negative ELBO: weighted binary cross-entropy of the logits against A
/// (norm times the mean over all N^2 entries) plus the Gaussian KL divided by N.
ElboTerms elbo_loss(const Eigen::MatrixXd& a_raw, const Tensor& logits, const LatentSample& latent);

/// One graph of a VGAE corpus.
struct VgaeGraph {
  std::string id;
  AdjacencyMatrix adjacency;
  Eigen::MatrixXd features;  // [N, in_dim]
};

struct VgaeTrainConfig {
  int epochs = 200;
  AdamConfig adam{.lr = 1e-2};
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

struct VgaeEpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;  // NaN when no held-out graph has both classes
};

struct VgaeTrainResult {
  std::vector<VgaeEpochStats> curve;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Seeded split of `corpus` into train/held-out parts; each epoch does one
/// full-batch Adam step per training graph, then scores held-out edge AUC.
/// Throws NumericError naming the graph when the loss is not finite.
VgaeTrainResult train_vgae(VgaeModel& model, const std::vector<VgaeGraph>& corpus, const VgaeTrainConfig& config,
                           const std::function<void(const VgaeEpochStats&)>& on_epoch = {});

/// Indices of the seeded train/held-out split used by train_vgae.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double train_fraction,
                                                                            std::uint64_t seed);

/// Mean over graphs of the AUC of mu mu^T scores for edges versus non-edges
/// (pairs i < j). Graphs lacking either class are skipped; NaN when none remain.
double edge_auc(const VgaeModel& model, const std::vector<VgaeGraph>& graphs, std::span<const std::size_t> indices);

/// Node-model embeddings with each column centred over the graph's nodes. The
/// shared offset otherwise dominates every inner product in the decoder.
Eigen::MatrixXd vgae_features(const NodeModel& node_model, std::span<const int> tokens);

/// Adjacency of `ordered_graph` paired with node-model features computed from
/// its token sequence. Throws ArgumentError when the node counts disagree.
VgaeGraph make_vgae_graph(const NodeModel& node_model, const StreetGraph& ordered_graph, std::span<const int> tokens,
                          std::string id);

// ---------------------------------------------------------------------------
// Generation

/// Side length in meters of the square that generated coordinates span.
inline constexpr double kGeneratedExtent = 1000.0;

struct GenerateConfig {
  SamplingConfig sampling;
  double threshold = 0.5;
  /// Draw each edge from Bernoulli(A'_ij) instead of thresholding.
  bool bernoulli = false;
};

struct GeneratedNetwork {
  std::vector<QuantizedPoint> nodes;
  Eigen::MatrixXd probabilities;
  Eigen::MatrixXi adjacency;  // symmetric, zero diagonal
  StreetGraph graph;          // meters, centered on the origin
};

/// Samples nodes, embeds them, encodes with the self-loop-only adjacency,
/// reparameterizes, decodes and keeps edges (i < j) with A'_ij > threshold.
/// Throws GenerationError when fewer than two nodes are sampled.
GeneratedNetwork generate_network(const NodeModel& node_model, const VgaeModel& vgae, const GenerateConfig& config,
                                  std::uint64_t seed);

/// The decoding step of generate_network for given nodes.
GeneratedNetwork network_from_nodes(const NodeModel& node_model, const VgaeModel& vgae,
                                    std::vector<QuantizedPoint> nodes, const GenerateConfig& config,
                                    std::uint64_t seed);

}  // namespace streetvae
