#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "streetvae/checkpoint.hpp"
#include "streetvae/geom.hpp"
#include "streetvae/graph.hpp"
#include "streetvae/tensor.hpp"

namespace streetvae {

/// How a node's feature row is formed from its two token states.
enum class NodeFeatureMode {
  mean_xy,       // mean of the x-token and y-token hidden states
  y_only,        // hidden state at the y token (it has seen both coordinates)
  concat_halves  // first half of the x state followed by first half of the y state
};

struct NodeModelConfig {
  int vocab = kVocabSize;
  int d_model = 128;
  int layers = 4;
  int heads = 8;
  int d_ff = 512;
  int max_nodes = 512;
  double dropout = 0.0;
  double init_std = 0.02;
  NodeFeatureMode feature_mode = NodeFeatureMode::mean_xy;

  int max_sequence() const { return 2 * max_nodes + 2; }
  /// Throws ArgumentError when a field is out of range.
  void validate() const;
};

/// Decoder-only transformer over quantized coordinate token sequences. Inputs
/// are the sum of value, vertex-position and coordinate-type embeddings; blocks
/// are pre-norm with causal multi-head attention.
class NodeModel {
 public:
  NodeModel(const NodeModelConfig& config, std::uint64_t seed);

  const NodeModelConfig& config() const { return config_; }
  ParamList& params() { return params_; }
  const ParamList& params() const { return params_; }

  Checkpoint to_checkpoint() const;
  static NodeModel from_checkpoint(const Checkpoint& ckpt);

 private:
  NodeModel() = default;

  NodeModelConfig config_;
  ParamList params_;
};

struct NodeForward {
  Tensor logits;  // [T, vocab]
  Tensor hidden;  // [T, d_model], final-layer (post layer norm) states
};

/// Runs the transformer over `tokens` (any prefix of a sequence, START first).
/// Throws ArgumentError for tokens outside the vocabulary or over-long inputs.
NodeForward forward_logits(const NodeModel& model, std::span<const int> tokens);

/// Mean next-token negative log-likelihood of tokens[1:] given prefixes, PAD
/// positions ignored. The sequence must begin with START and contain STOP.
Tensor nll_loss(const NodeModel& model, std::span<const int> tokens);

/// Token-weighted mean NLL over several sequences (one graph on the tape).
Tensor batch_nll_loss(const NodeModel& model, std::span<const TokenSeq> batch);

struct SamplingConfig {
  int max_nodes = 512;
  double temperature = 1.0;
  /// Take the most likely allowed token at every step (temperature unused).
  bool greedy = false;
};

/// Autoregressive sampling until STOP or 2*max_nodes coordinate tokens. A
/// trailing unpaired x token is dropped.
std::vector<QuantizedPoint> sample_nodes(const NodeModel& model, const SamplingConfig& config, std::uint64_t seed);

/// Per-node feature matrix [N, d_model] for a START-prefixed sequence.
Eigen::MatrixXd node_embeddings(const NodeModel& model, std::span<const int> tokens);

struct NodeTrainConfig {
  int epochs = 10;
  int batch_size = 8;
  AdamConfig adam{.lr = 1e-3};
  std::uint64_t seed = 0;
  /// Stop after this many optimizer steps (0 = no limit).
  long long max_steps = 0;
  /// Stop once a step's training loss drops below this value (0 = disabled).
  double target_loss = 0.0;
};

struct NodeEpochStats {
  int epoch = 0;
  long long steps = 0;
  double train_nll = 0.0;
  std::optional<double> val_nll;
};

struct NodeTrainResult {
  std::vector<NodeEpochStats> curve;
  long long steps = 0;
  double last_step_loss = 0.0;
};

/// Minibatch training on `train`; `val` (may be empty) is scored after each
/// epoch. `on_epoch` runs after each epoch (checkpointing). Non-finite loss
/// raises NumericError with the epoch and step.
NodeTrainResult train_node_model(NodeModel& model, std::span<const TokenSeq> train, std::span<const TokenSeq> val,
                                 const NodeTrainConfig& config,
                                 const std::function<void(const NodeEpochStats&)>& on_epoch = {});

/// Mean NLL per predicted token over a set of sequences, without a tape.
double evaluate_nll(const NodeModel& model, std::span<const TokenSeq> seqs);

}  // namespace streetvae
