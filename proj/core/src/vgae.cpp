#include "streetvae/vgae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "json.hpp"
#include "streetvae/error.hpp"
#include "streetvae/stats.hpp"

namespace streetvae {

using ojson = nlohmann::ordered_json;

namespace {

Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-r, r);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = dist(rng);
  return Tensor::from(rows, cols, std::move(values), true);
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::MatrixXd eps(rows, cols);
  // Row-major draw order so the sample does not depend on storage layout.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) eps(i, j) = dist(rng);
  }
  return eps;
}

}  // namespace

void VgaeConfig::validate() const {
  if (in_dim <= 0 || hidden <= 0 || latent <= 0) {
    throw ArgumentError("vgae config: in_dim, hidden and latent must be > 0");
  }
}

VgaeModel::VgaeModel(const VgaeConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto in = static_cast<std::size_t>(config_.in_dim);
  const auto h = static_cast<std::size_t>(config_.hidden);
  const auto f = static_cast<std::size_t>(config_.latent);
  params_.push_back({"gcn.w0", glorot(in, h, rng)});
  params_.push_back({"gcn.w_mu", glorot(h, f, rng)});
  params_.push_back({"gcn.w_sigma", glorot(h, f, rng)});
}

Checkpoint VgaeModel::to_checkpoint() const {
  ojson meta{{"model", "vgae"}, {"in_dim", config_.in_dim}, {"hidden", config_.hidden}, {"latent", config_.latent}};
  Checkpoint ckpt;
  ckpt.meta_json = meta.dump();
  for (const auto& p : params_) ckpt.tensors.push_back({p.name, p.tensor.detached_copy()});
  return ckpt;
}

VgaeModel VgaeModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto meta = ojson::parse(ckpt.meta_json);
  if (meta.value("model", "") != "vgae") throw UsageError("checkpoint does not hold a vgae model");
  VgaeConfig c;
  c.in_dim = meta.at("in_dim").get<int>();
  c.hidden = meta.at("hidden").get<int>();
  c.latent = meta.at("latent").get<int>();
  VgaeModel model(c, 0);
  for (auto& p : model.params_) {
    const Tensor& src = ckpt.get(p.name);
    if (src.rows() != p.tensor.rows() || src.cols() != p.tensor.cols()) {
      throw ShapeError("checkpoint tensor " + p.name + " has shape " + src.shape_string() + ", expected " +
                       p.tensor.shape_string());
    }
    std::copy(src.data().begin(), src.data().end(), p.tensor.data().begin());
  }
  return model;
}

Posterior encode(const VgaeModel& model, const Tensor& a_norm, const Tensor& x) {
  if (a_norm.rows() != a_norm.cols() || a_norm.rows() != x.rows()) {
    throw ShapeError("vgae encode: adjacency " + a_norm.shape_string() + " does not match features " +
                     x.shape_string());
  }
  if (x.cols() != static_cast<std::size_t>(model.config().in_dim)) {
    throw ShapeError("vgae encode: feature width " + std::to_string(x.cols()) + ", expected " +
                     std::to_string(model.config().in_dim));
  }
  const Tensor h = relu(matmul(a_norm, matmul(x, model.w0())));
  const Tensor ah = matmul(a_norm, h);
  return {matmul(ah, model.w_mu()), matmul(ah, model.w_sigma())};
}

LatentSample reparameterize(const Tensor& mu, const Tensor& log_var, std::uint64_t seed) {
  return reparameterize(mu, log_var,
                        standard_normal(static_cast<Eigen::Index>(mu.rows()), static_cast<Eigen::Index>(mu.cols()), seed));
}

LatentSample reparameterize(const Tensor& mu, const Tensor& log_var, const Eigen::MatrixXd& epsilon) {
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols() ||
      static_cast<std::size_t>(epsilon.rows()) != mu.rows() || static_cast<std::size_t>(epsilon.cols()) != mu.cols()) {
    throw ShapeError("reparameterize: mu " + mu.shape_string() + ", log_var " + log_var.shape_string() +
                     " and epsilon shapes differ");
  }
  LatentSample s;
  s.mu = mu;
  s.log_var = log_var;
  s.epsilon = epsilon;
  s.z = add(mu, mul(exp(scale(log_var, 0.5)), Tensor::from_eigen(epsilon)));
  return s;
}

Tensor decode_logits(const Tensor& z) { return matmul_nt(z, z); }

Eigen::MatrixXd decode(const Tensor& z) {
  const Eigen::MatrixXd logits = z.to_eigen() * z.to_eigen().transpose();
  // Symmetric evaluation of the stable logistic.
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = i; j < logits.cols(); ++j) {
      const double l = logits(i, j);
      const double v = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
      p(i, j) = v;
      p(j, i) = v;
    }
  }
  return p;
}

LossWeights loss_weights(const Eigen::MatrixXd& a_raw) {
  const double n2 = static_cast<double>(a_raw.rows()) * static_cast<double>(a_raw.cols());
  const double s = a_raw.sum();
  if (!(s > 0.0) || !(s < n2)) {
    throw ArgumentError("vgae loss: degenerate graph (adjacency sum " + std::to_string(s) + " of " +
                        std::to_string(n2) + " entries)");
  }
  return {(n2 - s) / s, n2 / (2.0 * (n2 - s))};
}

ElboTerms elbo_loss(const Eigen::MatrixXd& a_raw, const Tensor& logits, const LatentSample& latent) {
  if (static_cast<std::size_t>(a_raw.rows()) != logits.rows() ||
      static_cast<std::size_t>(a_raw.cols()) != logits.cols()) {
    throw ShapeError("elbo_loss: adjacency and logits shapes differ");
  }
  const LossWeights w = loss_weights(a_raw);
  const Tensor recon = weighted_bce_with_logits(logits, a_raw, w.pos_weight, w.norm);
  // gaussian_kl is already per node; the second 1/N puts it on the per-entry
  // scale of the reconstruction mean.
  const Tensor kl = scale(gaussian_kl(latent.mu, latent.log_var), 1.0 / static_cast<double>(logits.rows()));
  ElboTerms out;
  out.reconstruction = recon.item();
  out.kl = kl.item();
  out.loss = add(recon, kl);
  return out;
}

// ---------------------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count, double train_fraction,
                                                                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ArgumentError("split: train fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
  if (count > 0) n_train = std::clamp<std::size_t>(n_train, 1, count);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

double edge_auc(const VgaeModel& model, const std::vector<VgaeGraph>& graphs, std::span<const std::size_t> indices) {
  double total = 0.0;
  int counted = 0;
  for (std::size_t gi : indices) {
    const auto& g = graphs.at(gi);
    const Posterior post = encode(model, Tensor::from_eigen(g.adjacency.normalized), Tensor::from_eigen(g.features));
    const Eigen::MatrixXd mu = post.mu.to_eigen();
    const Eigen::MatrixXd scores = mu * mu.transpose();
    std::vector<double> pos, neg;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < scores.cols(); ++j) {
        (g.adjacency.a(i, j) > 0.5 ? pos : neg).push_back(scores(i, j));
      }
    }
    if (pos.empty() || neg.empty()) continue;
    total += roc_auc(pos, neg);
    ++counted;
  }
  return counted == 0 ? std::numeric_limits<double>::quiet_NaN() : total / counted;
}

VgaeTrainResult train_vgae(VgaeModel& model, const std::vector<VgaeGraph>& corpus, const VgaeTrainConfig& config,
                           const std::function<void(const VgaeEpochStats&)>& on_epoch) {
  if (corpus.empty()) throw UsageError("train_vgae: empty corpus");
  if (config.epochs < 0) throw ArgumentError("train_vgae: epochs must be >= 0");
  for (const auto& g : corpus) {
    if (g.features.rows() != g.adjacency.size()) {
      throw ShapeError("train_vgae: graph " + g.id + " has mismatched features and adjacency");
    }
    if (g.features.cols() != model.config().in_dim) {
      throw ShapeError("train_vgae: graph " + g.id + " feature width " + std::to_string(g.features.cols()) +
                       ", expected " + std::to_string(model.config().in_dim));
    }
    loss_weights(g.adjacency.a);
  }

  VgaeTrainResult result;
  std::tie(result.train_indices, result.test_indices) = split_indices(corpus.size(), config.train_fraction, config.seed);

  // Ã X never changes, so the first propagation is computed once per graph.
  std::vector<Tensor> a_norm(corpus.size()), ax(corpus.size());
  for (std::size_t i : result.train_indices) {
    a_norm[i] = Tensor::from_eigen(corpus[i].adjacency.normalized);
    ax[i] = Tensor::from_eigen(corpus[i].adjacency.normalized * corpus[i].features);
  }

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState state;
  std::vector<std::size_t> order = result.train_indices;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t gi : order) {
      Tape tape;
      TapeScope scope(tape);
      zero_grads(model.params());
      const Tensor h = relu(matmul(ax[gi], model.w0()));
      const Tensor ah = matmul(a_norm[gi], h);
      const Tensor mu = matmul(ah, model.w_mu());
      const Tensor log_var = matmul(ah, model.w_sigma());
      ElboTerms terms;
      try {
        const LatentSample latent = reparameterize(mu, log_var, rng());
        terms = elbo_loss(corpus[gi].adjacency.a, decode_logits(latent.z), latent);
      } catch (const NumericError& e) {
        throw NumericError("vgae training: graph " + corpus[gi].id + ", epoch " + std::to_string(epoch) + ": " +
                           e.what());
      }
      const double value = terms.loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("vgae training: non-finite loss on graph " + corpus[gi].id);
      }
      tape.backward(terms.loss);
      adam_step(model.params(), state, config.adam);
      loss_sum += value;
    }
    VgaeEpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(order.size(), 1));
    stats.val_auc = edge_auc(model, corpus, result.test_indices);
    result.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

Eigen::MatrixXd vgae_features(const NodeModel& node_model, std::span<const int> tokens) {
  Eigen::MatrixXd x = node_embeddings(node_model, tokens);
  if (x.rows() > 0) x.rowwise() -= x.colwise().mean();
  return x;
}

VgaeGraph make_vgae_graph(const NodeModel& node_model, const StreetGraph& ordered_graph, std::span<const int> tokens,
                          std::string id) {
  VgaeGraph g;
  g.id = std::move(id);
  g.features = vgae_features(node_model, tokens);
  if (static_cast<std::size_t>(g.features.rows()) != ordered_graph.node_count()) {
    throw ArgumentError("graph " + g.id + ": token sequence has " + std::to_string(g.features.rows()) +
                        " nodes but the graph has " + std::to_string(ordered_graph.node_count()));
  }
  g.adjacency = normalize_adjacency(ordered_graph);
  return g;
}

// ---------------------------------------------------------------------------

GeneratedNetwork network_from_nodes(const NodeModel& node_model, const VgaeModel& vgae,
                                    std::vector<QuantizedPoint> nodes, const GenerateConfig& config,
                                    std::uint64_t seed) {
  // Repeated samples of one quantized position collapse into a single node.
  std::vector<QuantizedPoint> unique;
  for (const auto& q : nodes) {
    if (std::find(unique.begin(), unique.end(), q) == unique.end()) unique.push_back(q);
  }
  if (unique.size() < 2) {
    throw GenerationError("generate: " + std::to_string(unique.size()) + " distinct node(s) sampled, need at least 2");
  }
  GeneratedNetwork out;
  out.nodes = std::move(unique);
  const auto n = static_cast<Eigen::Index>(out.nodes.size());

  const TokenSeq tokens = flatten_sequence(out.nodes);
  const Eigen::MatrixXd features = vgae_features(node_model, tokens);
  const AdjacencyMatrix eye = AdjacencyMatrix::identity(n);
  const Posterior post = encode(vgae, Tensor::from_eigen(eye.normalized), Tensor::from_eigen(features));
  const LatentSample latent = reparameterize(post.mu, post.log_var, seed);
  out.probabilities = decode(latent.z);

  std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dULL);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  out.adjacency = Eigen::MatrixXi::Zero(n, n);
  const double extent = kGeneratedExtent * std::sqrt(2.0);
  std::vector<PointXY> coords;
  coords.reserve(out.nodes.size());
  for (const auto& q : out.nodes) coords.push_back(extent * dequantize(q));
  out.graph = StreetGraph(coords);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double p = out.probabilities(i, j);
      const bool keep = config.bernoulli ? uniform(rng) < p : p > config.threshold;
      if (!keep) continue;
      out.adjacency(i, j) = out.adjacency(j, i) = 1;
      out.graph.add_edge(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

GeneratedNetwork generate_network(const NodeModel& node_model, const VgaeModel& vgae, const GenerateConfig& config,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::uint64_t node_seed = rng();
  const std::uint64_t latent_seed = rng();
  return network_from_nodes(node_model, vgae, sample_nodes(node_model, config.sampling, node_seed), config,
                            latent_seed);
}

}  // namespace streetvae
