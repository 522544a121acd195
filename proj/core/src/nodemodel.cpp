#include "streetvae/nodemodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "streetvae/error.hpp"

namespace streetvae {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::size_t kPerLayer = 12;

enum LayerParam : std::size_t {
  kLn1Gain,
  kLn1Bias,
  kWq,
  kWk,
  kWv,
  kWo,
  kLn2Gain,
  kLn2Bias,
  kW1,
  kB1,
  kW2,
  kB2,
};

constexpr std::size_t kValueEmb = 0;
constexpr std::size_t kPositionEmb = 1;
constexpr std::size_t kCoordEmb = 2;

std::size_t layer_index(int layer, LayerParam p) { return 3 + static_cast<std::size_t>(layer) * kPerLayer + p; }
std::size_t final_index(const NodeModelConfig& c, std::size_t k) {
  return 3 + static_cast<std::size_t>(c.layers) * kPerLayer + k;
}

std::string feature_mode_name(NodeFeatureMode m) {
  switch (m) {
    case NodeFeatureMode::mean_xy:
      return "mean_xy";
    case NodeFeatureMode::y_only:
      return "y_only";
    case NodeFeatureMode::concat_halves:
      return "concat_halves";
  }
  return "mean_xy";
}

NodeFeatureMode feature_mode_from(const std::string& s) {
  if (s == "mean_xy") return NodeFeatureMode::mean_xy;
  if (s == "y_only") return NodeFeatureMode::y_only;
  if (s == "concat_halves") return NodeFeatureMode::concat_halves;
  throw ParseError("node model checkpoint: unknown feature mode '" + s + "'", 0);
}

Tensor normal_tensor(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = dist(rng);
  return Tensor::from(rows, cols, std::move(values), true);
}

/// Vertex index and coordinate slot (0 = x, 1 = y, -1 = START) of token t.
int vertex_of(std::size_t t) { return t == 0 ? 0 : static_cast<int>((t - 1) / 2); }
int coord_of(std::size_t t) { return t == 0 ? -1 : static_cast<int>((t - 1) % 2); }

void check_tokens(const NodeModelConfig& c, std::span<const int> tokens) {
  if (tokens.empty()) throw ArgumentError("node model: empty token sequence");
  if (tokens.size() > static_cast<std::size_t>(c.max_sequence())) {
    throw ArgumentError("node model: sequence of " + std::to_string(tokens.size()) + " tokens exceeds maximum " +
                        std::to_string(c.max_sequence()));
  }
  for (int t : tokens) {
    if (t < 0 || t >= c.vocab) throw ArgumentError("node model: token " + std::to_string(t) + " outside vocabulary");
  }
}

}  // namespace

void NodeModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ArgumentError("node model config: " + m); };
  if (vocab != kVocabSize) fail("vocab must be " + std::to_string(kVocabSize));
  if (d_model <= 0 || heads <= 0 || d_model % heads != 0) fail("d_model must be a positive multiple of heads");
  if (layers <= 0) fail("layers must be > 0");
  if (d_ff <= 0) fail("d_ff must be > 0");
  if (max_nodes <= 0) fail("max_nodes must be > 0");
  if (dropout != 0.0) fail("dropout is not supported (must be 0)");
  if (!(init_std > 0.0)) fail("init_std must be > 0");
}

NodeModel::NodeModel(const NodeModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto ff = static_cast<std::size_t>(config_.d_ff);
  const double s = config_.init_std;
  const double out_s = s / std::sqrt(2.0 * config_.layers);

  params_.push_back({"value_embedding", normal_tensor(static_cast<std::size_t>(config_.vocab), d, s, rng)});
  params_.push_back(
      {"position_embedding", normal_tensor(static_cast<std::size_t>(config_.max_nodes) + 1, d, s, rng)});
  params_.push_back({"coord_embedding", normal_tensor(2, d, s, rng)});
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    params_.push_back({p + "ln1.gain", Tensor::full(1, d, 1.0, true)});
    params_.push_back({p + "ln1.bias", Tensor::zeros(1, d, true)});
    params_.push_back({p + "attn.wq", normal_tensor(d, d, s, rng)});
    params_.push_back({p + "attn.wk", normal_tensor(d, d, s, rng)});
    params_.push_back({p + "attn.wv", normal_tensor(d, d, s, rng)});
    params_.push_back({p + "attn.wo", normal_tensor(d, d, out_s, rng)});
    params_.push_back({p + "ln2.gain", Tensor::full(1, d, 1.0, true)});
    params_.push_back({p + "ln2.bias", Tensor::zeros(1, d, true)});
    params_.push_back({p + "ff.w1", normal_tensor(d, ff, s, rng)});
    params_.push_back({p + "ff.b1", Tensor::zeros(1, ff, true)});
    params_.push_back({p + "ff.w2", normal_tensor(ff, d, out_s, rng)});
    params_.push_back({p + "ff.b2", Tensor::zeros(1, d, true)});
  }
  params_.push_back({"final_ln.gain", Tensor::full(1, d, 1.0, true)});
  params_.push_back({"final_ln.bias", Tensor::zeros(1, d, true)});
  // Zero head: an untrained model predicts the uniform distribution.
  params_.push_back({"head.weight", Tensor::zeros(d, static_cast<std::size_t>(config_.vocab), true)});
  params_.push_back({"head.bias", Tensor::zeros(1, static_cast<std::size_t>(config_.vocab), true)});
}

Checkpoint NodeModel::to_checkpoint() const {
  ojson meta{{"model", "node"},
             {"vocab", config_.vocab},
             {"d_model", config_.d_model},
             {"layers", config_.layers},
             {"heads", config_.heads},
             {"d_ff", config_.d_ff},
             {"max_nodes", config_.max_nodes},
             {"dropout", config_.dropout},
             {"init_std", config_.init_std},
             {"feature_mode", feature_mode_name(config_.feature_mode)}};
  Checkpoint ckpt;
  ckpt.meta_json = meta.dump();
  for (const auto& p : params_) ckpt.tensors.push_back({p.name, p.tensor.detached_copy()});
  return ckpt;
}

NodeModel NodeModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto meta = ojson::parse(ckpt.meta_json);
  if (meta.value("model", "") != "node") throw UsageError("checkpoint does not hold a node model");
  NodeModelConfig c;
  c.vocab = meta.at("vocab").get<int>();
  c.d_model = meta.at("d_model").get<int>();
  c.layers = meta.at("layers").get<int>();
  c.heads = meta.at("heads").get<int>();
  c.d_ff = meta.at("d_ff").get<int>();
  c.max_nodes = meta.at("max_nodes").get<int>();
  c.dropout = meta.at("dropout").get<double>();
  c.init_std = meta.at("init_std").get<double>();
  c.feature_mode = feature_mode_from(meta.at("feature_mode").get<std::string>());
  NodeModel model(c, 0);
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

// ---------------------------------------------------------------------------

NodeForward forward_logits(const NodeModel& model, std::span<const int> tokens) {
  const auto& c = model.config();
  check_tokens(c, tokens);
  const auto& P = model.params();
  const std::size_t T = tokens.size();
  const auto d = static_cast<std::size_t>(c.d_model);
  const std::size_t dh = d / static_cast<std::size_t>(c.heads);
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<int> positions(T);
  std::vector<int> coords;
  coords.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    positions[t] = vertex_of(t);
    if (coord_of(t) >= 0) coords.push_back(coord_of(t));
  }
  Tensor x = add(gather_rows(P[kValueEmb].tensor, tokens), gather_rows(P[kPositionEmb].tensor, positions));
  if (!coords.empty()) {
    // START carries no coordinate-type embedding.
    const Tensor start_row = Tensor::zeros(1, d);
    const Tensor parts[] = {start_row, gather_rows(P[kCoordEmb].tensor, coords)};
    x = add(x, concat_rows(parts));
  }

  for (int l = 0; l < c.layers; ++l) {
    auto W = [&](LayerParam p) -> const Tensor& { return P[layer_index(l, p)].tensor; };
    const Tensor h = layer_norm(x, W(kLn1Gain), W(kLn1Bias));
    const Tensor q = matmul(h, W(kWq));
    const Tensor k = matmul(h, W(kWk));
    const Tensor v = matmul(h, W(kWv));
    std::vector<Tensor> heads;
    heads.reserve(static_cast<std::size_t>(c.heads));
    for (int hd = 0; hd < c.heads; ++hd) {
      const std::size_t off = static_cast<std::size_t>(hd) * dh;
      const Tensor scores = scale(matmul_nt(slice_cols(q, off, dh), slice_cols(k, off, dh)), attn_scale);
      heads.push_back(matmul(causal_softmax(scores), slice_cols(v, off, dh)));
    }
    x = add(x, matmul(concat_cols(heads), W(kWo)));
    const Tensor h2 = layer_norm(x, W(kLn2Gain), W(kLn2Bias));
    const Tensor f = add(matmul(relu(add(matmul(h2, W(kW1)), W(kB1))), W(kW2)), W(kB2));
    x = add(x, f);
  }

  NodeForward out;
  out.hidden = layer_norm(x, P[final_index(c, 0)].tensor, P[final_index(c, 1)].tensor);
  out.logits = add(matmul(out.hidden, P[final_index(c, 2)].tensor), P[final_index(c, 3)].tensor);
  (void)T;
  return out;
}

namespace {

void check_sequence(std::span<const int> tokens) {
  if (tokens.size() < 2 || tokens.front() != kTokenStart) {
    throw ArgumentError("node model: sequence must begin with START");
  }
  if (std::find(tokens.begin(), tokens.end(), kTokenStop) == tokens.end()) {
    throw ArgumentError("node model: sequence has no STOP token");
  }
}

}  // namespace

Tensor nll_loss(const NodeModel& model, std::span<const int> tokens) {
  check_sequence(tokens);
  const auto fwd = forward_logits(model, tokens.first(tokens.size() - 1));
  return softmax_cross_entropy(fwd.logits, tokens.subspan(1), kTokenPad);
}

Tensor batch_nll_loss(const NodeModel& model, std::span<const TokenSeq> batch) {
  if (batch.empty()) throw ArgumentError("batch_nll_loss: empty batch");
  std::vector<Tensor> logits;
  std::vector<int> targets;
  logits.reserve(batch.size());
  for (const auto& seq : batch) {
    check_sequence(seq);
    const std::span<const int> s(seq);
    logits.push_back(forward_logits(model, s.first(s.size() - 1)).logits);
    targets.insert(targets.end(), s.begin() + 1, s.end());
  }
  return softmax_cross_entropy(batch.size() == 1 ? logits.front() : concat_rows(logits), targets, kTokenPad);
}

double evaluate_nll(const NodeModel& model, std::span<const TokenSeq> seqs) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : seqs) {
    const std::size_t n = static_cast<std::size_t>(
        std::count_if(seq.begin() + 1, seq.end(), [](int t) { return t != kTokenPad; }));
    total += nll_loss(model, seq).item() * static_cast<double>(n);
    count += n;
  }
  if (count == 0) throw ArgumentError("evaluate_nll: no tokens to score");
  return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------

std::vector<QuantizedPoint> sample_nodes(const NodeModel& model, const SamplingConfig& config, std::uint64_t seed) {
  if (!config.greedy && !(config.temperature > 0.0)) throw ArgumentError("sample_nodes: temperature must be > 0");
  if (config.max_nodes <= 0) throw ArgumentError("sample_nodes: max_nodes must be > 0");
  const int limit = std::min(config.max_nodes, model.config().max_nodes);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  TokenSeq tokens{kTokenStart};
  std::vector<int> values;
  std::vector<double> logits(static_cast<std::size_t>(model.config().vocab));
  while (values.size() < static_cast<std::size_t>(2 * limit)) {
    const auto fwd = forward_logits(model, tokens);
    const auto row = fwd.logits.data().subspan((tokens.size() - 1) * logits.size(), logits.size());
    // Only coordinate values and STOP may be emitted.
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v <= static_cast<std::size_t>(kTokenStop); ++v) {
      logits[v] = config.greedy ? row[v] : row[v] / config.temperature;
      mx = std::max(mx, logits[v]);
    }
    double z = 0.0;
    std::vector<double> p(static_cast<std::size_t>(kTokenStop) + 1);
    for (std::size_t v = 0; v < p.size(); ++v) {
      p[v] = std::exp(logits[v] - mx);
      z += p[v];
    }
    // Mass left for START/PAD at the raw temperature decides degeneracy.
    double raw_mx = -std::numeric_limits<double>::infinity();
    for (double r : row) raw_mx = std::max(raw_mx, r);
    double raw_allowed = 0.0, raw_total = 0.0;
    for (std::size_t v = 0; v < row.size(); ++v) {
      const double e = std::exp(row[v] - raw_mx);
      raw_total += e;
      if (v <= static_cast<std::size_t>(kTokenStop)) raw_allowed += e;
    }
    if (!(raw_allowed / raw_total > 1e-12) || !std::isfinite(z) || z <= 0.0) {
      throw GenerationError("sample_nodes: model puts no probability on coordinate or STOP tokens");
    }
    int chosen = kTokenStop;
    if (config.greedy) {
      chosen = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    } else {
      const double u = uniform(rng) * z;
      double acc = 0.0;
      for (std::size_t v = 0; v < p.size(); ++v) {
        acc += p[v];
        if (u < acc) {
          chosen = static_cast<int>(v);
          break;
        }
      }
    }
    if (chosen == kTokenStop) break;
    values.push_back(chosen);
    tokens.push_back(chosen);
  }
  if (values.size() % 2 != 0) values.pop_back();
  std::vector<QuantizedPoint> out;
  out.reserve(values.size() / 2);
  for (std::size_t i = 0; i < values.size(); i += 2) {
    out.push_back({static_cast<std::uint8_t>(values[i]), static_cast<std::uint8_t>(values[i + 1])});
  }
  return out;
}

Eigen::MatrixXd node_embeddings(const NodeModel& model, std::span<const int> tokens) {
  if (tokens.empty() || tokens.front() != kTokenStart) {
    throw ArgumentError("node_embeddings: sequence must begin with START");
  }
  std::size_t body = 0;
  while (1 + body < tokens.size() && tokens[1 + body] < kQuantBins) ++body;
  const std::size_t n = body / 2;
  const auto d = static_cast<Eigen::Index>(model.config().d_model);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  if (n == 0) return out;

  const auto fwd = forward_logits(model, tokens.first(1 + 2 * n));
  const Eigen::MatrixXd h = fwd.hidden.to_eigen();
  for (std::size_t i = 0; i < n; ++i) {
    const auto xr = static_cast<Eigen::Index>(2 * i + 1);
    const auto yr = static_cast<Eigen::Index>(2 * i + 2);
    const auto row = static_cast<Eigen::Index>(i);
    switch (model.config().feature_mode) {
      case NodeFeatureMode::mean_xy:
        out.row(row) = 0.5 * (h.row(xr) + h.row(yr));
        break;
      case NodeFeatureMode::y_only:
        out.row(row) = h.row(yr);
        break;
      case NodeFeatureMode::concat_halves: {
        const Eigen::Index half = d / 2;
        out.row(row).head(half) = h.row(xr).head(half);
        out.row(row).tail(d - half) = h.row(yr).head(d - half);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

NodeTrainResult train_node_model(NodeModel& model, std::span<const TokenSeq> train, std::span<const TokenSeq> val,
                                 const NodeTrainConfig& config,
                                 const std::function<void(const NodeEpochStats&)>& on_epoch) {
  if (train.empty()) throw UsageError("train_node_model: empty training corpus");
  if (config.batch_size <= 0) throw ArgumentError("train_node_model: batch_size must be > 0");
  for (const auto& seq : train) {
    check_sequence(seq);
    check_tokens(model.config(), seq);
  }

  std::mt19937_64 rng(config.seed);
  AdamState state;
  NodeTrainResult result;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  bool stop = false;

  for (int epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double weighted = 0.0;
    std::size_t tokens_seen = 0;
    for (std::size_t start = 0; start < order.size() && !stop; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<TokenSeq> batch;
      std::size_t n_tokens = 0;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train[order[i]]);
        n_tokens += static_cast<std::size_t>(
            std::count_if(batch.back().begin() + 1, batch.back().end(), [](int t) { return t != kTokenPad; }));
      }

      Tape tape;
      TapeScope scope(tape);
      zero_grads(model.params());
      Tensor loss;
      try {
        loss = batch_nll_loss(model, batch);
      } catch (const NumericError& e) {
        throw NumericError("node model training: epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(result.steps + 1) + ": " + e.what());
      }
      const double value = loss.item();
      tape.backward(loss);
      adam_step(model.params(), state, config.adam);
      ++result.steps;
      result.last_step_loss = value;
      weighted += value * static_cast<double>(n_tokens);
      tokens_seen += n_tokens;
      if (config.max_steps > 0 && result.steps >= config.max_steps) stop = true;
      if (config.target_loss > 0.0 && value < config.target_loss) stop = true;
    }
    NodeEpochStats stats;
    stats.epoch = epoch;
    stats.steps = result.steps;
    stats.train_nll = weighted / static_cast<double>(std::max<std::size_t>(tokens_seen, 1));
    if (!val.empty()) stats.val_nll = evaluate_nll(model, val);
    result.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace streetvae
