#pragma once

// Dense float64 matrices with define-by-run reverse-mode differentiation.
//
// Every tensor is a matrix (scalars are 1x1). Operations executed while a Tape
// is active, and with at least one input that requires a gradient, append a
// backward closure to that tape; Tape::backward replays them in reverse.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace streetvae {

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_eigen(const Eigen::MatrixXd& m, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return rows() * cols(); }
  std::vector<std::size_t> shape() const { return {rows(), cols()}; }
  std::string shape_string() const;

  std::span<double> data();
  std::span<const double> data() const;
  double at(std::size_t r, std::size_t c) const;
  double& at(std::size_t r, std::size_t c);
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer (allocated and zero-filled on first access).
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  Eigen::MatrixXd to_eigen() const;
  /// Deep copy without gradient state or tape history.
  Tensor detached_copy() const;

  struct Impl;
  const std::shared_ptr<Impl>& impl() const { return impl_; }
  static Tensor wrap(std::shared_ptr<Impl> impl) { return Tensor(std::move(impl)); }

 private:
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<Impl> impl_;
};

struct Tensor::Impl {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Ordered record of executed differentiable ops.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure once in reverse
  /// order, accumulating into leaf gradients. Clears the tape afterwards.
  /// Throws UsageError unless `loss` is 1x1.
  void backward(Tensor& loss);

  /// Tape that ops currently record onto, or nullptr.
  static Tape* active();

 private:
  std::vector<std::function<void()>> entries_;
};

/// Makes `tape` the active tape for the current thread for the scope lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Runs backward on the active tape.
void backward(Tensor& loss);

// ---------------------------------------------------------------------------
// Operations. Non-finite results raise NumericError naming the op.

Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

enum class ElementwiseOp { add, mul, relu, sigmoid, exp, log };

/// Binary ops broadcast `b` when it is 1x1 or a 1xC row vector.
Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Rows of `table` selected by `indices` (embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const int> indices);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);

/// Row-wise layer normalization followed by a 1xC gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Row-wise softmax where entry (i, j) with j > i is masked out.
Tensor causal_softmax(const Tensor& scores);

/// Mean over non-ignored rows of -log softmax(logits)[target].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index);

/// KL[N(mu, exp(log_var)) || N(0, I)] summed over entries and divided by rows.
Tensor gaussian_kl(const Tensor& mu, const Tensor& log_var);

/// norm * mean_ij w_ij * BCE(sigmoid(logits_ij), targets_ij), w = pos_weight
/// on positive targets and 1 elsewhere. Evaluated stably from the logits.
Tensor weighted_bce_with_logits(const Tensor& logits, const Eigen::MatrixXd& targets, double pos_weight,
                                double norm);

// ---------------------------------------------------------------------------
// Parameters and optimization

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

void zero_grads(ParamList& params);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long long step = 0;
};

/// One bias-corrected adaptive-moment update using each parameter's gradient.
/// Throws NumericError naming a parameter whose gradient is not finite; no
/// parameter is modified in that case.
void adam_step(ParamList& params, AdamState& state, const AdamConfig& config);

}  // namespace streetvae
