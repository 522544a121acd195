#include "streetvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "streetvae/error.hpp"

namespace streetvae {

namespace {

thread_local Tape* g_active_tape = nullptr;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMajor>;
using CMapM = Eigen::Map<const RowMajor>;

using ImplPtr = std::shared_ptr<Tensor::Impl>;

ImplPtr new_impl(std::size_t rows, std::size_t cols) {
  auto impl = std::make_shared<Tensor::Impl>();
  impl->rows = rows;
  impl->cols = cols;
  impl->data.assign(rows * cols, 0.0);
  return impl;
}

MapM map_data(Tensor::Impl& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}
CMapM cmap_data(const Tensor::Impl& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}
MapM map_grad(Tensor::Impl& t) {
  t.ensure_grad();
  return {t.grad.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)};
}

void require(const Tensor& t, const char* op) {
  if (!t.defined()) throw UsageError(std::string(op) + ": undefined tensor argument");
}

/// True when ops should record: a tape is active and some input needs grad.
bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void check_finite(const Tensor::Impl& out, const char* op) {
  for (double v : out.data) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite output");
  }
}

Tensor finish(ImplPtr out, const char* op, bool track) {
  check_finite(*out, op);
  out->requires_grad = track;
  return Tensor::wrap(std::move(out));
}

enum class Broadcast { same, scalar, row };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::same;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
  throw ShapeError(std::string(op) + ": cannot broadcast " + b.shape_string() + " to " + a.shape_string());
}

std::size_t bindex(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::same:
      return i;
    case Broadcast::scalar:
      return 0;
    case Broadcast::row:
      return i % cols;
  }
  return i;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  auto impl = new_impl(rows, cols);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  auto t = zeros(rows, cols, requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != rows * cols) {
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape [" +
                     std::to_string(rows) + ", " + std::to_string(cols) + "]");
  }
  auto impl = std::make_shared<Impl>();
  impl->rows = rows;
  impl->cols = cols;
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from(1, 1, {value}, requires_grad); }

Tensor Tensor::from_eigen(const Eigen::MatrixXd& m, bool requires_grad) {
  auto t = zeros(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), requires_grad);
  map_data(*t.impl_) = m;
  return t;
}

std::size_t Tensor::rows() const { return impl_ ? impl_->rows : 0; }
std::size_t Tensor::cols() const { return impl_ ? impl_->cols : 0; }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows()) + ", " + std::to_string(cols()) + "]";
}

std::span<double> Tensor::data() { return impl_->data; }
std::span<const double> Tensor::data() const { return impl_->data; }
double Tensor::at(std::size_t r, std::size_t c) const { return impl_->data.at(r * impl_->cols + c); }
double& Tensor::at(std::size_t r, std::size_t c) { return impl_->data.at(r * impl_->cols + c); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor " + shape_string() + " is not a scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

std::span<double> Tensor::grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

std::span<const double> Tensor::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Eigen::MatrixXd Tensor::to_eigen() const { return cmap_data(*impl_); }

Tensor Tensor::detached_copy() const { return from(rows(), cols(), impl_->data, false); }

// ---------------------------------------------------------------------------
// Tape

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::backward(Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward: loss must be a scalar, got " + loss.shape_string());
  }
  if (!loss.requires_grad()) {
    entries_.clear();
    throw UsageError("backward: loss is not connected to any parameter on the tape");
  }
  loss.grad()[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
  entries_.clear();
}

void backward(Tensor& loss) {
  if (g_active_tape == nullptr) throw UsageError("backward: no active tape");
  g_active_tape->backward(loss);
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a, "matmul");
  require(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " x " + b.shape_string());
  }
  auto out = new_impl(a.rows(), b.cols());
  map_data(*out).noalias() = cmap_data(*a.impl()) * cmap_data(*b.impl());
  const bool track = tracking({&a, &b});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([ai = a.impl(), bi = b.impl(), oi = out] {
      const CMapM g(oi->grad.data(), static_cast<Eigen::Index>(oi->rows), static_cast<Eigen::Index>(oi->cols));
      if (ai->requires_grad) map_grad(*ai).noalias() += g * cmap_data(*bi).transpose();
      if (bi->requires_grad) map_grad(*bi).noalias() += cmap_data(*ai).transpose() * g;
    });
  }
  return finish(out, "matmul", track);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a, "matmul_nt");
  require(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ, " + a.shape_string() + " x " + b.shape_string() + "^T");
  }
  auto out = new_impl(a.rows(), b.rows());
  map_data(*out).noalias() = cmap_data(*a.impl()) * cmap_data(*b.impl()).transpose();
  const bool track = tracking({&a, &b});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([ai = a.impl(), bi = b.impl(), oi = out] {
      const CMapM g(oi->grad.data(), static_cast<Eigen::Index>(oi->rows), static_cast<Eigen::Index>(oi->cols));
      if (ai->requires_grad) map_grad(*ai).noalias() += g * cmap_data(*bi);
      if (bi->requires_grad) map_grad(*bi).noalias() += g.transpose() * cmap_data(*ai);
    });
  }
  return finish(out, "matmul_nt", track);
}

Tensor transpose(const Tensor& a) {
  require(a, "transpose");
  auto out = new_impl(a.cols(), a.rows());
  map_data(*out) = cmap_data(*a.impl()).transpose();
  const bool track = tracking({&a});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([ai = a.impl(), oi = out] {
      const CMapM g(oi->grad.data(), static_cast<Eigen::Index>(oi->rows), static_cast<Eigen::Index>(oi->cols));
      map_grad(*ai) += g.transpose();
    });
  }
  return finish(out, "transpose", track);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

Tensor binary(const Tensor& a, const Tensor& b, bool multiply, double b_sign, const char* op) {
  require(a, op);
  require(b, op);
  const Broadcast kind = broadcast_kind(a, b, op);
  const std::size_t cols = a.cols();
  auto out = new_impl(a.rows(), a.cols());
  const auto& ad = a.impl()->data;
  const auto& bd = b.impl()->data;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double bv = bd[bindex(kind, i, cols)];
    out->data[i] = multiply ? ad[i] * bv : ad[i] + b_sign * bv;
  }
  const bool track = tracking({&a, &b});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([ai = a.impl(), bi = b.impl(), oi = out, kind, cols, multiply, b_sign] {
      const auto& g = oi->grad;
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          ai->grad[i] += multiply ? g[i] * bi->data[bindex(kind, i, cols)] : g[i];
        }
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          bi->grad[bindex(kind, i, cols)] += multiply ? g[i] * ai->data[i] : b_sign * g[i];
        }
      }
    });
  }
  return finish(out, op, track);
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  require(a, op);
  auto out = new_impl(a.rows(), a.cols());
  const auto& ad = a.impl()->data;
  for (std::size_t i = 0; i < ad.size(); ++i) out->data[i] = fwd(ad[i]);
  const bool track = tracking({&a});
  if (track) {
    out->ensure_grad();
    // deriv(x, y) receives the input and the output value.
    g_active_tape->record([ai = a.impl(), oi = out, deriv] {
      ai->ensure_grad();
      for (std::size_t i = 0; i < oi->grad.size(); ++i) {
        ai->grad[i] += oi->grad[i] * deriv(ai->data[i], oi->data[i]);
      }
    });
  }
  return finish(out, op, track);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, false, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, false, -1.0, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, true, 1.0, "mul"); }

Tensor scale(const Tensor& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  require(a, "log");
  for (double v : a.data()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive input " + std::to_string(v));
  }
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case ElementwiseOp::add:
      return add(a, b);
    case ElementwiseOp::mul:
      return mul(a, b);
    case ElementwiseOp::relu:
      return relu(a);
    case ElementwiseOp::sigmoid:
      return sigmoid(a);
    case ElementwiseOp::exp:
      return exp(a);
    case ElementwiseOp::log:
      return log(a);
  }
  throw UsageError("elementwise: unknown op");
}

// ---------------------------------------------------------------------------
// Reductions and reshaping

Tensor sum(const Tensor& a) {
  require(a, "sum");
  auto out = new_impl(1, 1);
  double s = 0.0;
  for (double v : a.data()) s += v;
  out->data[0] = s;
  const bool track = tracking({&a});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([ai = a.impl(), oi = out] {
      ai->ensure_grad();
      for (auto& g : ai->grad) g += oi->grad[0];
    });
  }
  return finish(out, "sum", track);
}

Tensor mean(const Tensor& a) {
  require(a, "mean");
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor gather_rows(const Tensor& table, std::span<const int> indices) {
  require(table, "gather_rows");
  const std::size_t cols = table.cols();
  auto out = new_impl(indices.size(), cols);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int idx = indices[r];
    if (idx < 0 || static_cast<std::size_t>(idx) >= table.rows()) {
      throw ArgumentError("gather_rows: index " + std::to_string(idx) + " outside table of " +
                          std::to_string(table.rows()) + " rows");
    }
    std::copy_n(table.impl()->data.begin() + static_cast<std::ptrdiff_t>(idx * cols), cols,
                out->data.begin() + static_cast<std::ptrdiff_t>(r * cols));
  }
  const bool track = tracking({&table});
  if (track) {
    out->ensure_grad();
    std::vector<int> idx(indices.begin(), indices.end());
    g_active_tape->record([ti = table.impl(), oi = out, idx = std::move(idx), cols] {
      ti->ensure_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t base = static_cast<std::size_t>(idx[r]) * cols;
        for (std::size_t c = 0; c < cols; ++c) ti->grad[base + c] += oi->grad[r * cols + c];
      }
    });
  }
  return finish(out, "gather_rows", track);
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require(a, "slice_cols");
  if (start + count > a.cols()) throw ShapeError("slice_cols: range exceeds " + a.shape_string());
  auto out = new_impl(a.rows(), count);
  map_data(*out) = cmap_data(*a.impl()).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count));
  const bool track = tracking({&a});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([ai = a.impl(), oi = out, start, count] {
      const CMapM g(oi->grad.data(), static_cast<Eigen::Index>(oi->rows), static_cast<Eigen::Index>(oi->cols));
      map_grad(*ai).middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) += g;
    });
  }
  return finish(out, "slice_cols", track);
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool track = false;
  for (const auto& p : parts) {
    require(p, "concat_cols");
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
    track = track || tracking({&p});
  }
  auto out = new_impl(rows, cols);
  std::vector<ImplPtr> impls;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    map_data(*out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(p.cols())) =
        cmap_data(*p.impl());
    offset += p.cols();
    impls.push_back(p.impl());
  }
  if (track) {
    out->ensure_grad();
    g_active_tape->record([impls = std::move(impls), oi = out] {
      const CMapM g(oi->grad.data(), static_cast<Eigen::Index>(oi->rows), static_cast<Eigen::Index>(oi->cols));
      std::size_t off = 0;
      for (const auto& pi : impls) {
        if (pi->requires_grad) {
          map_grad(*pi) += g.middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(pi->cols));
        }
        off += pi->cols;
      }
    });
  }
  return finish(out, "concat_cols", track);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool track = false;
  for (const auto& p : parts) {
    require(p, "concat_rows");
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
    track = track || tracking({&p});
  }
  auto out = new_impl(rows, cols);
  std::vector<ImplPtr> impls;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.impl()->data.begin(), p.impl()->data.end(), out->data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
    impls.push_back(p.impl());
  }
  if (track) {
    out->ensure_grad();
    g_active_tape->record([impls = std::move(impls), oi = out] {
      std::size_t off = 0;
      for (const auto& pi : impls) {
        const std::size_t n = pi->data.size();
        if (pi->requires_grad) {
          pi->ensure_grad();
          for (std::size_t i = 0; i < n; ++i) pi->grad[i] += oi->grad[off + i];
        }
        off += n;
      }
    });
  }
  return finish(out, "concat_rows", track);
}

// ---------------------------------------------------------------------------
// Fused ops

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require(x, "layer_norm");
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw ShapeError("layer_norm: gain/bias must be [1, " + std::to_string(cols) + "]");
  }
  auto out = new_impl(rows, cols);
  std::vector<double> xhat(rows * cols);
  std::vector<double> inv_std(rows);
  const auto& xd = x.impl()->data;
  const auto& gd = gain.impl()->data;
  const auto& bd = bias.impl()->data;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xd.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mu) * inv_std[r];
      xhat[r * cols + c] = h;
      out->data[r * cols + c] = h * gd[c] + bd[c];
    }
  }
  const bool track = tracking({&x, &gain, &bias});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([xi = x.impl(), gi = gain.impl(), bi = bias.impl(), oi = out, xhat = std::move(xhat),
                           inv_std = std::move(inv_std), rows, cols] {
      const auto& g = oi->grad;
      if (gi->requires_grad) gi->ensure_grad();
      if (bi->requires_grad) bi->ensure_grad();
      if (xi->requires_grad) xi->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double sum_dh = 0.0, sum_dh_h = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t k = r * cols + c;
          if (gi->requires_grad) gi->grad[c] += g[k] * xhat[k];
          if (bi->requires_grad) bi->grad[c] += g[k];
          const double dh = g[k] * gi->data[c];
          sum_dh += dh;
          sum_dh_h += dh * xhat[k];
        }
        if (!xi->requires_grad) continue;
        const double n = static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t k = r * cols + c;
          const double dh = g[k] * gi->data[c];
          xi->grad[k] += inv_std[r] * (dh - sum_dh / n - xhat[k] * sum_dh_h / n);
        }
      }
    });
  }
  return finish(out, "layer_norm", track);
}

Tensor causal_softmax(const Tensor& scores) {
  require(scores, "causal_softmax");
  const std::size_t rows = scores.rows(), cols = scores.cols();
  auto out = new_impl(rows, cols);
  const auto& sd = scores.impl()->data;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t visible = std::min(cols, r + 1);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < visible; ++c) mx = std::max(mx, sd[r * cols + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < visible; ++c) {
      const double e = std::exp(sd[r * cols + c] - mx);
      out->data[r * cols + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < visible; ++c) out->data[r * cols + c] /= z;
  }
  const bool track = tracking({&scores});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([si = scores.impl(), oi = out, rows, cols] {
      si->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t visible = std::min(cols, r + 1);
        double dot = 0.0;
        for (std::size_t c = 0; c < visible; ++c) dot += oi->grad[r * cols + c] * oi->data[r * cols + c];
        for (std::size_t c = 0; c < visible; ++c) {
          const std::size_t k = r * cols + c;
          si->grad[k] += oi->data[k] * (oi->grad[k] - dot);
        }
      }
    });
  }
  return finish(out, "causal_softmax", track);
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_index) {
  require(logits, "softmax_cross_entropy");
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  if (targets.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     logits.shape_string());
  }
  std::size_t count = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= vocab) {
      throw ArgumentError("softmax_cross_entropy: target " + std::to_string(t) + " outside vocabulary");
    }
    ++count;
  }
  if (count == 0) throw ArgumentError("softmax_cross_entropy: degenerate batch, every position ignored");

  const auto& ld = logits.impl()->data;
  std::vector<double> probs(rows * vocab, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == ignore_index) continue;
    const double* row = ld.data() + r * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) z += std::exp(row[c] - mx);
    const double log_z = std::log(z) + mx;
    for (std::size_t c = 0; c < vocab; ++c) probs[r * vocab + c] = std::exp(row[c] - log_z);
    total += log_z - row[static_cast<std::size_t>(targets[r])];
  }
  auto out = new_impl(1, 1);
  out->data[0] = total / static_cast<double>(count);
  const bool track = tracking({&logits});
  if (track) {
    out->ensure_grad();
    std::vector<int> tgt(targets.begin(), targets.end());
    g_active_tape->record([li = logits.impl(), oi = out, probs = std::move(probs), tgt = std::move(tgt), rows, vocab,
                           count, ignore_index] {
      li->ensure_grad();
      const double g = oi->grad[0] / static_cast<double>(count);
      for (std::size_t r = 0; r < rows; ++r) {
        if (tgt[r] == ignore_index) continue;
        for (std::size_t c = 0; c < vocab; ++c) li->grad[r * vocab + c] += g * probs[r * vocab + c];
        li->grad[r * vocab + static_cast<std::size_t>(tgt[r])] -= g;
      }
    });
  }
  return finish(out, "softmax_cross_entropy", track);
}

Tensor gaussian_kl(const Tensor& mu, const Tensor& log_var) {
  require(mu, "gaussian_kl");
  require(log_var, "gaussian_kl");
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols()) {
    throw ShapeError("gaussian_kl: mu " + mu.shape_string() + " vs log_var " + log_var.shape_string());
  }
  const double n = static_cast<double>(std::max<std::size_t>(mu.rows(), 1));
  const auto& md = mu.impl()->data;
  const auto& vd = log_var.impl()->data;
  double total = 0.0;
  for (std::size_t i = 0; i < md.size(); ++i) total += md[i] * md[i] + std::exp(vd[i]) - 1.0 - vd[i];
  auto out = new_impl(1, 1);
  out->data[0] = 0.5 * total / n;
  const bool track = tracking({&mu, &log_var});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([mi = mu.impl(), vi = log_var.impl(), oi = out, n] {
      const double g = oi->grad[0] / n;
      if (mi->requires_grad) {
        mi->ensure_grad();
        for (std::size_t i = 0; i < mi->data.size(); ++i) mi->grad[i] += g * mi->data[i];
      }
      if (vi->requires_grad) {
        vi->ensure_grad();
        for (std::size_t i = 0; i < vi->data.size(); ++i) vi->grad[i] += g * 0.5 * (std::exp(vi->data[i]) - 1.0);
      }
    });
  }
  return finish(out, "gaussian_kl", track);
}

Tensor weighted_bce_with_logits(const Tensor& logits, const Eigen::MatrixXd& targets, double pos_weight,
                                double norm) {
  require(logits, "weighted_bce_with_logits");
  if (static_cast<std::size_t>(targets.rows()) != logits.rows() ||
      static_cast<std::size_t>(targets.cols()) != logits.cols()) {
    throw ShapeError("weighted_bce_with_logits: targets do not match logits " + logits.shape_string());
  }
  const std::size_t rows = logits.rows(), cols = logits.cols();
  const double count = static_cast<double>(rows * cols);
  const auto& ld = logits.impl()->data;
  // -[w y log s(x) + (1-y) log(1-s(x))], with log s(x) = -softplus(-x).
  auto softplus = [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = ld[r * cols + c];
      const double y = targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      total += pos_weight * y * softplus(-x) + (1.0 - y) * softplus(x);
    }
  }
  auto out = new_impl(1, 1);
  out->data[0] = norm * total / count;
  const bool track = tracking({&logits});
  if (track) {
    out->ensure_grad();
    g_active_tape->record([li = logits.impl(), oi = out, targets, pos_weight, norm, rows, cols, count] {
      li->ensure_grad();
      const double g = oi->grad[0] * norm / count;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const std::size_t k = r * cols + c;
          const double x = li->data[k];
          const double y = targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
          const double s = stable_sigmoid(x);
          li->grad[k] += g * (-pos_weight * y * (1.0 - s) + (1.0 - y) * s);
        }
      }
    });
  }
  return finish(out, "weighted_bce_with_logits", track);
}

// ---------------------------------------------------------------------------
// Optimization

void zero_grads(ParamList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

void adam_step(ParamList& params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.size(), 0.0);
      state.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].tensor.size()) {
      throw ShapeError("adam_step: state shape mismatch for " + params[i].name);
    }
    if (!params[i].tensor.has_grad()) continue;
    for (double g : params[i].tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient for parameter " + params[i].name);
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].tensor;
    auto data = t.data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const bool has = t.has_grad();
    const std::span<const double> grad = has ? std::span<const double>(t.grad()) : std::span<const double>();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = has ? grad[k] : 0.0;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      data[k] -= config.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config.eps);
    }
  }
}

}  // namespace streetvae
