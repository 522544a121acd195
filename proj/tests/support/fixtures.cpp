#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace streetvae::testing {

StreetGraph grid_graph(int rows, int cols, double spacing) {
  StreetGraph g;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) g.add_node({c * spacing, r * spacing});
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int id = r * cols + c;
      if (c + 1 < cols) g.add_edge(id, id + 1);
      if (r + 1 < rows) g.add_edge(id, id + cols);
    }
  }
  return g;
}

bool is_connected(const StreetGraph& g) {
  const auto n = g.node_count();
  if (n == 0) return true;
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : g.edges()) {
    adj[static_cast<std::size_t>(e.u)].push_back(e.v);
    adj[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  std::vector<bool> seen(n, false);
  std::vector<int> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

StreetGraph perturbed_grid(std::mt19937_64& rng, int rows, int cols, double spacing, double jitter,
                           double delete_fraction) {
  std::uniform_real_distribution<double> j(-jitter, jitter);
  std::vector<PointXY> nodes;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) nodes.push_back({c * spacing + j(rng), r * spacing + j(rng)});
  }
  const StreetGraph full = [&] {
    StreetGraph g(nodes);
    const StreetGraph base = grid_graph(rows, cols, spacing);
    for (const auto& e : base.edges()) g.add_edge(e.u, e.v);
    return g;
  }();

  std::vector<std::size_t> order(full.edge_count());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> removed(full.edge_count(), false);
  const auto target = static_cast<std::size_t>(delete_fraction * static_cast<double>(full.edge_count()));
  std::size_t done = 0;
  for (std::size_t idx : order) {
    if (done >= target) break;
    removed[idx] = true;
    StreetGraph trial(nodes);
    for (std::size_t k = 0; k < full.edge_count(); ++k) {
      if (!removed[k]) trial.add_edge(full.edges()[k].u, full.edges()[k].v);
    }
    if (is_connected(trial)) {
      ++done;
    } else {
      removed[idx] = false;
    }
  }
  StreetGraph out(nodes);
  for (std::size_t k = 0; k < full.edge_count(); ++k) {
    if (!removed[k]) out.add_edge(full.edges()[k].u, full.edges()[k].v);
  }
  return out;
}

Tokenized tokenize(const StreetGraph& g) {
  Tokenized t;
  t.graph = g.permuted(order_nodes(g));
  const auto norm = center_and_normalize(t.graph.nodes());
  std::vector<QuantizedPoint> q;
  for (const auto& p : norm.points) q.push_back(quantize(p));
  t.tokens = flatten_sequence(q);
  return t;
}

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo, double hi,
                     bool requires_grad) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = u(rng);
  return Tensor::from(rows, cols, std::move(v), requires_grad);
}

GradCheckResult gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs, double eps,
                          double floor) {
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    for (auto& t : inputs) t.zero_grad();
    Tensor loss = loss_fn();
    tape.backward(loss);
    for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());
  }
  GradCheckResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto data = inputs[i].data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + eps;
      const double up = loss_fn().item();
      data[k] = saved - eps;
      const double down = loss_fn().item();
      data[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i][k];
      const double abs_err = std::abs(a - numeric);
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      r.max_rel_error = std::max(r.max_rel_error, abs_err / std::max({std::abs(a), std::abs(numeric), floor}));
    }
  }
  return r;
}

}  // namespace streetvae::testing
