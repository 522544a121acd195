#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "streetvae/graph.hpp"
#include "streetvae/tensor.hpp"

namespace streetvae::testing {

/// rows x cols lattice with `spacing` meters between neighbours, straight edges.
StreetGraph grid_graph(int rows, int cols, double spacing = 100.0);

/// Grid with node jitter (uniform in +-jitter) and a fraction of edges removed
/// while keeping the graph connected.
StreetGraph perturbed_grid(std::mt19937_64& rng, int rows, int cols, double spacing, double jitter,
                           double delete_fraction);

bool is_connected(const StreetGraph& g);

/// Ordered graph (canonical node order), its normalization and token sequence.
struct Tokenized {
  StreetGraph graph;
  TokenSeq tokens;
};
Tokenized tokenize(const StreetGraph& g);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

/// Central finite differences (step `eps`) of `loss_fn` with respect to every
/// entry of `inputs`, compared with the tape gradient. Relative error uses
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckResult gradcheck(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs, double eps = 1e-4,
                          double floor = 1e-3);

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true);

}  // namespace streetvae::testing
