#include <benchmark/benchmark.h>

#include <random>

#include "streetvae/cluster.hpp"
#include "streetvae/graph.hpp"
#include "streetvae/nodemodel.hpp"
#include "streetvae/tensor.hpp"

using namespace streetvae;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = u(rng);
  return Tensor::from(rows, cols, std::move(v));
}

StreetGraph grid(int side, double spacing = 100.0) {
  StreetGraph g;
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) g.add_node({c * spacing, r * spacing});
  }
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const int id = r * side + c;
      if (c + 1 < side) g.add_edge(id, id + 1);
      if (r + 1 < side) g.add_edge(id, id + side);
    }
  }
  return g;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_NodeForward(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto prepared = prepare_graph(grid(side));
  const NodeModel model(NodeModelConfig{}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(model, prepared.tokens));
  state.counters["tokens"] = static_cast<double>(prepared.tokens.size());
}
BENCHMARK(BM_NodeForward)->Arg(4)->Arg(8)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_NodeForwardBackward(benchmark::State& state) {
  const auto prepared = prepare_graph(grid(static_cast<int>(state.range(0))));
  NodeModel model(NodeModelConfig{}, 7);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = nll_loss(model, prepared.tokens);
    tape.backward(loss);
  }
}
BENCHMARK(BM_NodeForwardBackward)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ExtractFaces(benchmark::State& state) {
  const StreetGraph g = grid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract_faces(g));
  state.counters["edges"] = static_cast<double>(g.edge_count());
}
BENCHMARK(BM_ExtractFaces)->Arg(10)->Arg(30)->Arg(100);

void BM_KMeans(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise;
  Eigen::MatrixXd data(static_cast<Eigen::Index>(state.range(0)), 32);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = noise(rng);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(data, 7, 11));
}
BENCHMARK(BM_KMeans)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
