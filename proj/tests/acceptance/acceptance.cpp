// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "streetvae/cluster.hpp"
#include "streetvae/error.hpp"
#include "streetvae/geom.hpp"
#include "streetvae/metrics.hpp"
#include "streetvae/nodemodel.hpp"
#include "streetvae/stats.hpp"
#include "streetvae/vgae.hpp"

#ifdef STREETVAE_HAVE_CLI
#include "acceptance_cli.hpp"
#endif

using namespace streetvae;
using streetvae::testing::gradcheck;
using streetvae::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Tensor weighted_sum(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, random_tensor(rng, out.rows(), out.cols(), -1.0, 1.0, false)));
}

// 1 -------------------------------------------------------------------------
Outcome gradients() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  auto A = [&](std::size_t r, std::size_t c) { return random_tensor(rng, r, c); };
  double op_worst = 0.0;
  auto check = [&](const std::function<Tensor()>& f, std::vector<Tensor> in) {
    op_worst = std::max(op_worst, gradcheck(f, std::move(in)).max_rel_error);
  };

  {
    Tensor a = A(3, 4), b = A(4, 2), c = A(5, 4), d = A(3, 4), row = A(1, 4), s = A(1, 1);
    check([&] { return weighted_sum(matmul(a, b), 1); }, {a, b});
    check([&] { return weighted_sum(matmul_nt(a, c), 2); }, {a, c});
    check([&] { return weighted_sum(transpose(a), 3); }, {a});
    check([&] { return weighted_sum(add(a, row), 4); }, {a, row});
    check([&] { return weighted_sum(sub(a, s), 5); }, {a, s});
    check([&] { return weighted_sum(mul(a, d), 6); }, {a, d});
    check([&] { return weighted_sum(scale(a, 1.7), 7); }, {a});
    check([&] { return mean(a); }, {a});
  }
  {
    Tensor a = A(4, 4);
    for (auto& v : a.data()) v += (v >= 0 ? 0.05 : -0.05);
    Tensor pos = random_tensor(rng, 4, 4, 0.2, 2.0);
    check([&] { return weighted_sum(relu(a), 8); }, {a});
    check([&] { return weighted_sum(sigmoid(a), 9); }, {a});
    check([&] { return weighted_sum(exp(a), 10); }, {a});
    check([&] { return weighted_sum(log(pos), 11); }, {pos});
  }
  {
    Tensor table = A(6, 3), a = A(2, 5), b = A(2, 3), c = A(4, 3);
    const std::vector<int> idx{5, 0, 5, 2};
    check([&] { return weighted_sum(gather_rows(table, idx), 12); }, {table});
    check([&] { return weighted_sum(slice_cols(a, 1, 3), 13); }, {a});
    check(
        [&] {
          const Tensor parts[] = {a, b};
          return weighted_sum(concat_cols(parts), 14);
        },
        {a, b});
    check(
        [&] {
          const Tensor parts[] = {b, c};
          return weighted_sum(concat_rows(parts), 15);
        },
        {b, c});
  }
  {
    Tensor x = A(4, 6), g = A(1, 6), b = A(1, 6), sc = random_tensor(rng, 5, 5, -2, 2);
    Tensor lg = random_tensor(rng, 4, 7, -2, 2), mu = A(3, 2), lv = A(3, 2), bl = random_tensor(rng, 4, 4, -3, 3);
    const std::vector<int> t{3, 0, 6, 2};
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(4, 4);
    target(0, 1) = target(1, 0) = target(2, 3) = target(3, 2) = 1.0;
    check([&] { return weighted_sum(layer_norm(x, g, b), 16); }, {x, g, b});
    check([&] { return weighted_sum(causal_softmax(sc), 17); }, {sc});
    check([&] { return softmax_cross_entropy(lg, t, -1); }, {lg});
    check([&] { return gaussian_kl(mu, lv); }, {mu, lv});
    check([&] { return weighted_bce_with_logits(bl, target, 3.0, 0.7); }, {bl});
  }

  // Node-model NLL on a reduced transformer.
  NodeModelConfig nc;
  nc.d_model = 8;
  nc.layers = 2;
  nc.heads = 2;
  nc.d_ff = 16;
  nc.max_nodes = 16;
  NodeModel node(nc, 7);
  {
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto& p : node.params()) {
      for (auto& v : p.tensor.data()) v += u(rng);
    }
  }
  const TokenSeq seq{kTokenStart, 17, 200, 43, 90, 255, 0, kTokenStop};
  std::vector<Tensor> node_inputs;
  for (auto& p : node.params()) node_inputs.push_back(p.tensor);
  const double nll_err = gradcheck([&] { return nll_loss(node, seq); }, node_inputs).max_rel_error;

  // ELBO through the full-width VGAE.
  VgaeModel vgae(VgaeConfig{}, 8);
  StreetGraph g({{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}});
  g.add_edge(0, 1);
  g.add_edge(1, 2);
  g.add_edge(0, 3);
  g.add_edge(3, 4);
  g.add_edge(4, 5);
  g.add_edge(1, 4);
  const auto adj = normalize_adjacency(g);
  const Tensor an = Tensor::from_eigen(adj.normalized);
  const Tensor x = random_tensor(rng, 6, 128, -1, 1, false);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd eps(6, 16);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = nd(rng);
  std::vector<Tensor> vgae_inputs;
  for (auto& p : vgae.params()) vgae_inputs.push_back(p.tensor);
  const double elbo_err = gradcheck(
                              [&] {
                                const auto post = encode(vgae, an, x);
                                const auto latent = reparameterize(post.mu, post.log_var, eps);
                                return elbo_loss(adj.a, decode_logits(latent.z), latent).loss;
                              },
                              vgae_inputs)
                              .max_rel_error;

  const double secs = seconds_since(t0);
  const bool pass = op_worst < 1e-4 && elbo_err < 1e-4 && nll_err < 1e-3 && secs < 60.0;
  return {pass, fmt("ops max_rel=%.2e (<1e-4) elbo=%.2e (<1e-4) nll=%.2e (<1e-3) time=%.1fs (<60)", op_worst,
                    elbo_err, nll_err, secs)};
}

// 2 -------------------------------------------------------------------------
Outcome quantization() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  int violations = 0;
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u(rng);
    const double err = std::abs(dequantize_value(quantize_value(v)) - v);
    worst = std::max(worst, err);
    if (err > 1.0 / 512.0) ++violations;
  }
  return {violations == 0, fmt("n=100000 violations=%d max_err=%.6f (<=%.6f)", violations, worst, 1.0 / 512.0)};
}

// 3 -------------------------------------------------------------------------
Outcome planarity() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> side(2, 8);
  std::uniform_real_distribution<double> frac(0.0, 0.4);
  int euler_bad = 0, ring_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = streetvae::testing::perturbed_grid(rng, side(rng), side(rng), 100.0, 25.0, frac(rng));
    const auto faces = extract_faces(g);
    const long long v = static_cast<long long>(g.node_count());
    const long long e = static_cast<long long>(g.edge_count());
    const long long f = static_cast<long long>(faces.size());
    if (v - e + f != 2) ++euler_bad;
    std::size_t ring_total = 0;
    for (const auto& face : faces) ring_total += face.ring.size();
    if (ring_total != 2 * g.edge_count()) ++ring_bad;
  }
  return {euler_bad == 0 && ring_bad == 0,
          fmt("fixtures=100 euler_violations=%d ring_sum_violations=%d", euler_bad, ring_bad)};
}

// 4 -------------------------------------------------------------------------
Outcome metric_oracles() {
  const auto g = streetvae::testing::grid_graph(3, 3);
  const auto t = topo_metrics(g);
  const auto b = block_metrics(g);
  bool blocks_ok = b.blocks == 4;
  double ff_err = 0.0, cp_err = 0.0, area_err = 0.0;
  for (const auto& r : b.table) {
    ff_err = std::max(ff_err, std::abs(r.form_factor - 2.0 / std::numbers::pi));
    cp_err = std::max(cp_err, std::abs(r.compactness - 0.04));
    area_err = std::max(area_err, std::abs(r.area - 1e4));
  }
  const bool pass = t.avg_street_length == 100.0 && t.avg_streets_per_node == 24.0 / 9.0 &&
                    std::abs(t.avg_circuity - 1.0) <= 1e-9 && blocks_ok && area_err <= 1e-6 && ff_err <= 1e-6 &&
                    cp_err <= 1e-9;
  return {pass, fmt("length=%.12g spn=%.12g circuity_err=%.1e blocks=%zu area_err=%.1e ff_err=%.1e cp_err=%.1e",
                    t.avg_street_length, t.avg_streets_per_node, std::abs(t.avg_circuity - 1.0), b.blocks, area_err,
                    ff_err, cp_err)};
}

// Synthetic corpus shared by 5 and 7: perturbed grids, ordered and tokenized.
std::vector<streetvae::testing::Tokenized> synthetic_corpus(std::uint64_t seed, int count, int min_side,
                                                            int max_side) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> side(min_side, max_side);
  std::uniform_real_distribution<double> frac(0.0, 0.3);
  std::vector<streetvae::testing::Tokenized> out;
  for (int i = 0; i < count; ++i) {
    const int r = side(rng), c = side(rng);
    out.push_back(streetvae::testing::tokenize(streetvae::testing::perturbed_grid(rng, r, c, 100.0, 20.0, frac(rng))));
  }
  return out;
}

// 5 -------------------------------------------------------------------------
Outcome vgae_smoke() {
  const auto t0 = Clock::now();
  const auto corpus = synthetic_corpus(505, 200, 3, 8);
  NodeModelConfig nc;
  nc.max_nodes = 64;
  const NodeModel node(nc, 5);
  std::vector<VgaeGraph> graphs;
  std::size_t max_n = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    graphs.push_back(make_vgae_graph(node, corpus[i].graph, corpus[i].tokens, "g" + std::to_string(i)));
    max_n = std::max(max_n, corpus[i].graph.node_count());
  }
  VgaeTrainConfig tc;
  tc.epochs = 200;
  tc.seed = 55;
  VgaeModel a(VgaeConfig{.in_dim = 128, .hidden = 64, .latent = 16}, 5);
  const auto ra = train_vgae(a, graphs, tc);
  const double secs = seconds_since(t0);

  // Replay a prefix of the run to check the loss curve is reproducible.
  VgaeTrainConfig short_cfg = tc;
  short_cfg.epochs = 3;
  VgaeModel b(VgaeConfig{.in_dim = 128, .hidden = 64, .latent = 16}, 5);
  const auto rb = train_vgae(b, graphs, short_cfg);
  bool same = true;
  for (std::size_t i = 0; i < rb.curve.size(); ++i) same = same && rb.curve[i].train_loss == ra.curve[i].train_loss;

  const double auc = ra.curve.back().val_auc;
  const bool pass = max_n <= 64 && auc >= 0.85 && secs <= 300.0 && same;
  return {pass, fmt("graphs=200 max_nodes=%zu F=16 final_auc=%.4f (>=0.85) loss %.4f->%.4f time=%.1fs (<=300) "
                    "deterministic=%s",
                    max_n, auc, ra.curve.front().train_loss, ra.curve.back().train_loss, secs, same ? "yes" : "no")};
}

// 6 -------------------------------------------------------------------------
Outcome memorization() {
  const auto t0 = Clock::now();
  const auto corpus = synthetic_corpus(606, 10, 5, 5);
  std::vector<TokenSeq> seqs;
  for (const auto& c : corpus) seqs.push_back(c.tokens);
  NodeModelConfig nc;
  nc.max_nodes = 64;
  NodeModel model(nc, 6);
  NodeTrainConfig tc;
  tc.epochs = 2000;
  tc.batch_size = 10;
  tc.max_steps = 2000;
  tc.target_loss = 0.1;
  tc.adam.lr = 1e-3;
  tc.seed = 6;
  const auto r = train_node_model(model, seqs, {}, tc);
  const double final_nll = evaluate_nll(model, seqs);

  const auto nodes = sample_nodes(model, {.max_nodes = 64, .greedy = true}, 0);
  const auto greedy = flatten_sequence(nodes);
  bool reproduced = false;
  for (const auto& s : seqs) reproduced = reproduced || s == greedy;
  const bool pass = final_nll < 0.1 && r.steps <= 2000 && reproduced;
  return {pass, fmt("sequences=10 steps=%lld (<=2000) nll=%.4f (<0.1) greedy_reproduces=%s time=%.1fs", r.steps,
                    final_nll, reproduced ? "yes" : "no", seconds_since(t0))};
}

// 7 -------------------------------------------------------------------------
Outcome generation() {
  const auto t0 = Clock::now();
  const auto corpus = synthetic_corpus(707, 50, 3, 5);
  const auto [train_idx, test_idx] = split_indices(corpus.size(), 0.8, 7);

  NodeModelConfig nc;
  nc.d_model = 64;
  nc.heads = 4;
  nc.layers = 2;
  nc.d_ff = 256;
  nc.max_nodes = 64;
  NodeModel node(nc, 7);
  std::vector<TokenSeq> train_seqs, val_seqs;
  for (auto i : train_idx) train_seqs.push_back(corpus[i].tokens);
  for (auto i : test_idx) val_seqs.push_back(corpus[i].tokens);
  NodeTrainConfig ntc;
  ntc.epochs = 20;
  ntc.batch_size = 8;
  ntc.adam.lr = 3e-3;
  ntc.seed = 7;
  const auto nr = train_node_model(node, train_seqs, val_seqs, ntc);

  std::vector<VgaeGraph> graphs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    graphs.push_back(make_vgae_graph(node, corpus[i].graph, corpus[i].tokens, "g" + std::to_string(i)));
  }
  VgaeModel vgae(VgaeConfig{.in_dim = 64, .hidden = 64, .latent = 16}, 7);
  VgaeTrainConfig vtc;
  vtc.epochs = 100;
  vtc.seed = 7;
  const auto vr = train_vgae(vgae, graphs, vtc);

  int produced = 0, attempts = 0, degenerate = 0, violations = 0, non_planar = 0;
  std::vector<double> gen_spn, held_spn;
  GenerateConfig gc;
  gc.sampling.max_nodes = 64;
  while (produced < 100 && attempts < 400) {
    ++attempts;
    GeneratedNetwork net;
    try {
      net = generate_network(node, vgae, gc, static_cast<std::uint64_t>(attempts));
    } catch (const GenerationError&) {
      ++degenerate;
      continue;
    }
    ++produced;
    const auto& adj = net.adjacency;
    bool ok = adj == adj.transpose() && adj.diagonal().cwiseAbs().maxCoeff() == 0;
    if (net.graph.edge_count() > 0) {
      const auto m = topo_metrics(net.graph);
      ok = ok && m.avg_circuity >= 1.0 - 1e-12 && m.mean_edge_circuity >= 1.0 - 1e-12;
      gen_spn.push_back(m.avg_streets_per_node);
      try {
        for (const auto& rec : block_metrics(net.graph).table) ok = ok && rec.form_factor <= 1.0 + 1e-9;
      } catch (const NonPlanarError&) {
        ++non_planar;
      }
    } else {
      gen_spn.push_back(0.0);
    }
    if (!ok) ++violations;
  }
  for (auto i : test_idx) held_spn.push_back(topo_metrics(corpus[i].graph).avg_streets_per_node);
  const double ks = gen_spn.empty() ? 1.0 : ks_statistic(gen_spn, held_spn);
  double gen_mean = 0.0, held_mean = 0.0;
  for (double v : gen_spn) gen_mean += v / static_cast<double>(gen_spn.size());
  for (double v : held_spn) held_mean += v / static_cast<double>(held_spn.size());

  const bool pass = produced == 100 && violations == 0;
  return {pass, fmt("samples=%d attempts=%d degenerate=%d violations=%d non_planar=%d node_val_nll=%.3f "
                    "vgae_auc=%.3f ks_streets_per_node=%.3f (gen mean %.2f, held-out mean %.2f; informational) "
                    "time=%.1fs",
                    produced, attempts, degenerate, violations, non_planar, nr.curve.back().val_nll.value_or(NAN),
                    vr.curve.back().val_auc, ks, gen_mean, held_mean, seconds_since(t0))};
}

// 8 -------------------------------------------------------------------------
Outcome clustering() {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> n(0.0, 1.0);
  const int dim = 32, per = 20;
  Eigen::MatrixXd data(7 * per, dim);
  std::vector<int> truth;
  for (int c = 0; c < 7; ++c) {
    for (int i = 0; i < per; ++i) {
      const int row = c * per + i;
      for (int k = 0; k < dim; ++k) data(row, k) = (k == c ? 50.0 : 0.0) + n(rng);
      truth.push_back(c);
    }
  }
  const auto elbow = elbow_curve(data, 2, 12, 8);
  const auto km = kmeans(data, 7, 8);
  bool exact = true;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = i + 1; j < truth.size(); ++j) {
      exact = exact && ((truth[i] == truth[j]) == (km.labels[i] == km.labels[j]));
    }
  }
  bool monotone = true;
  int runs = 0;
  for (int k = 1; k <= 12; ++k) {
    for (std::uint64_t s = 0; s < 5; ++s, ++runs) {
      const auto r = kmeans(data, k, s);
      for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) {
        monotone = monotone && r.inertia_trace[i] <= r.inertia_trace[i - 1];
      }
    }
  }
  const bool pass = elbow.suggested_k == 7 && exact && monotone;
  return {pass, fmt("suggested_k=%d (==7) planted_partition=%s monotone_runs=%d/%d", elbow.suggested_k,
                    exact ? "exact" : "differs", monotone ? runs : -1, runs)};
}

#ifdef STREETVAE_HAVE_CLI
Outcome acceptance_determinism() {
  const auto t0 = Clock::now();
  auto [pass, detail] = run_determinism_check();
  return {pass, detail + fmt(" time=%.1fs", seconds_since(t0))};
}
Outcome acceptance_constants() {
  auto [pass, detail] = run_constants_check();
  return {pass, detail};
}
#else
Outcome cli_unavailable() { return {false, "command-line tool not built"}; }
#endif

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradients},
      {2, "quantization error bound", quantization},
      {3, "planarity and Euler characteristic", planarity},
      {4, "metric oracles", metric_oracles},
      {5, "vgae learning smoke test", vgae_smoke},
      {6, "node-model memorization", memorization},
      {7, "end-to-end generation invariants", generation},
      {8, "clustering and elbow", clustering},
#ifdef STREETVAE_HAVE_CLI
      {9, "pipeline determinism", acceptance_determinism},
      {10, "pipeline constants", acceptance_constants},
#else
      {9, "pipeline determinism", cli_unavailable},
      {10, "pipeline constants", cli_unavailable},
#endif
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s: %s | %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
