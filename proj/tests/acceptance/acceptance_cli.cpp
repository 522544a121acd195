#include "acceptance_cli.hpp"

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <vector>

#include "fixtures.hpp"
#include "streetvae/ingest.hpp"
#include "streetvae/nodemodel.hpp"
#include "streetvae/vgae.hpp"
#include "streetvae_cli/commands.hpp"
#include "streetvae_cli/config.hpp"

namespace fs = std::filesystem;
using namespace streetvae;
using namespace streetvae::cli;

namespace {

const char* kPipelineConfig = R"(node_d_model = 32
node_layers = 2
node_heads = 4
node_d_ff = 64
node_epochs = 3
node_batch = 4
n_cap = 128
vgae_hidden = 16
latent_dim = 8
vgae_epochs = 20
count = 8
seed = 11
)";

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "streetvae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

// relative path -> bytes for every regular file under root
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

// preprocess, train nodes, train vgae, generate; returns the first failing step or "".
std::string pipeline(const fs::path& work, const fs::path& input, const std::string& cfg, int jobs) {
  const std::string corpus = (work / "corpus").string();
  const std::string models = (work / "models").string();
  const std::string node = models + "/node.ckpt";
  const std::string vgae = models + "/vgae.ckpt";
  if (run({"preprocess", "--config", cfg, "--input", input.string(), "--out", corpus}) != 0) return "preprocess";
  if (run({"train", "nodes", "--config", cfg, "--corpus", corpus, "--out", models}) != 0) return "train nodes";
  if (run({"train", "vgae", "--config", cfg, "--corpus", corpus, "--node-checkpoint", node, "--out", models}) != 0)
    return "train vgae";
  if (run({"generate", "--config", cfg, "--corpus", corpus, "--node-checkpoint", node, "--vgae-checkpoint", vgae,
           "--jobs", std::to_string(jobs), "--out", (work / "gen").string()}) != 0)
    return "generate";
  return "";
}

}  // namespace

std::pair<bool, std::string> run_determinism_check() {
  const fs::path root = fs::temp_directory_path() / ("streetvae-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "pipeline.cfg";
  write_file(cfg, kPipelineConfig);
  const fs::path input = fs::path(STREETVAE_TEST_DATA) / "extracts";

  // Second run uses more worker threads; outputs must not depend on scheduling.
  const std::string a = pipeline(root / "a", input, cfg.string(), 1);
  const std::string b = a.empty() ? pipeline(root / "b", input, cfg.string(), 3) : "skipped";
  if (!a.empty() || !b.empty()) {
    fs::remove_all(root);
    return {false, "pipeline step failed: " + (a.empty() ? b : a)};
  }
  const auto sa = snapshot(root / "a");
  const auto sb = snapshot(root / "b");
  fs::remove_all(root);

  std::size_t differing = 0, bytes = 0;
  std::string first;
  for (const auto& [name, content] : sa) {
    bytes += content.size();
    auto it = sb.find(name);
    if (it == sb.end() || it->second != content) {
      if (first.empty()) first = name;
      ++differing;
    }
  }
  for (const auto& [name, content] : sb) {
    if (!sa.count(name)) {
      if (first.empty()) first = name;
      ++differing;
    }
  }
  std::string detail = "files=" + std::to_string(sa.size()) + " bytes=" + std::to_string(bytes) +
                       " differing=" + std::to_string(differing);
  if (!first.empty()) detail += " first=" + first;
  return {differing == 0 && sa.size() > 20, detail};
}

std::pair<bool, std::string> run_constants_check() {
  const PipelineConfig cfg;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  expect(cfg.merge_threshold == 10.0, "merge_threshold");
  expect(2.0 * cfg.box_half_width == 1000.0, "box side");
  expect(cfg.train_fraction == 0.8, "train_fraction");
  expect(cfg.k == 7, "k");
  expect(cfg.node_d_model == 128, "node_d_model");

  // Population filter is strict: 1000 is dropped, 1001 kept.
  std::vector<PlaceRecord> places(2);
  places[0].population = 1000;
  places[1].population = 1001;
  const auto kept = filter_places(places, cfg.min_population);
  expect(kept.size() == 1 && kept[0].population == 1001, "population filter");

  const auto [train, held] = split_indices(50, cfg.train_fraction, cfg.split_seed);
  expect(train.size() == 40 && held.size() == 10, "80/20 split");

  // Default node model yields N x 128 features for the auto-encoder.
  const auto t = streetvae::testing::tokenize(streetvae::testing::grid_graph(3, 4));
  const NodeModel node(node_model_config(cfg), cfg.seed);
  const auto feats = vgae_features(node, t.tokens);
  expect(feats.rows() == 12 && feats.cols() == 128, "feature shape");

  char detail[256];
  std::snprintf(detail, sizeof detail,
                "merge=%gm box=%gm population>%lld split=%zu/%zu features=%ldx%ld k=%d%s", cfg.merge_threshold,
                2.0 * cfg.box_half_width, static_cast<long long>(cfg.min_population), train.size(), held.size(),
                static_cast<long>(feats.rows()), static_cast<long>(feats.cols()), cfg.k,
                bad.empty() ? "" : " mismatched");
  std::string d = detail;
  for (const auto& b : bad) d += " " + b;
  return {bad.empty(), d};
}
