#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "streetvae/error.hpp"
#include "streetvae_cli/commands.hpp"
#include "streetvae_cli/config.hpp"

using namespace streetvae;
using namespace streetvae::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kExtracts = fs::path(STREETVAE_TEST_DATA) / "extracts";

const char* kTinyConfig = R"(# small models so the tests stay fast
node_d_model = 16
node_layers = 1
node_heads = 2
node_d_ff = 32
node_epochs = 2
node_batch = 4
n_cap = 128
vgae_hidden = 8
latent_dim = 4
vgae_epochs = 4
count = 5
k = 3
embed_dim = 3
seed = 3
)";

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("streetvae-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& s) const { return path / s; }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "streetvae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) ++n;
  }
  return n;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Copies the named fixtures into dir/in and writes the tiny config.
void stage(const TempDir& dir, const std::vector<std::string>& names) {
  fs::create_directories(dir / "in");
  for (const auto& n : names) fs::copy_file(kExtracts / n, dir / "in" / n);
  write_file(dir / "tiny.cfg", kTinyConfig);
}

const std::vector<std::string> kAll = {"alderbrook.geojson", "birchmoor.geojson", "cedarvale.geojson",
                                       "dunmere.osm",        "elmstead.geojson",  "fernhollow.geojson",
                                       "glenmarsh.osm",      "hazelford.geojson"};

}  // namespace

TEST_CASE("config defaults") {
  const PipelineConfig c;
  CHECK(c.merge_threshold == 10.0);
  CHECK(c.box_half_width == 500.0);
  CHECK(c.min_population == 1000);
  CHECK(c.train_fraction == 0.8);
  CHECK(c.k == 7);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config text round trip and errors") {
  PipelineConfig c;
  apply_config_text(c, "# comment\nk = 4\n\nnode_lr = 0.5  # trailing\nbernoulli = true\nnode_features = mean_xy\n");
  CHECK(c.k == 4);
  CHECK(c.node_lr == 0.5);
  CHECK(c.bernoulli);

  PipelineConfig d;
  apply_config_text(d, dump_config(c));
  CHECK(dump_config(d) == dump_config(c));
  for (const auto& key : config_keys()) CHECK(get_config_value(d, key.name) == get_config_value(c, key.name));

  CHECK_THROWS_AS(apply_config_text(c, "no_such_key = 1\n"), UsageError);
  CHECK_THROWS_AS(apply_config_text(c, "k = seven\n"), UsageError);
  CHECK_THROWS_AS(set_config_value(c, "bogus", "1"), UsageError);
}

TEST_CASE("config ranges") {
  auto bad = [](const char* key, const char* value) {
    PipelineConfig c;
    set_config_value(c, key, value);
    CHECK_THROWS_AS(c.validate(), UsageError);
  };
  bad("k", "0");
  bad("train_fraction", "1.5");
  bad("temperature", "0");
  bad("merge_threshold", "-1");
  bad("node_heads", "3");  // does not divide node_d_model
  bad("threshold", "2");
}

TEST_CASE("flags override the config file; unknown keys exit 2") {
  TempDir dir;
  stage(dir, {"alderbrook.geojson"});
  write_file(dir / "bad.cfg", "colour = blue\n");
  CHECK(run({"preprocess", "--config", (dir / "bad.cfg").string(), "--input", (dir / "in").string(), "--out",
             (dir / "x").string()}) == 2);
  CHECK(run({"preprocess", "--k", "0", "--input", (dir / "in").string(), "--out", (dir / "x").string()}) == 2);

  // File asks for a tiny box that clips everything away; the flag restores the default.
  write_file(dir / "box.cfg", "box_half_width = 1\n");
  const int clipped = run({"preprocess", "--config", (dir / "box.cfg").string(), "--input",
                           (dir / "in").string(), "--out", (dir / "a").string()});
  CHECK(clipped != 0);
  CHECK(run({"preprocess", "--config", (dir / "box.cfg").string(), "--box-half-width", "500", "--input",
             (dir / "in").string(), "--out", (dir / "b").string()}) == 0);
  CHECK(count_files(dir / "b" / "graphs", ".json") == 1);
}

TEST_CASE("preprocess writes one graph per valid input") {
  TempDir dir;
  stage(dir, {"alderbrook.geojson", "dunmere.osm", "cedarvale.geojson"});
  REQUIRE(run({"preprocess", "--input", (dir / "in").string(), "--out", (dir / "out").string()}) == 0);
  CHECK(count_files(dir / "out" / "graphs", ".json") == 3);
  CHECK(lines_of(dir / "out" / "tokens.jsonl").size() == 3);
  CHECK(lines_of(dir / "out" / "places.csv").size() == 4);
  CHECK(fs::exists(dir / "out" / "stats" / "node_counts.svg"));

  // A corrupt file is skipped, the rest still succeed.
  write_file(dir / "in" / "broken.geojson", "{\"type\": \"FeatureCollection\", \"features\": [");
  REQUIRE(run({"preprocess", "--input", (dir / "in").string(), "--out", (dir / "out2").string()}) == 0);
  CHECK(count_files(dir / "out2" / "graphs", ".json") == 3);

  fs::create_directories(dir / "empty");
  CHECK(run({"preprocess", "--input", (dir / "empty").string(), "--out", (dir / "out3").string()}) != 0);
}

TEST_CASE("pipeline: train, embed, generate, cluster") {
  TempDir dir;
  stage(dir, kAll);
  const std::string cfg = (dir / "tiny.cfg").string();
  const std::string corpus = (dir / "corpus").string();
  REQUIRE(run({"preprocess", "--config", cfg, "--input", (dir / "in").string(), "--out", corpus}) == 0);

  const std::string run1 = (dir / "run1").string();
  REQUIRE(run({"train", "nodes", "--config", cfg, "--corpus", corpus, "--out", run1}) == 0);
  const std::string ckpt = read_file(dir / "run1" / "node.ckpt");
  CHECK(ckpt.substr(0, 5) == "SVAE1");
  CHECK(lines_of(dir / "run1" / "node_curve.csv").size() == 3);

  // Missing prerequisite is a usage error.
  CHECK(run({"train", "vgae", "--config", cfg, "--corpus", corpus, "--out", run1}) == 2);
  CHECK(run({"train", "bogus", "--config", cfg, "--corpus", corpus, "--out", run1}) != 0);

  const std::string node_ckpt = (dir / "run1" / "node.ckpt").string();
  REQUIRE(run({"train", "vgae", "--config", cfg, "--corpus", corpus, "--node-checkpoint", node_ckpt, "--out",
               run1}) == 0);
  CHECK(lines_of(dir / "run1" / "vgae_curve.csv").size() == 5);

  SUBCASE("same seed gives byte-identical curves") {
    const std::string run2 = (dir / "run2").string();
    REQUIRE(run({"train", "nodes", "--config", cfg, "--corpus", corpus, "--out", run2}) == 0);
    REQUIRE(run({"train", "vgae", "--config", cfg, "--corpus", corpus, "--node-checkpoint",
                 (dir / "run2" / "node.ckpt").string(), "--out", run2}) == 0);
    CHECK(read_file(dir / "run1" / "node_curve.csv") == read_file(dir / "run2" / "node_curve.csv"));
    CHECK(read_file(dir / "run1" / "vgae_curve.csv") == read_file(dir / "run2" / "vgae_curve.csv"));
    CHECK(read_file(dir / "run1" / "node.ckpt") == read_file(dir / "run2" / "node.ckpt"));
  }

  SUBCASE("generate and embed") {
    const std::string vgae_ckpt = (dir / "run1" / "vgae.ckpt").string();
    const std::string gen = (dir / "gen").string();
    REQUIRE(run({"generate", "--config", cfg, "--corpus", corpus, "--node-checkpoint", node_ckpt,
                 "--vgae-checkpoint", vgae_ckpt, "--out", gen}) == 0);
    CHECK(count_files(dir / "gen" / "generated", ".json") == 5);
    CHECK(count_files(dir / "gen" / "generated", ".svg") == 5);
    const auto report = nlohmann::json::parse(read_file(dir / "gen" / "report" / "report.json"));
    REQUIRE(report["metrics"].size() == 6);
    for (const auto& m : report["metrics"]) {
      CHECK(m.contains("generated"));
      CHECK(m.contains("held_out"));
    }
    CHECK(report["sets"]["generated"]["graphs"] == 5);

    REQUIRE(run({"embed", "--config", cfg, "--corpus", corpus, "--node-checkpoint", node_ckpt,
                 "--vgae-checkpoint", vgae_ckpt, "--out", (dir / "emb").string()}) == 0);
    const auto rows = lines_of(dir / "emb" / "embeddings.csv");
    REQUIRE(rows.size() == 9);
    CHECK(rows[0] == "graph,e0,e1,e2");

    REQUIRE(run({"cluster", "--config", cfg, "--embeddings", (dir / "emb" / "embeddings.csv").string(),
                 "--places", corpus + "/places.csv", "--graphs", corpus + "/graphs", "--elbow-k-max", "6",
                 "--out", (dir / "cl").string()}) == 0);
    CHECK(lines_of(dir / "cl" / "assignments.csv").size() == 9);
    CHECK(count_files(dir / "cl" / "orientation", ".svg") == 3);
  }
}

TEST_CASE("cluster on synthetic embeddings") {
  TempDir dir;
  std::ostringstream emb, places;
  emb << "graph,e0,e1\n";
  places << "id,name,country,kind,population,lon,lat\n";
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 0.1);
  const char* countries[] = {"FR", "DE", "JP", "US"};
  for (int i = 0; i < 20; ++i) {
    const int c = i % 4;
    emb << 100 + i << ',' << 10.0 * (c % 2) + noise(rng) << ',' << 10.0 * (c / 2) + noise(rng) << '\n';
    places << 100 + i << ",P" << i << ',' << countries[i % 4] << ",town,2000,0,0\n";
  }
  write_file(dir / "emb.csv", emb.str());
  write_file(dir / "places.csv", places.str());
  REQUIRE(run({"cluster", "--k", "4", "--elbow-k-min", "2", "--elbow-k-max", "12", "--embeddings",
               (dir / "emb.csv").string(), "--places", (dir / "places.csv").string(), "--out",
               (dir / "cl").string()}) == 0);
  CHECK(lines_of(dir / "cl" / "assignments.csv").size() == 21);
  CHECK(lines_of(dir / "cl" / "elbow.csv").size() == 12);

  const auto membership = lines_of(dir / "cl" / "membership.csv");
  REQUIRE(membership.size() == 5);
  int total = 0;
  for (std::size_t i = 1; i < membership.size(); ++i) {
    const int count = std::stoi(membership[i].substr(membership[i].find(',') + 1));
    CHECK(count == 5);
    total += count;
  }
  CHECK(total == 20);

  // Each country sits in one well-separated blob, so variety is 1 everywhere.
  const auto countries_rows = lines_of(dir / "cl" / "countries.csv");
  REQUIRE(countries_rows.size() == 5);
  for (std::size_t i = 1; i < countries_rows.size(); ++i) {
    CHECK(countries_rows[i].find(",false,1,") != std::string::npos);
  }

  CHECK(run({"cluster", "--k", "21", "--embeddings", (dir / "emb.csv").string(), "--places",
             (dir / "places.csv").string(), "--out", (dir / "cl2").string()}) == 2);
}

TEST_CASE("metrics and plot on a graph directory") {
  TempDir dir;
  stage(dir, {"alderbrook.geojson", "hazelford.geojson"});
  REQUIRE(run({"preprocess", "--input", (dir / "in").string(), "--out", (dir / "c").string()}) == 0);
  REQUIRE(run({"metrics", "--graphs", (dir / "c" / "graphs").string(), "--out", (dir / "m").string()}) == 0);
  CHECK(lines_of(dir / "m" / "metrics.csv").size() == 3);
  REQUIRE(run({"plot", "--graphs", (dir / "c" / "graphs").string(), "--out", (dir / "p").string()}) == 0);
  CHECK(count_files(dir / "p", ".svg") == 2);
  CHECK(run({"metrics", "--out", (dir / "m").string()}) == 2);
}

TEST_CASE("fetch validates the box before any network access") {
  TempDir dir;
  CHECK(run({"fetch", "--out", dir.path.string()}) == 2);
  CHECK(run({"fetch", "--bbox", "1,2,3", "--out", dir.path.string()}) == 2);
}
