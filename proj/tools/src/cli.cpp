#include <cstdio>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "streetvae/error.hpp"
#include "streetvae_cli/commands.hpp"

namespace streetvae::cli {
namespace {

std::string kebab(std::string s) {
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

struct Shared {
  std::string config_path;
  std::string out = ".";
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_shared(CLI::App* cmd, Shared& s) {
  cmd->add_option("--config", s.config_path, "flat key = value config file");
  cmd->add_option("--out", s.out, "output directory");
  for (const auto& key : config_keys()) {
    s.options[key.name] = cmd->add_option("--" + kebab(key.name), s.values[key.name], key.help);
  }
}

PipelineConfig resolve(const Shared& s) {
  PipelineConfig cfg = s.config_path.empty() ? PipelineConfig{} : load_config(s.config_path);
  // Flags win over the file.
  for (const auto& [key, opt] : s.options) {
    if (opt->count() > 0) set_config_value(cfg, key, s.values.at(key));
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Street network generation and analysis"};
  app.require_subcommand(1);
  std::map<std::string, std::unique_ptr<Shared>> shared;
  auto sub = [&](const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    shared[name] = std::make_unique<Shared>();
    add_shared(cmd, *shared[name]);
    return cmd;
  };
  sub("preprocess", "parse, clip, project, merge and tokenize extracts");
  auto* train = sub("train", "train the node model (nodes) or the graph auto-encoder (vgae)");
  std::string kind;
  train->add_option("kind", kind, "nodes | vgae")->required()->check(CLI::IsMember({"nodes", "vgae"}));
  sub("embed", "graph embeddings from posterior means and PCA");
  sub("generate", "sample street networks and compare them with held-out graphs");
  sub("metrics", "topological and block metrics for a directory of graphs");
  sub("cluster", "k-means, elbow curve and per-country summaries");
  sub("plot", "draw graphs as SVG");
  sub("fetch", "download an extract from an Overpass endpoint");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto* cmd : app.get_subcommands()) {
      const std::string name = cmd->get_name();
      const Shared& s = *shared.at(name);
      const PipelineConfig cfg = resolve(s);
      const fs::path out(s.out);
      fs::create_directories(out);
      if (name == "preprocess") return cmd_preprocess(cfg, out);
      if (name == "train") return cmd_train(kind, cfg, out);
      if (name == "embed") return cmd_embed(cfg, out);
      if (name == "generate") return cmd_generate(cfg, out);
      if (name == "metrics") return cmd_metrics(cfg, out);
      if (name == "cluster") return cmd_cluster(cfg, out);
      if (name == "plot") return cmd_plot(cfg, out);
      if (name == "fetch") return cmd_fetch(cfg, out);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "[streetvae] error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "[streetvae] error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace streetvae::cli
