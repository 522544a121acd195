#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "streetvae/nodemodel.hpp"
#include "streetvae_cli/config.hpp"

namespace streetvae::cli {

namespace fs = std::filesystem;

inline constexpr const char* kDefaultOverpassUrl = "https://overpass-api.de/api/interpreter";

// Each command writes only under `out` and returns a process exit code.
// Library errors propagate; run_cli maps them to exit codes.

/// input dir -> graphs/<id>.json, tokens.jsonl, places.csv, stats/.
int cmd_preprocess(const PipelineConfig& cfg, const fs::path& out);

/// kind is "nodes" or "vgae". Reads cfg.corpus.
int cmd_train(const std::string& kind, const PipelineConfig& cfg, const fs::path& out);

/// Posterior-mean embeddings reduced by PCA -> embeddings.csv.
int cmd_embed(const PipelineConfig& cfg, const fs::path& out);

/// cfg.count generated graphs plus a generated-vs-held-out metric report.
int cmd_generate(const PipelineConfig& cfg, const fs::path& out);

/// Per-graph metrics for every graph JSON in cfg.graphs.
int cmd_metrics(const PipelineConfig& cfg, const fs::path& out);

/// k-means, elbow curve and per-country summaries of cfg.embeddings.
int cmd_cluster(const PipelineConfig& cfg, const fs::path& out);

/// SVG drawing of every graph JSON in cfg.graphs.
int cmd_plot(const PipelineConfig& cfg, const fs::path& out);

/// Downloads cfg.bbox from the Overpass endpoint into out/extract.osm.
int cmd_fetch(const PipelineConfig& cfg, const fs::path& out);

/// Node model architecture selected by the config.
NodeModelConfig node_model_config(const PipelineConfig& cfg);

/// Full command line: `streetvae <command> [options]`.
int run_cli(int argc, const char* const* argv);

/// Reads a whole file; UsageError when it cannot be opened.
std::string read_file(const fs::path& path);
/// Writes a whole file, creating parent directories.
void write_file(const fs::path& path, const std::string& content);

}  // namespace streetvae::cli
