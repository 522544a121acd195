#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace streetvae::cli {

/// Every tunable of the pipeline. Each field has a key in the config file
/// (snake_case) and a matching --flag (kebab-case).
struct PipelineConfig {
  // paths
  std::string input;
  std::string corpus;
  std::string node_checkpoint;
  std::string vgae_checkpoint;
  std::string embeddings;
  std::string places;
  std::string graphs;

  // preprocessing
  double box_half_width = 500.0;
  double merge_threshold = 10.0;
  std::int64_t min_population = 1000;
  int n_cap = 512;

  // models
  int node_d_model = 128;
  int node_layers = 4;
  int node_heads = 8;
  int node_d_ff = 512;
  int node_epochs = 10;
  int node_batch = 8;
  double node_lr = 1e-3;
  std::string node_features = "mean_xy";
  int vgae_hidden = 64;
  int latent_dim = 16;
  int vgae_epochs = 200;
  double vgae_lr = 1e-2;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;  // fixes the train/held-out split across commands

  // generation
  int count = 100;
  double temperature = 1.0;
  double threshold = 0.5;
  bool bernoulli = false;

  // analysis
  int embed_dim = 32;
  int k = 7;
  int elbow_k_min = 2;
  int elbow_k_max = 12;
  int restarts = 5;
  bool orientation_weighted = true;
  bool exclude_boundary = false;

  // fetch
  std::string bbox;  // south,west,north,east
  double timeout = 60.0;

  // run
  std::uint64_t seed = 0;
  int jobs = 1;

  /// Throws UsageError naming the first field outside its range.
  void validate() const;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// All recognised keys in declaration order.
const std::vector<ConfigKey>& config_keys();

/// Sets one field from its textual value. Throws UsageError for an unknown key
/// or a value that does not parse as the field's type.
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

/// Current value of a field, formatted as it would appear in a config file.
std::string get_config_value(const PipelineConfig& config, std::string_view key);

/// `key = value` lines; `#` starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_config_text(std::string_view text);

/// Applies `text` on top of `config`. Unknown keys raise UsageError with the line number.
void apply_config_text(PipelineConfig& config, std::string_view text);

PipelineConfig load_config(const std::filesystem::path& path);

/// Config file text reproducing `config` (every key, declaration order).
std::string dump_config(const PipelineConfig& config);

}  // namespace streetvae::cli
