#include "streetvae_cli/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <variant>

#include "streetvae/error.hpp"

namespace streetvae::cli {
namespace {

using Member = std::variant<std::string PipelineConfig::*, double PipelineConfig::*, int PipelineConfig::*,
                            std::int64_t PipelineConfig::*, std::uint64_t PipelineConfig::*, bool PipelineConfig::*>;

struct Field {
  ConfigKey key;
  Member member;
};

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> table{
      {{"input", "directory of .geojson/.osm extracts"}, &C::input},
      {{"corpus", "preprocess output directory"}, &C::corpus},
      {{"node_checkpoint", "node model checkpoint"}, &C::node_checkpoint},
      {{"vgae_checkpoint", "graph auto-encoder checkpoint"}, &C::vgae_checkpoint},
      {{"embeddings", "embeddings CSV"}, &C::embeddings},
      {{"places", "places CSV"}, &C::places},
      {{"graphs", "directory of graph JSON files"}, &C::graphs},
      {{"box_half_width", "clip box half width in meters (0, 50000]"}, &C::box_half_width},
      {{"merge_threshold", "node merge distance in meters [0, 1000]"}, &C::merge_threshold},
      {{"min_population", "keep places with population above this (>= 0)"}, &C::min_population},
      {{"n_cap", "maximum nodes per graph [2, 4096]"}, &C::n_cap},
      {{"node_d_model", "node model width (node feature size)"}, &C::node_d_model},
      {{"node_layers", "transformer layers [1, 64]"}, &C::node_layers},
      {{"node_heads", "attention heads, divides node_d_model"}, &C::node_heads},
      {{"node_d_ff", "feed-forward width [1, 65536]"}, &C::node_d_ff},
      {{"node_epochs", "node model epochs [0, 1000000]"}, &C::node_epochs},
      {{"node_batch", "node model batch size [1, 4096]"}, &C::node_batch},
      {{"node_lr", "node model learning rate (0, 1]"}, &C::node_lr},
      {{"node_features", "mean_xy | y_only | concat_halves"}, &C::node_features},
      {{"vgae_hidden", "GCN hidden width [1, 4096]"}, &C::vgae_hidden},
      {{"latent_dim", "latent size F [1, 1024]"}, &C::latent_dim},
      {{"vgae_epochs", "auto-encoder epochs [0, 1000000]"}, &C::vgae_epochs},
      {{"vgae_lr", "auto-encoder learning rate (0, 1]"}, &C::vgae_lr},
      {{"train_fraction", "training share of the split (0, 1)"}, &C::train_fraction},
      {{"split_seed", "seed of the train/held-out split"}, &C::split_seed},
      {{"count", "graphs to generate [1, 1000000]"}, &C::count},
      {{"temperature", "node sampling temperature (0, 100]"}, &C::temperature},
      {{"threshold", "edge probability threshold [0, 1]"}, &C::threshold},
      {{"bernoulli", "sample edges instead of thresholding"}, &C::bernoulli},
      {{"embed_dim", "graph embedding size d after PCA [1, 4096]"}, &C::embed_dim},
      {{"k", "clusters [1, 1000]"}, &C::k},
      {{"elbow_k_min", "smallest k on the elbow curve [1, 1000]"}, &C::elbow_k_min},
      {{"elbow_k_max", "largest k on the elbow curve [1, 1000]"}, &C::elbow_k_max},
      {{"restarts", "k-means restarts per k [1, 100]"}, &C::restarts},
      {{"orientation_weighted", "weight bearings by street length"}, &C::orientation_weighted},
      {{"exclude_boundary", "drop blocks touching the tile border"}, &C::exclude_boundary},
      {{"bbox", "fetch box: south,west,north,east"}, &C::bbox},
      {{"timeout", "fetch timeout in seconds (0, 3600]"}, &C::timeout},
      {{"seed", "random seed"}, &C::seed},
      {{"jobs", "worker threads [1, 256]"}, &C::jobs},
  };
  return table;
}

const Field& find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key.name == key) return f;
  }
  throw UsageError("unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw UsageError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("config key '" + std::string(key) + "': expected true/false, got '" + std::string(text) + "'");
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
void require_range(const char* name, T v, T lo, T hi) {
  if (!(v >= lo && v <= hi)) {
    std::ostringstream os;
    os << name << " = " << v << " is outside [" << lo << ", " << hi << "]";
    throw UsageError(os.str());
  }
}

void require_open_low(const char* name, double v, double lo, double hi) {
  if (!(v > lo && v <= hi) || !std::isfinite(v)) {
    std::ostringstream os;
    os << name << " = " << v << " is outside (" << lo << ", " << hi << "]";
    throw UsageError(os.str());
  }
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  const Field& f = find_field(key);
  value = trim(value);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(config.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          config.*member = std::string(value);
        } else if constexpr (std::is_same_v<T, bool>) {
          config.*member = parse_bool(key, value);
        } else if constexpr (std::is_same_v<T, double>) {
          // from_chars for double is available in libstdc++ 11.
          config.*member = parse_number<double>(key, value);
        } else {
          config.*member = parse_number<T>(key, value);
        }
      },
      f.member);
}

std::string get_config_value(const PipelineConfig& config, std::string_view key) {
  const Field& f = find_field(key);
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(config.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return config.*member;
        } else if constexpr (std::is_same_v<T, bool>) {
          return config.*member ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(config.*member);
        } else {
          return std::to_string(config.*member);
        }
      },
      f.member);
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw UsageError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_config_text(PipelineConfig& config, std::string_view text) {
  for (const auto& [key, value] : parse_config_text(text)) set_config_value(config, key, value);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  PipelineConfig c;
  apply_config_text(c, ss.str());
  return c;
}

std::string dump_config(const PipelineConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key.name + " = " + get_config_value(config, f.key.name) + "\n";
  return out;
}

void PipelineConfig::validate() const {
  require_open_low("box_half_width", box_half_width, 0.0, 50000.0);
  require_range("merge_threshold", merge_threshold, 0.0, 1000.0);
  require_range<std::int64_t>("min_population", min_population, 0, INT64_MAX);
  require_range("n_cap", n_cap, 2, 4096);
  require_range("node_d_model", node_d_model, 1, 4096);
  require_range("node_layers", node_layers, 1, 64);
  require_range("node_heads", node_heads, 1, node_d_model);
  if (node_d_model % node_heads != 0) throw UsageError("node_heads must divide node_d_model");
  require_range("node_d_ff", node_d_ff, 1, 65536);
  require_range("node_epochs", node_epochs, 0, 1000000);
  require_range("node_batch", node_batch, 1, 4096);
  require_open_low("node_lr", node_lr, 0.0, 1.0);
  if (node_features != "mean_xy" && node_features != "y_only" && node_features != "concat_halves") {
    throw UsageError("node_features must be mean_xy, y_only or concat_halves");
  }
  require_range("vgae_hidden", vgae_hidden, 1, 4096);
  require_range("latent_dim", latent_dim, 1, 1024);
  require_range("vgae_epochs", vgae_epochs, 0, 1000000);
  require_open_low("vgae_lr", vgae_lr, 0.0, 1.0);
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train_fraction must lie in (0, 1)");
  require_range("count", count, 1, 1000000);
  require_open_low("temperature", temperature, 0.0, 100.0);
  require_range("threshold", threshold, 0.0, 1.0);
  require_range("embed_dim", embed_dim, 1, 4096);
  require_range("k", k, 1, 1000);
  require_range("elbow_k_min", elbow_k_min, 1, 1000);
  require_range("elbow_k_max", elbow_k_max, elbow_k_min, 1000);
  require_range("restarts", restarts, 1, 100);
  require_open_low("timeout", timeout, 0.0, 3600.0);
  require_range("jobs", jobs, 1, 256);
}

}  // namespace streetvae::cli
