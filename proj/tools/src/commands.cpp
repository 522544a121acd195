#include "streetvae_cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "streetvae/checkpoint.hpp"
#include "streetvae/cluster.hpp"
#include "streetvae/error.hpp"
#include "streetvae/graph_io.hpp"
#include "streetvae/ingest.hpp"
#include "streetvae/metrics.hpp"
#include "streetvae/nodemodel.hpp"
#include "streetvae/orientation.hpp"
#include "streetvae/overpass.hpp"
#include "streetvae/pca.hpp"
#include "streetvae/stats.hpp"
#include "streetvae/vgae.hpp"
#include "streetvae_cli/svg.hpp"

namespace streetvae::cli {

using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// small helpers

namespace {

void log_line(const char* level, const std::string& msg) {
  std::fprintf(stderr, "[streetvae] %s: %s\n", level, msg.c_str());
}
void info(const std::string& msg) { log_line("info", msg); }
void warn(const std::string& msg) { log_line("warning", msg); }

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  return line + "\n";
}

struct CsvTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> offsets;  // byte offset of each row
};

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  auto& rows = table.rows;
  std::size_t row_start = 0, quote_start = 0;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      quote_start = i;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
        table.offsets.push_back(row_start);
      }
      row_start = i + 1;
      row.clear();
      field.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (quoted) throw ParseError("csv: unterminated quoted field", quote_start);
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
    table.offsets.push_back(row_start);
  }
  return table;
}

std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "unnamed" : out;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  // splitmix64 over the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

NodeFeatureMode parse_feature_mode(const std::string& s) {
  if (s == "y_only") return NodeFeatureMode::y_only;
  if (s == "concat_halves") return NodeFeatureMode::concat_halves;
  return NodeFeatureMode::mean_xy;
}

// Corpus written by preprocess.
struct CorpusEntry {
  std::string id;
  TokenSeq tokens;
  GraphFile file;
};

std::vector<CorpusEntry> load_corpus(const PipelineConfig& cfg) {
  if (cfg.corpus.empty()) throw UsageError("--corpus is required");
  const fs::path dir(cfg.corpus);
  const fs::path tokens = dir / "tokens.jsonl";
  if (!fs::exists(tokens)) throw UsageError("corpus " + dir.string() + " has no tokens.jsonl (run preprocess)");
  std::vector<CorpusEntry> out;
  for (auto& rec : read_token_corpus(read_file(tokens))) {
    CorpusEntry e;
    e.id = rec.graph_id;
    e.tokens = std::move(rec.tokens);
    e.file = read_graph_json(read_file(dir / "graphs" / (sanitize_id(e.id) + ".json")));
    out.push_back(std::move(e));
  }
  if (out.empty()) throw UsageError("corpus " + dir.string() + " is empty");
  return out;
}

NodeModel load_node_model(const PipelineConfig& cfg) {
  if (cfg.node_checkpoint.empty()) throw UsageError("a node model checkpoint is required (--node-checkpoint)");
  if (!fs::exists(cfg.node_checkpoint)) {
    throw UsageError("node model checkpoint " + cfg.node_checkpoint + " does not exist");
  }
  return NodeModel::from_checkpoint(load_checkpoint(cfg.node_checkpoint));
}

VgaeModel load_vgae(const PipelineConfig& cfg) {
  if (cfg.vgae_checkpoint.empty()) throw UsageError("a VGAE checkpoint is required (--vgae-checkpoint)");
  if (!fs::exists(cfg.vgae_checkpoint)) {
    throw UsageError("VGAE checkpoint " + cfg.vgae_checkpoint + " does not exist");
  }
  return VgaeModel::from_checkpoint(load_checkpoint(cfg.vgae_checkpoint));
}

std::vector<fs::path> list_files(const fs::path& dir, const std::set<std::string>& extensions) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw UsageError(dir.string() + " is not a directory");
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (extensions.contains(entry.path().extension().string())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Histogram over [lo, hi] with `bins` equal bins; the last bin is closed.
std::vector<double> histogram(const std::vector<double>& values, double lo, double hi, int bins) {
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  for (double v : values) {
    auto b = static_cast<long>(std::floor((v - lo) / width));
    b = std::clamp<long>(b, 0, bins - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  return counts;
}

std::vector<double> bin_edges(double lo, double hi, int bins) {
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<double> e;
  for (int i = 0; i <= bins; ++i) e.push_back(lo + (hi - lo) * i / bins);
  return e;
}

void write_count_histogram(const fs::path& dir, const std::string& name, const std::string& title,
                           const std::vector<double>& values) {
  double hi = 0.0;
  for (double v : values) hi = std::max(hi, v);
  const int bins = 20;
  const auto edges = bin_edges(0.0, hi, bins);
  const auto counts = histogram(values, edges.front(), edges.back(), bins);
  std::string csv = csv_row({"bin_lo", "bin_hi", "count"});
  for (int b = 0; b < bins; ++b) {
    csv += csv_row({num(edges[static_cast<std::size_t>(b)]), num(edges[static_cast<std::size_t>(b) + 1]),
                    num(counts[static_cast<std::size_t>(b)])});
  }
  write_file(dir / (name + ".csv"), csv);
  write_file(dir / (name + ".svg"), svg_histogram(title, edges, {{"graphs", counts}}));
}

// Per-graph evaluation shared by metrics and generate.
struct GraphEval {
  std::size_t nodes = 0, edges = 0;
  std::optional<GraphMetrics> topo;
  std::optional<BlockMetrics> blocks;
  std::optional<double> orientation_entropy;
  bool non_planar = false;
};

GraphEval evaluate_graph(const StreetGraph& g, const PipelineConfig& cfg) {
  GraphEval e;
  e.nodes = g.node_count();
  e.edges = g.edge_count();
  if (e.edges == 0) return e;
  e.topo = topo_metrics(g);
  e.orientation_entropy = orientation_histogram(g, cfg.orientation_weighted).entropy;
  try {
    e.blocks = block_metrics(g, {.exclude_boundary = cfg.exclude_boundary});
  } catch (const NonPlanarError&) {
    e.non_planar = true;
  }
  return e;
}

struct MetricDef {
  const char* name;
  std::optional<double> (*get)(const GraphEval&);
};

const std::vector<MetricDef>& report_metrics() {
  static const std::vector<MetricDef> defs{
      {"avg_street_length",
       [](const GraphEval& e) { return e.topo ? std::optional(e.topo->avg_street_length) : std::nullopt; }},
      {"avg_streets_per_node",
       [](const GraphEval& e) { return e.topo ? std::optional(e.topo->avg_streets_per_node) : std::nullopt; }},
      {"avg_circuity", [](const GraphEval& e) { return e.topo ? std::optional(e.topo->avg_circuity) : std::nullopt; }},
      {"avg_block_area",
       [](const GraphEval& e) {
         return e.blocks && e.blocks->blocks ? std::optional(e.blocks->avg_area) : std::nullopt;
       }},
      {"avg_form_factor",
       [](const GraphEval& e) {
         return e.blocks && e.blocks->blocks ? std::optional(e.blocks->avg_form_factor) : std::nullopt;
       }},
      {"avg_compactness",
       [](const GraphEval& e) {
         return e.blocks && e.blocks->blocks ? std::optional(e.blocks->avg_compactness) : std::nullopt;
       }},
  };
  return defs;
}

std::string metrics_csv_header() {
  std::vector<std::string> h{"graph", "nodes", "edges", "planar"};
  for (const auto& m : report_metrics()) h.emplace_back(m.name);
  h.emplace_back("mean_edge_circuity");
  h.emplace_back("orientation_entropy");
  return csv_row(h);
}

std::string metrics_csv_line(const std::string& id, const GraphEval& e) {
  std::vector<std::string> f{id, std::to_string(e.nodes), std::to_string(e.edges), e.non_planar ? "false" : "true"};
  for (const auto& m : report_metrics()) {
    const auto v = m.get(e);
    f.push_back(v ? num(*v) : "");
  }
  f.push_back(e.topo ? num(e.topo->mean_edge_circuity) : "");
  f.push_back(e.orientation_entropy ? num(*e.orientation_entropy) : "");
  return csv_row(f);
}

std::vector<std::size_t> split_of(std::size_t count, const PipelineConfig& cfg, bool train) {
  const auto [tr, te] = split_indices(count, cfg.train_fraction, cfg.split_seed);
  return train ? tr : te;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << content;
  if (!out) throw UsageError("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// preprocess

namespace {

struct PreparedPlace {
  PlaceRecord place;
  GraphFile file;
  TokenSeq tokens;
};

struct FileOutcome {
  std::vector<PreparedPlace> places;
  std::vector<std::string> warnings;
  bool failed = false;
};

FileOutcome preprocess_file(const fs::path& path, const PipelineConfig& cfg) {
  FileOutcome out;
  const auto format = format_from_extension(path.string());
  ParsedExtract parsed;
  try {
    parsed = parse_extract(read_file(path), *format);
  } catch (const Error& e) {
    out.failed = true;
    out.warnings.push_back(path.filename().string() + ": " + e.what());
    return out;
  }
  const auto places = filter_places(parsed.places, cfg.min_population);
  if (places.empty()) {
    out.failed = true;
    out.warnings.push_back(path.filename().string() + ": no town/city place with population above " +
                           std::to_string(cfg.min_population));
    return out;
  }
  for (const auto& place : places) {
    const std::string where = path.filename().string() + " place " + place.id;
    try {
      const auto clipped = clip_box(parsed.streets, place.centroid, cfg.box_half_width);
      const auto center = utm_project(place.centroid);
      const auto lines = project_polylines(clipped, center.zone, center.north);
      const auto merged = simplify_merge(build_graph(lines), cfg.merge_threshold);
      if (merged.edge_count() == 0) {
        out.warnings.push_back(where + ": no street inside the box, skipped");
        continue;
      }
      if (merged.node_count() > static_cast<std::size_t>(cfg.n_cap)) {
        out.warnings.push_back(where + ": " + std::to_string(merged.node_count()) + " nodes exceed n_cap " +
                               std::to_string(cfg.n_cap) + ", skipped");
        continue;
      }
      const auto prepared = prepare_graph(merged);
      PreparedPlace p;
      p.place = place;
      p.file.crs = utm_crs_name(center.zone, center.north);
      p.file.normalization = prepared.normalization;
      p.file.graph = prepared.graph;
      p.tokens = prepared.tokens;
      out.places.push_back(std::move(p));
    } catch (const Error& e) {
      out.warnings.push_back(where + ": " + e.what());
    }
  }
  if (out.places.empty()) out.failed = true;
  return out;
}

}  // namespace

int cmd_preprocess(const PipelineConfig& cfg, const fs::path& out) {
  if (cfg.input.empty()) throw UsageError("--input is required");
  const auto files = list_files(cfg.input, {".geojson", ".json", ".osm", ".xml"});
  if (files.empty()) throw UsageError("no inputs: " + cfg.input + " has no .geojson/.json/.osm/.xml files");

  std::vector<FileOutcome> outcomes(files.size());
  parallel_for(files.size(), cfg.jobs, [&](std::size_t i) { outcomes[i] = preprocess_file(files[i], cfg); });

  std::vector<PreparedPlace> all;
  std::size_t failed = 0;
  for (auto& o : outcomes) {
    for (const auto& w : o.warnings) warn(w);
    if (o.failed) ++failed;
    for (auto& p : o.places) all.push_back(std::move(p));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.place.id < b.place.id; });
  std::set<std::string> seen;
  std::vector<PreparedPlace> unique;
  for (auto& p : all) {
    if (!seen.insert(sanitize_id(p.place.id)).second) {
      warn("duplicate place id " + p.place.id + ", keeping the first");
      continue;
    }
    unique.push_back(std::move(p));
  }
  if (unique.empty()) {
    log_line("error", "every input failed; nothing written");
    return 1;
  }

  std::string tokens, places = csv_row({"id", "name", "country", "kind", "population", "lon", "lat"});
  std::vector<double> node_counts, edge_counts;
  for (const auto& p : unique) {
    write_file(out / "graphs" / (sanitize_id(p.place.id) + ".json"), write_graph_json(p.file));
    tokens += write_token_line({p.place.id, p.tokens});
    places += csv_row({p.place.id, p.place.name, p.place.country, std::string(to_string(p.place.kind)),
                       p.place.population ? std::to_string(*p.place.population) : "", num(p.place.centroid.lon),
                       num(p.place.centroid.lat)});
    node_counts.push_back(static_cast<double>(p.file.graph.node_count()));
    edge_counts.push_back(static_cast<double>(p.file.graph.edge_count()));
  }
  write_file(out / "tokens.jsonl", tokens);
  write_file(out / "places.csv", places);
  write_count_histogram(out / "stats", "node_counts", "Nodes per graph", node_counts);
  write_count_histogram(out / "stats", "edge_counts", "Edges per graph", edge_counts);
  info("preprocess: " + std::to_string(unique.size()) + " graphs from " + std::to_string(files.size()) +
       " files (" + std::to_string(failed) + " files skipped)");
  return 0;
}

// ---------------------------------------------------------------------------
// train

NodeModelConfig node_model_config(const PipelineConfig& cfg) {
  NodeModelConfig mc;
  mc.d_model = cfg.node_d_model;
  mc.layers = cfg.node_layers;
  mc.heads = cfg.node_heads;
  mc.d_ff = cfg.node_d_ff;
  mc.max_nodes = cfg.n_cap;
  mc.feature_mode = parse_feature_mode(cfg.node_features);
  return mc;
}

namespace {

int train_nodes(const PipelineConfig& cfg, const fs::path& out) {
  const auto corpus = load_corpus(cfg);
  const auto train_idx = split_of(corpus.size(), cfg, true);
  const auto test_idx = split_of(corpus.size(), cfg, false);
  std::vector<TokenSeq> train, val;
  for (auto i : train_idx) train.push_back(corpus[i].tokens);
  for (auto i : test_idx) val.push_back(corpus[i].tokens);

  NodeModel model(node_model_config(cfg), cfg.seed);

  NodeTrainConfig tc;
  tc.epochs = cfg.node_epochs;
  tc.batch_size = cfg.node_batch;
  tc.adam.lr = cfg.node_lr;
  tc.seed = cfg.seed;
  const fs::path ckpt = out / "node.ckpt";
  std::string curve = csv_row({"epoch", "steps", "train_nll", "val_nll"});
  const auto result = train_node_model(model, train, val, tc, [&](const NodeEpochStats& s) {
    curve += csv_row({std::to_string(s.epoch), std::to_string(s.steps), num(s.train_nll),
                      s.val_nll ? num(*s.val_nll) : ""});
    info("nodes epoch " + std::to_string(s.epoch) + " train_nll " + num(s.train_nll));
    save_checkpoint(ckpt, model.to_checkpoint());
  });
  save_checkpoint(ckpt, model.to_checkpoint());
  write_file(out / "node_curve.csv", curve);
  std::string split = csv_row({"graph", "set"});
  for (auto i : train_idx) split += csv_row({corpus[i].id, "train"});
  for (auto i : test_idx) split += csv_row({corpus[i].id, "test"});
  write_file(out / "split.csv", split);
  info("nodes: " + std::to_string(result.steps) + " steps, checkpoint " + ckpt.string());
  return 0;
}

std::vector<VgaeGraph> vgae_corpus(const std::vector<CorpusEntry>& corpus, const NodeModel& node) {
  std::vector<VgaeGraph> graphs;
  graphs.reserve(corpus.size());
  for (const auto& e : corpus) graphs.push_back(make_vgae_graph(node, e.file.graph, e.tokens, e.id));
  return graphs;
}

int train_vgae_cmd(const PipelineConfig& cfg, const fs::path& out) {
  const NodeModel node = load_node_model(cfg);
  const auto corpus = load_corpus(cfg);
  const auto graphs = vgae_corpus(corpus, node);

  VgaeModel model({.in_dim = node.config().d_model, .hidden = cfg.vgae_hidden, .latent = cfg.latent_dim}, cfg.seed);
  VgaeTrainConfig tc;
  tc.epochs = cfg.vgae_epochs;
  tc.adam.lr = cfg.vgae_lr;
  // The trainer derives its split from this seed, so it must match the node model's split.
  tc.seed = cfg.split_seed;
  tc.train_fraction = cfg.train_fraction;
  std::string curve = csv_row({"epoch", "train_loss", "val_auc"});
  const fs::path ckpt = out / "vgae.ckpt";
  train_vgae(model, graphs, tc, [&](const VgaeEpochStats& s) {
    curve += csv_row({std::to_string(s.epoch), num(s.train_loss), num(s.val_auc)});
    if (s.epoch % 10 == 0 || s.epoch == 1) {
      info("vgae epoch " + std::to_string(s.epoch) + " loss " + num(s.train_loss) + " auc " + num(s.val_auc));
    }
    save_checkpoint(ckpt, model.to_checkpoint());
  });
  save_checkpoint(ckpt, model.to_checkpoint());
  write_file(out / "vgae_curve.csv", curve);
  info("vgae: checkpoint " + ckpt.string());
  return 0;
}

}  // namespace

int cmd_train(const std::string& kind, const PipelineConfig& cfg, const fs::path& out) {
  if (kind == "nodes") return train_nodes(cfg, out);
  if (kind == "vgae") return train_vgae_cmd(cfg, out);
  throw UsageError("train: kind must be 'nodes' or 'vgae', got '" + kind + "'");
}

// ---------------------------------------------------------------------------
// embed

int cmd_embed(const PipelineConfig& cfg, const fs::path& out) {
  const NodeModel node = load_node_model(cfg);
  const VgaeModel vgae = load_vgae(cfg);
  const auto corpus = load_corpus(cfg);
  const auto graphs = vgae_corpus(corpus, node);

  const Eigen::Index width = static_cast<Eigen::Index>(cfg.n_cap) * vgae.config().latent;
  Eigen::MatrixXd flat(static_cast<Eigen::Index>(graphs.size()), width);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto post = encode(vgae, Tensor::from_eigen(graphs[i].adjacency.normalized),
                             Tensor::from_eigen(graphs[i].features));
    flat.row(static_cast<Eigen::Index>(i)) = pad_flatten(post.mu.to_eigen(), cfg.n_cap);
  }
  const auto train_idx = split_of(graphs.size(), cfg, true);
  if (train_idx.size() < 2) throw UsageError("embed: PCA needs at least 2 training graphs");
  Eigen::MatrixXd train(static_cast<Eigen::Index>(train_idx.size()), width);
  for (std::size_t r = 0; r < train_idx.size(); ++r) {
    train.row(static_cast<Eigen::Index>(r)) = flat.row(static_cast<Eigen::Index>(train_idx[r]));
  }
  Eigen::Index d = cfg.embed_dim;
  const Eigen::Index limit = std::min<Eigen::Index>(train.rows(), width);
  if (d > limit) {
    warn("embed: embed_dim " + std::to_string(d) + " exceeds what " + std::to_string(train.rows()) +
         " training graphs support; using " + std::to_string(limit));
    d = limit;
  }
  const PcaModel pca = pca_fit(train, d);
  const Eigen::MatrixXd emb = pca.transform(flat);

  std::vector<std::string> header{"graph"};
  for (Eigen::Index k = 0; k < d; ++k) header.push_back("e" + std::to_string(k));
  std::string csv = csv_row(header);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    std::vector<std::string> row{graphs[i].id};
    for (Eigen::Index k = 0; k < d; ++k) row.push_back(num(emb(static_cast<Eigen::Index>(i), k)));
    csv += csv_row(row);
  }
  write_file(out / "embeddings.csv", csv);
  std::string var = csv_row({"component", "explained_variance"});
  for (Eigen::Index k = 0; k < d; ++k) var += csv_row({std::to_string(k), num(pca.explained_variance(k))});
  write_file(out / "pca_variance.csv", var);
  info("embed: " + std::to_string(graphs.size()) + " embeddings of size " + std::to_string(d));
  return 0;
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const PipelineConfig& cfg, const fs::path& out) {
  const NodeModel node = load_node_model(cfg);
  const VgaeModel vgae = load_vgae(cfg);
  std::vector<CorpusEntry> corpus;
  if (!cfg.corpus.empty()) corpus = load_corpus(cfg);

  GenerateConfig gc;
  gc.sampling.max_nodes = cfg.n_cap;
  gc.sampling.temperature = cfg.temperature;
  gc.threshold = cfg.threshold;
  gc.bernoulli = cfg.bernoulli;

  struct Sample {
    std::optional<GeneratedNetwork> net;
    std::string failure;
  };
  // Sampling is sequential so the outputs do not depend on --jobs.
  std::vector<Sample> samples(static_cast<std::size_t>(cfg.count));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::uint64_t attempt = 0; attempt < 2 && !samples[i].net; ++attempt) {
      try {
        samples[i].net = generate_network(node, vgae, gc, mix_seed(cfg.seed, i, attempt));
      } catch (const GenerationError& e) {
        samples[i].failure = e.what();
        warn("sample " + std::to_string(i) + " attempt " + std::to_string(attempt + 1) + ": " + e.what());
      }
    }
  }

  std::vector<std::string> gen_ids;
  std::vector<const StreetGraph*> gen_graphs;
  ojson failures = ojson::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "gen-%04zu", i);
    if (!samples[i].net) {
      failures.push_back({{"sample", i}, {"error", samples[i].failure}});
      continue;
    }
    GraphFile f;
    f.crs = "local";
    f.graph = samples[i].net->graph;
    // Generated coordinates are meters centred on the origin; this record maps them back to tokens.
    f.normalization.center = {0.0, 0.0};
    f.normalization.scale = 1.0 / (kGeneratedExtent * std::sqrt(2.0));
    write_file(out / "generated" / (std::string(name) + ".json"), write_graph_json(f));
    write_file(out / "generated" / (std::string(name) + ".svg"), svg_graph(name, f.graph));
    gen_ids.emplace_back(name);
    gen_graphs.push_back(&samples[i].net->graph);
  }

  std::vector<const StreetGraph*> held_graphs;
  if (!corpus.empty()) {
    for (auto i : split_of(corpus.size(), cfg, false)) held_graphs.push_back(&corpus[i].file.graph);
  }

  std::vector<GraphEval> gen_eval(gen_graphs.size()), held_eval(held_graphs.size());
  parallel_for(gen_graphs.size(), cfg.jobs, [&](std::size_t i) { gen_eval[i] = evaluate_graph(*gen_graphs[i], cfg); });
  parallel_for(held_graphs.size(), cfg.jobs,
               [&](std::size_t i) { held_eval[i] = evaluate_graph(*held_graphs[i], cfg); });

  std::string per_graph = metrics_csv_header();
  for (std::size_t i = 0; i < gen_eval.size(); ++i) per_graph += metrics_csv_line(gen_ids[i], gen_eval[i]);
  write_file(out / "generated_metrics.csv", per_graph);

  auto set_summary = [](const std::vector<GraphEval>& evals) {
    std::size_t non_planar = 0, no_edges = 0;
    for (const auto& e : evals) {
      non_planar += e.non_planar;
      no_edges += e.edges == 0;
    }
    return ojson{{"graphs", evals.size()}, {"non_planar", non_planar}, {"no_edges", no_edges}};
  };
  ojson report;
  report["sets"] = {{"generated", set_summary(gen_eval)}, {"held_out", set_summary(held_eval)}};
  report["sets"]["generated"]["failures"] = failures;
  report["metrics"] = ojson::array();

  std::string hist_csv = csv_row({"metric", "set", "bin_lo", "bin_hi", "count"});
  std::string ks_csv = csv_row({"metric", "generated_n", "generated_mean", "held_out_n", "held_out_mean", "ks"});
  double min_circuity = INFINITY;
  for (const auto& m : report_metrics()) {
    std::vector<double> a, b;
    for (const auto& e : gen_eval) {
      if (auto v = m.get(e)) a.push_back(*v);
    }
    for (const auto& e : held_eval) {
      if (auto v = m.get(e)) b.push_back(*v);
    }
    if (std::string(m.name) == "avg_circuity") {
      for (double v : a) min_circuity = std::min(min_circuity, v);
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? NAN : s / static_cast<double>(v.size());
    };
    const bool has_ks = !a.empty() && !b.empty();
    const double ks = has_ks ? ks_statistic(a, b) : NAN;
    ojson entry{{"name", m.name},
                {"generated", {{"n", a.size()}, {"mean", a.empty() ? ojson() : ojson(mean(a))}}},
                {"held_out", {{"n", b.size()}, {"mean", b.empty() ? ojson() : ojson(mean(b))}}},
                {"ks", has_ks ? ojson(ks) : ojson()}};
    report["metrics"].push_back(entry);
    ks_csv += csv_row({m.name, std::to_string(a.size()), a.empty() ? "" : num(mean(a)), std::to_string(b.size()),
                       b.empty() ? "" : num(mean(b)), has_ks ? num(ks) : ""});

    double lo = INFINITY, hi = -INFINITY;
    for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    const int bins = 20;
    const auto edges = bin_edges(lo, hi, bins);
    const auto ca = histogram(a, edges.front(), edges.back(), bins);
    const auto cb = histogram(b, edges.front(), edges.back(), bins);
    for (int k = 0; k < bins; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      hist_csv += csv_row({m.name, "generated", num(edges[kk]), num(edges[kk + 1]), num(ca[kk])});
      hist_csv += csv_row({m.name, "held_out", num(edges[kk]), num(edges[kk + 1]), num(cb[kk])});
    }
    write_file(out / "report" / (std::string(m.name) + ".svg"),
               svg_histogram(m.name, edges, {{"generated", ca}, {"held-out", cb}}));
  }
  const bool gate = !(min_circuity < 1.0 - 1e-9);
  report["circuity_gate"] = {{"min_generated_circuity", std::isfinite(min_circuity) ? ojson(min_circuity) : ojson()},
                             {"pass", gate}};
  write_file(out / "report" / "histograms.csv", hist_csv);
  write_file(out / "report" / "ks.csv", ks_csv);
  write_file(out / "report" / "report.json", report.dump(2) + "\n");
  info("generate: " + std::to_string(gen_ids.size()) + " of " + std::to_string(cfg.count) + " samples written");
  if (!gate) {
    log_line("error", "generated circuity below 1; see report.json");
    return 1;
  }
  return gen_ids.empty() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// metrics

int cmd_metrics(const PipelineConfig& cfg, const fs::path& out) {
  if (cfg.graphs.empty()) throw UsageError("--graphs is required");
  const auto files = list_files(cfg.graphs, {".json"});
  if (files.empty()) throw UsageError("no graph files in " + cfg.graphs);
  std::vector<GraphEval> evals(files.size());
  parallel_for(files.size(), cfg.jobs,
               [&](std::size_t i) { evals[i] = evaluate_graph(read_graph_json(read_file(files[i])).graph, cfg); });
  std::string csv = metrics_csv_header();
  ojson doc = ojson::array();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string id = files[i].stem().string();
    csv += metrics_csv_line(id, evals[i]);
    ojson row{{"graph", id}, {"nodes", evals[i].nodes}, {"edges", evals[i].edges}, {"planar", !evals[i].non_planar}};
    for (const auto& m : report_metrics()) {
      const auto v = m.get(evals[i]);
      row[m.name] = v ? ojson(*v) : ojson();
    }
    if (evals[i].blocks) row["blocks_zero_area_excluded"] = evals[i].blocks->zero_area_excluded;
    doc.push_back(row);
  }
  write_file(out / "metrics.csv", csv);
  write_file(out / "metrics.json", doc.dump(2) + "\n");
  info("metrics: " + std::to_string(files.size()) + " graphs");
  return 0;
}

// ---------------------------------------------------------------------------
// cluster

int cmd_cluster(const PipelineConfig& cfg, const fs::path& out) {
  if (cfg.embeddings.empty()) throw UsageError("--embeddings is required");
  if (cfg.places.empty()) throw UsageError("--places is required");
  const auto table = parse_csv(read_file(cfg.embeddings));
  const auto& rows = table.rows;
  if (rows.size() < 2) throw UsageError("embeddings file has no data rows");
  std::vector<std::string> ids;
  const auto d = static_cast<Eigen::Index>(rows[0].size()) - 1;
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()) - 1, d);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != d + 1) {
      throw ParseError("embeddings row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                       " fields, expected " + std::to_string(d + 1),
                       table.offsets[r]);
    }
    ids.push_back(rows[r][0]);
    for (Eigen::Index k = 0; k < d; ++k) {
      try {
        data(static_cast<Eigen::Index>(r) - 1, k) = std::stod(rows[r][static_cast<std::size_t>(k) + 1]);
      } catch (const std::exception&) {
        throw ParseError("embeddings row " + std::to_string(r + 1) + ": bad number", table.offsets[r]);
      }
    }
  }
  std::map<std::string, std::string> country_by_id;
  const auto places = parse_csv(read_file(cfg.places)).rows;
  for (std::size_t r = 1; r < places.size(); ++r) {
    if (places[r].size() >= 3) country_by_id[places[r][0]] = places[r][2];
  }
  const auto countries = join_countries(ids, country_by_id);

  const int m = static_cast<int>(data.rows());
  if (cfg.k > m) throw UsageError("k = " + std::to_string(cfg.k) + " exceeds " + std::to_string(m) + " embeddings");
  const auto result = kmeans(data, cfg.k, cfg.seed);
  const int k_hi = std::min(cfg.elbow_k_max, m);
  const int k_lo = std::min(cfg.elbow_k_min, k_hi);
  const auto elbow = elbow_curve(data, k_lo, k_hi, cfg.seed, cfg.restarts);
  const auto summary = cluster_summaries(result, countries);

  std::string assign = csv_row({"graph", "cluster"});
  for (std::size_t i = 0; i < ids.size(); ++i) assign += csv_row({ids[i], std::to_string(result.labels[i])});
  write_file(out / "assignments.csv", assign);

  std::string elbow_csv = csv_row({"k", "inertia"});
  std::vector<double> ks, inertias;
  for (const auto& p : elbow.curve) {
    elbow_csv += csv_row({std::to_string(p.k), num(p.inertia)});
    ks.push_back(p.k);
    inertias.push_back(p.inertia);
  }
  write_file(out / "elbow.csv", elbow_csv);
  write_file(out / "elbow.svg", svg_line_chart("Inertia by k (suggested k = " + std::to_string(elbow.suggested_k) + ")",
                                               ks, {{"inertia", inertias}}));

  std::string hist = csv_row({"cluster", "count"});
  std::vector<std::string> labels;
  std::vector<double> counts;
  for (int c = 0; c < cfg.k; ++c) {
    hist += csv_row({std::to_string(c), std::to_string(summary.histogram[static_cast<std::size_t>(c)])});
    labels.push_back(std::to_string(c));
    counts.push_back(summary.histogram[static_cast<std::size_t>(c)]);
  }
  write_file(out / "membership.csv", hist);
  write_file(out / "membership.svg", svg_bar_chart("Cluster membership", labels, counts));

  std::vector<std::string> header{"country", "mode", "mode_tied", "variety"};
  for (int c = 0; c < cfg.k; ++c) header.push_back("count_" + std::to_string(c));
  std::string ctry = csv_row(header);
  std::vector<std::string> ctry_labels;
  std::vector<double> variety;
  for (const auto& s : summary.countries) {
    std::vector<std::string> row{s.country, std::to_string(s.mode), s.mode_tied ? "true" : "false",
                                 std::to_string(s.variety)};
    for (int v : s.counts) row.push_back(std::to_string(v));
    ctry += csv_row(row);
    ctry_labels.push_back(s.country);
    variety.push_back(s.variety);
  }
  write_file(out / "countries.csv", ctry);
  write_file(out / "variety.svg", svg_bar_chart("Cluster variety by country", ctry_labels, variety));

  // One sample graph per cluster: the member closest to its centroid.
  if (!cfg.graphs.empty()) {
    std::string orient = csv_row({"cluster", "graph", "entropy"});
    for (int c = 0; c < cfg.k; ++c) {
      std::optional<std::size_t> best;
      double best_d = INFINITY;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (result.labels[i] != c) continue;
        const double dist = (data.row(static_cast<Eigen::Index>(i)) - result.centroids.row(c)).squaredNorm();
        if (dist < best_d) best_d = dist, best = i;
      }
      if (!best) continue;
      const fs::path gp = fs::path(cfg.graphs) / (sanitize_id(ids[*best]) + ".json");
      if (!fs::exists(gp)) {
        warn("cluster " + std::to_string(c) + ": no graph file " + gp.string());
        continue;
      }
      const auto g = read_graph_json(read_file(gp)).graph;
      if (g.edge_count() == 0) continue;
      const auto h = orientation_histogram(g, cfg.orientation_weighted);
      orient += csv_row({std::to_string(c), ids[*best], num(h.entropy)});
      write_file(out / "orientation" / ("cluster-" + std::to_string(c) + ".svg"),
                 svg_orientation_rose("Cluster " + std::to_string(c) + ": " + ids[*best],
                                      std::vector<double>(h.weights.begin(), h.weights.end())));
    }
    write_file(out / "orientation.csv", orient);
  }
  info("cluster: k = " + std::to_string(cfg.k) + ", inertia " + num(result.inertia) + ", elbow suggests " +
       std::to_string(elbow.suggested_k));
  return 0;
}

// ---------------------------------------------------------------------------
// plot and fetch

int cmd_plot(const PipelineConfig& cfg, const fs::path& out) {
  if (cfg.graphs.empty()) throw UsageError("--graphs is required");
  const auto files = list_files(cfg.graphs, {".json"});
  if (files.empty()) throw UsageError("no graph files in " + cfg.graphs);
  for (const auto& f : files) {
    const auto g = read_graph_json(read_file(f)).graph;
    write_file(out / (f.stem().string() + ".svg"), svg_graph(f.stem().string(), g));
  }
  info("plot: " + std::to_string(files.size()) + " drawings");
  return 0;
}

int cmd_fetch(const PipelineConfig& cfg, const fs::path& out) {
  if (cfg.bbox.empty()) throw UsageError("--bbox south,west,north,east is required");
  OverpassQuery q;
  if (std::sscanf(cfg.bbox.c_str(), "%lf,%lf,%lf,%lf", &q.south, &q.west, &q.north, &q.east) != 4) {
    throw UsageError("--bbox must be four comma-separated numbers");
  }
  const char* env = std::getenv("STREETVAE_OVERPASS_URL");
  const std::string endpoint = env && *env ? env : kDefaultOverpassUrl;
  const std::string body = fetch_overpass(endpoint, q, {.timeout_s = cfg.timeout});
  write_file(out / "extract.osm", body);
  info("fetch: " + std::to_string(body.size()) + " bytes from " + endpoint);
  return 0;
}

}  // namespace streetvae::cli
