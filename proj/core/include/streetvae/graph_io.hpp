#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "streetvae/geom.hpp"
#include "streetvae/graph.hpp"

namespace streetvae {

/// On-disk street graph: metric node coordinates plus the normalization that
/// maps them into the unit-diagonal frame used for tokenization.
struct GraphFile {
  std::string crs;  // "utm/<zone><N|S>" or "local"
  NormalizationRecord normalization;
  StreetGraph graph;
};

std::string utm_crs_name(int zone, bool north);

/// Serializes with keys in the order crs, normalization, nodes, edges.
std::string write_graph_json(const GraphFile& file);
GraphFile read_graph_json(std::string_view text);

struct TokenRecord {
  std::string graph_id;
  TokenSeq tokens;
};

/// One `{"graph": id, "tokens": [...]}` object per line.
std::string write_token_line(const TokenRecord& record);
std::vector<TokenRecord> read_token_corpus(std::string_view text);

}  // namespace streetvae
