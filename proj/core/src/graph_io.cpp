#include "streetvae/graph_io.hpp"

#include <sstream>

#include "json.hpp"
#include "streetvae/error.hpp"

namespace streetvae {

using ojson = nlohmann::ordered_json;

std::string utm_crs_name(int zone, bool north) {
  return "utm/" + std::to_string(zone) + (north ? "N" : "S");
}

std::string write_graph_json(const GraphFile& file) {
  ojson doc;
  doc["crs"] = file.crs;
  doc["normalization"] = {{"center", {file.normalization.center.x, file.normalization.center.y}},
                          {"scale", file.normalization.scale}};
  ojson nodes = ojson::array();
  const auto& pts = file.graph.nodes();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    nodes.push_back({{"id", i}, {"x", pts[i].x}, {"y", pts[i].y}});
  }
  doc["nodes"] = std::move(nodes);
  ojson edges = ojson::array();
  for (const auto& e : file.graph.edges()) {
    ojson je{{"u", e.u}, {"v", e.v}};
    if (e.geometry) {
      ojson geom = ojson::array();
      for (const auto& p : *e.geometry) geom.push_back({p.x, p.y});
      je["geometry"] = std::move(geom);
    }
    edges.push_back(std::move(je));
  }
  doc["edges"] = std::move(edges);
  return doc.dump(1) + "\n";
}

GraphFile read_graph_json(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(std::string("graph json: ") + e.what(), e.byte);
  }
  try {
    GraphFile out;
    out.crs = doc.at("crs").get<std::string>();
    const auto& norm = doc.at("normalization");
    out.normalization.center = {norm.at("center").at(0).get<double>(), norm.at("center").at(1).get<double>()};
    out.normalization.scale = norm.at("scale").get<double>();

    const auto& nodes = doc.at("nodes");
    std::vector<PointXY> pts(nodes.size());
    std::vector<bool> seen(nodes.size(), false);
    for (const auto& n : nodes) {
      const auto id = n.at("id").get<std::int64_t>();
      if (id < 0 || static_cast<std::size_t>(id) >= pts.size() || seen[static_cast<std::size_t>(id)]) {
        throw ParseError("graph json: node ids must be dense 0..N-1 and unique", 0);
      }
      seen[static_cast<std::size_t>(id)] = true;
      pts[static_cast<std::size_t>(id)] = {n.at("x").get<double>(), n.at("y").get<double>()};
    }
    out.graph = StreetGraph(std::move(pts));
    for (const auto& e : doc.at("edges")) {
      const int u = e.at("u").get<int>();
      const int v = e.at("v").get<int>();
      std::optional<std::vector<PointXY>> geom;
      if (auto it = e.find("geometry"); it != e.end()) {
        std::vector<PointXY> line;
        for (const auto& p : *it) line.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        geom = std::move(line);
      }
      if (!out.graph.add_edge(u, v, std::move(geom))) {
        throw ParseError("graph json: self-loop or duplicate edge " + std::to_string(u) + "-" + std::to_string(v), 0);
      }
    }
    out.graph.validate();
    return out;
  } catch (const ojson::exception& e) {
    throw ParseError(std::string("graph json: ") + e.what(), 0);
  } catch (const ArgumentError& e) {
    throw ParseError(std::string("graph json: ") + e.what(), 0);
  }
}

std::string write_token_line(const TokenRecord& record) {
  ojson doc{{"graph", record.graph_id}, {"tokens", record.tokens}};
  return doc.dump() + "\n";
}

std::vector<TokenRecord> read_token_corpus(std::string_view text) {
  std::vector<TokenRecord> out;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    auto line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const auto line = text.substr(line_start, line_end - line_start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        const auto doc = ojson::parse(line);
        out.push_back({doc.at("graph").get<std::string>(), doc.at("tokens").get<TokenSeq>()});
      } catch (const ojson::parse_error& e) {
        throw ParseError(std::string("token corpus: ") + e.what(), line_start + e.byte);
      } catch (const ojson::exception& e) {
        throw ParseError(std::string("token corpus: ") + e.what(), line_start);
      }
    }
    line_start = line_end + 1;
  }
  return out;
}

}  // namespace streetvae
