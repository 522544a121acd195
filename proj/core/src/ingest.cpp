#include "streetvae/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "json.hpp"
#include "streetvae/error.hpp"
#include "xml_scan.hpp"

namespace streetvae {

using json = nlohmann::json;

std::string_view to_string(PlaceKind kind) { return kind == PlaceKind::city ? "city" : "town"; }

std::optional<PlaceKind> parse_place_kind(std::string_view s) {
  if (s == "town") return PlaceKind::town;
  if (s == "city") return PlaceKind::city;
  return std::nullopt;
}

ExtractFormat parse_extract_format(std::string_view name) {
  if (name == "geojson") return ExtractFormat::geojson;
  if (name == "osm" || name == "osm_xml") return ExtractFormat::osm_xml;
  throw UsageError("unknown extract format '" + std::string(name) + "' (expected geojson or osm_xml)");
}

std::optional<ExtractFormat> format_from_extension(std::string_view path) {
  auto ends_with = [&](std::string_view suffix) { return path.ends_with(suffix); };
  if (ends_with(".geojson") || ends_with(".json")) return ExtractFormat::geojson;
  if (ends_with(".osm") || ends_with(".xml")) return ExtractFormat::osm_xml;
  return std::nullopt;
}

std::optional<std::int64_t> parse_population(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  for (char c : text) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  }
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

namespace {

constexpr const char* kCountryKeys[] = {"country_code", "ISO3166-1:alpha2", "is_in:country_code",
                                        "addr:country", "country"};

bool valid_geo(PointGeo p) {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180.0 && p.lon <= 180.0 &&
         p.lat >= -90.0 && p.lat <= 90.0;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

/// Removes consecutive duplicates; returns false if fewer than 2 vertices remain.
bool tidy_polyline(std::vector<PointGeo>& line) {
  line.erase(std::unique(line.begin(), line.end()), line.end());
  return line.size() >= 2;
}

void add_polyline(RawStreetData& out, std::vector<PointGeo> line, const std::string& tag) {
  if (!tidy_polyline(line)) return;
  out.polylines.push_back(std::move(line));
  out.highway_tags.push_back(tag);
}

// ---------------------------------------------------------------------------
// GeoJSON

std::optional<std::string> json_string_prop(const json& props, const char* key) {
  if (!props.is_object()) return std::nullopt;
  const auto it = props.find(key);
  if (it == props.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer() || it->is_number_unsigned()) return std::to_string(it->get<std::int64_t>());
  return std::nullopt;
}

PointGeo json_position(const json& pos) {
  if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
    throw ParseError("geojson: position must be [lon, lat]", 0);
  }
  PointGeo p{pos[0].get<double>(), pos[1].get<double>()};
  if (!valid_geo(p)) throw ParseError("geojson: coordinate out of WGS84 range", 0);
  return p;
}

std::vector<PointGeo> json_line(const json& coords) {
  if (!coords.is_array()) throw ParseError("geojson: LineString coordinates must be an array", 0);
  std::vector<PointGeo> line;
  line.reserve(coords.size());
  for (const auto& pos : coords) line.push_back(json_position(pos));
  return line;
}

std::string feature_id(const json& feature, const json& props, std::size_t index) {
  if (auto it = feature.find("id"); it != feature.end()) {
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer() || it->is_number_unsigned()) return std::to_string(it->get<std::int64_t>());
  }
  for (const char* key : {"@id", "osm_id", "id"}) {
    if (auto v = json_string_prop(props, key)) return *v;
  }
  return "feature-" + std::to_string(index);
}

ParsedExtract parse_geojson(std::string_view content) {
  json doc;
  try {
    doc = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("geojson: ") + e.what(), e.byte);
  }
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection") {
    throw ParseError("geojson: top-level object must be a FeatureCollection", 0);
  }
  const auto features = doc.find("features");
  if (features == doc.end() || !features->is_array()) {
    throw ParseError("geojson: FeatureCollection without a features array", 0);
  }

  ParsedExtract out;
  std::size_t index = 0;
  for (const auto& feature : *features) {
    const std::size_t this_index = index++;
    if (!feature.is_object()) throw ParseError("geojson: feature is not an object", 0);
    const json empty = json::object();
    const auto props_it = feature.find("properties");
    const json& props = (props_it != feature.end() && props_it->is_object()) ? *props_it : empty;
    const auto geom_it = feature.find("geometry");
    if (geom_it == feature.end() || geom_it->is_null()) continue;
    const json& geometry = *geom_it;
    if (!geometry.is_object()) throw ParseError("geojson: geometry is not an object", 0);
    const std::string type = geometry.value("type", "");
    const auto coords = geometry.find("coordinates");

    if (type == "LineString" || type == "MultiLineString") {
      const auto highway = json_string_prop(props, "highway");
      if (!highway) continue;
      if (coords == geometry.end()) throw ParseError("geojson: geometry without coordinates", 0);
      if (type == "LineString") {
        add_polyline(out.streets, json_line(*coords), *highway);
      } else {
        if (!coords->is_array()) throw ParseError("geojson: MultiLineString coordinates must be an array", 0);
        for (const auto& part : *coords) add_polyline(out.streets, json_line(part), *highway);
      }
    } else if (type == "Point") {
      const auto place = json_string_prop(props, "place");
      if (!place) continue;
      const auto kind = parse_place_kind(*place);
      if (!kind) continue;
      if (coords == geometry.end()) throw ParseError("geojson: geometry without coordinates", 0);
      PlaceRecord rec;
      rec.centroid = json_position(*coords);
      rec.kind = *kind;
      rec.id = feature_id(feature, props, this_index);
      rec.name = json_string_prop(props, "name").value_or("");
      for (const char* key : kCountryKeys) {
        if (auto c = json_string_prop(props, key)) {
          rec.country = upper(*c);
          break;
        }
      }
      if (auto pop = json_string_prop(props, "population")) rec.population = parse_population(*pop);
      out.places.push_back(std::move(rec));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// OSM XML

double parse_coord(const detail::XmlEvent& ev, const char* key) {
  const std::string* s = ev.attribute(key);
  if (!s) throw ParseError(std::string("osm xml: node without ") + key, ev.offset);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
  if (ec != std::errc{} || ptr != s->data() + s->size() || !std::isfinite(v)) {
    throw ParseError(std::string("osm xml: bad ") + key + " value '" + *s + "'", ev.offset);
  }
  return v;
}

ParsedExtract parse_osm_xml(std::string_view content) {
  struct Way {
    std::vector<std::string> refs;
    std::unordered_map<std::string, std::string> tags;
  };
  struct Node {
    std::string id;
    PointGeo pos;
    std::unordered_map<std::string, std::string> tags;
  };

  std::unordered_map<std::string, PointGeo> node_pos;
  std::vector<Node> tagged_nodes;
  std::vector<Way> ways;

  detail::XmlScanner scanner(content);
  enum class Ctx { none, node, way, other } ctx = Ctx::none;
  Node cur_node;
  Way cur_way;
  int depth = 0;
  int ctx_depth = -1;

  while (true) {
    auto ev = scanner.next();
    if (ev.kind == detail::XmlEvent::Kind::end_of_document) break;
    if (ev.kind == detail::XmlEvent::Kind::close) {
      --depth;
      if (depth == ctx_depth) {
        if (ctx == Ctx::node && !cur_node.tags.empty()) tagged_nodes.push_back(std::move(cur_node));
        if (ctx == Ctx::way) ways.push_back(std::move(cur_way));
        ctx = Ctx::none;
        ctx_depth = -1;
      }
      continue;
    }

    if (ev.name == "node" && ctx == Ctx::none) {
      const std::string* id = ev.attribute("id");
      if (!id) throw ParseError("osm xml: node without id", ev.offset);
      PointGeo p{parse_coord(ev, "lon"), parse_coord(ev, "lat")};
      if (!valid_geo(p)) throw ParseError("osm xml: node coordinate out of WGS84 range", ev.offset);
      node_pos[*id] = p;
      cur_node = Node{*id, p, {}};
      if (!ev.self_closing) {
        ctx = Ctx::node;
        ctx_depth = depth;
      }
    } else if (ev.name == "way" && ctx == Ctx::none) {
      cur_way = Way{};
      if (!ev.self_closing) {
        ctx = Ctx::way;
        ctx_depth = depth;
      }
    } else if (ev.name == "tag" && (ctx == Ctx::node || ctx == Ctx::way)) {
      const std::string* k = ev.attribute("k");
      const std::string* v = ev.attribute("v");
      if (!k || !v) throw ParseError("osm xml: tag without k/v", ev.offset);
      (ctx == Ctx::node ? cur_node.tags : cur_way.tags)[*k] = *v;
    } else if (ev.name == "nd" && ctx == Ctx::way) {
      const std::string* ref = ev.attribute("ref");
      if (!ref) throw ParseError("osm xml: nd without ref", ev.offset);
      cur_way.refs.push_back(*ref);
    } else if (ctx == Ctx::none && depth > 0 && ev.name == "relation" && !ev.self_closing) {
      ctx = Ctx::other;
      ctx_depth = depth;
    }
    if (!ev.self_closing) ++depth;
  }

  ParsedExtract out;
  for (const auto& way : ways) {
    const auto hw = way.tags.find("highway");
    if (hw == way.tags.end()) continue;
    std::vector<PointGeo> line;
    line.reserve(way.refs.size());
    for (const auto& ref : way.refs) {
      // Extracts cut at a bounding box routinely reference nodes outside it.
      if (auto it = node_pos.find(ref); it != node_pos.end()) line.push_back(it->second);
    }
    add_polyline(out.streets, std::move(line), hw->second);
  }
  for (auto& node : tagged_nodes) {
    const auto place = node.tags.find("place");
    if (place == node.tags.end()) continue;
    const auto kind = parse_place_kind(place->second);
    if (!kind) continue;
    PlaceRecord rec;
    rec.id = node.id;
    rec.kind = *kind;
    rec.centroid = node.pos;
    if (auto it = node.tags.find("name"); it != node.tags.end()) rec.name = it->second;
    for (const char* key : kCountryKeys) {
      if (auto it = node.tags.find(key); it != node.tags.end()) {
        rec.country = upper(it->second);
        break;
      }
    }
    if (auto it = node.tags.find("population"); it != node.tags.end()) {
      rec.population = parse_population(it->second);
    }
    out.places.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

ParsedExtract parse_extract(std::string_view content, ExtractFormat format) {
  switch (format) {
    case ExtractFormat::geojson:
      return parse_geojson(content);
    case ExtractFormat::osm_xml:
      return parse_osm_xml(content);
  }
  throw UsageError("unknown extract format");
}

std::vector<PlaceRecord> filter_places(const std::vector<PlaceRecord>& places, std::int64_t min_population) {
  if (min_population < 0) throw ArgumentError("filter_places: min_population must be >= 0");
  std::vector<PlaceRecord> out;
  for (const auto& p : places) {
    if (p.population && *p.population > min_population) out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clipping

namespace {

constexpr double kClipTol = 1e-6;  // meters

struct ProjectedLine {
  std::vector<PointGeo> geo;
  std::vector<PointXY> xy;
};

/// Liang-Barsky parametric clip of segment a->b against [lo, hi]. Returns
/// false when the segment misses the box.
bool clip_segment(PointXY a, PointXY b, PointXY lo, PointXY hi, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1.0;
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x - lo.x, hi.x - a.x, a.y - lo.y, hi.y - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      if (r > t1) return false;
      t0 = std::max(t0, r);
    } else {
      if (r < t0) return false;
      t1 = std::min(t1, r);
    }
  }
  return t0 <= t1;
}

}  // namespace

RawStreetData clip_box(const RawStreetData& data, PointGeo centroid, double half_width_m) {
  if (!(half_width_m > 0.0)) throw ArgumentError("clip_box: half_width_m must be > 0");
  const UtmPoint c = utm_project(centroid);
  const PointXY lo{c.xy.x - half_width_m - kClipTol, c.xy.y - half_width_m - kClipTol};
  const PointXY hi{c.xy.x + half_width_m + kClipTol, c.xy.y + half_width_m + kClipTol};

  RawStreetData out;
  for (std::size_t li = 0; li < data.polylines.size(); ++li) {
    const auto& line = data.polylines[li];
    std::vector<PointXY> xy;
    xy.reserve(line.size());
    for (const auto& g : line) xy.push_back(utm_project(g, c.zone, c.north).xy);

    std::vector<PointGeo> piece;
    auto flush = [&] {
      add_polyline(out, std::move(piece), data.highway_tags[li]);
      piece.clear();
    };
    auto vertex_at = [&](std::size_t i, double t) -> PointGeo {
      if (t == 0.0) return line[i];
      if (t == 1.0) return line[i + 1];
      const PointXY p = xy[i] + t * (xy[i + 1] - xy[i]);
      return utm_unproject(p, c.zone, c.north);
    };

    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      double t0 = 0.0, t1 = 1.0;
      if (!clip_segment(xy[i], xy[i + 1], lo, hi, t0, t1)) {
        if (!piece.empty()) flush();
        continue;
      }
      if (t0 > 0.0 && !piece.empty()) flush();
      if (piece.empty()) piece.push_back(vertex_at(i, t0));
      piece.push_back(vertex_at(i, t1));
      if (t1 < 1.0) flush();
    }
    if (!piece.empty()) flush();
  }
  return out;
}

}  // namespace streetvae
