#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streetvae/geom.hpp"

namespace streetvae {

enum class PlaceKind { town, city };

std::string_view to_string(PlaceKind kind);
std::optional<PlaceKind> parse_place_kind(std::string_view s);

struct PlaceRecord {
  std::string id;
  std::string name;
  std::string country;  // ISO 3166 alpha-2, upper case; empty when unknown
  PlaceKind kind = PlaceKind::town;
  std::optional<std::int64_t> population;
  PointGeo centroid;
};

/// Highway polylines in lon/lat. polylines[i] is labelled highway_tags[i].
struct RawStreetData {
  std::vector<std::vector<PointGeo>> polylines;
  std::vector<std::string> highway_tags;

  std::size_t size() const { return polylines.size(); }
  bool empty() const { return polylines.empty(); }
};

enum class ExtractFormat { geojson, osm_xml };

/// Accepts "geojson" or "osm"/"osm_xml"; anything else is a UsageError.
ExtractFormat parse_extract_format(std::string_view name);

/// Guesses the format from a file extension (.geojson/.json, .osm/.xml).
std::optional<ExtractFormat> format_from_extension(std::string_view path);

struct ParsedExtract {
  RawStreetData streets;
  std::vector<PlaceRecord> places;
};

/// Reads highway polylines and place=town|city points from a document.
/// Throws ParseError (with byte offset) on malformed content.
ParsedExtract parse_extract(std::string_view content, ExtractFormat format);

/// OSM population tags are free text; anything but a plain non-negative
/// integer parses as absent.
std::optional<std::int64_t> parse_population(std::string_view text);

/// Keeps records whose population is present and strictly greater than
/// `min_population`, preserving order.
std::vector<PlaceRecord> filter_places(const std::vector<PlaceRecord>& places,
                                       std::int64_t min_population);

inline constexpr double kDefaultBoxHalfWidth = 500.0;

/// Clips polylines to the axis-aligned square of side 2*half_width_m centered
/// on `centroid`, measured in the centroid's UTM zone. Crossing polylines are
/// cut at the border with an interpolated vertex; outside pieces are dropped.
RawStreetData clip_box(const RawStreetData& data, PointGeo centroid,
                       double half_width_m = kDefaultBoxHalfWidth);

}  // namespace streetvae
