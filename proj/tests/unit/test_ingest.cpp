#include <cmath>
#include <set>
#include <string>

#include "doctest.h"
#include "streetvae/error.hpp"
#include "streetvae/geom.hpp"
#include "streetvae/ingest.hpp"

using namespace streetvae;

namespace {

const char* kGeojson = R"({
  "type": "FeatureCollection",
  "features": [
    {"type": "Feature", "properties": {"highway": "residential"},
     "geometry": {"type": "LineString", "coordinates": [[2.0, 48.0], [2.001, 48.0], [2.002, 48.001]]}},
    {"type": "Feature", "properties": {"highway": "primary"},
     "geometry": {"type": "MultiLineString", "coordinates": [[[2.0, 48.0], [2.0, 48.002]]]}},
    {"type": "Feature", "properties": {"waterway": "river"},
     "geometry": {"type": "LineString", "coordinates": [[2.1, 48.1], [2.2, 48.2]]}},
    {"type": "Feature", "id": "node/42", "properties": {"place": "town", "name": "Sample", "population": "1500",
     "country_code": "fr"}, "geometry": {"type": "Point", "coordinates": [2.0005, 48.0005]}},
    {"type": "Feature", "properties": {"place": "village", "population": "5000"},
     "geometry": {"type": "Point", "coordinates": [2.3, 48.3]}}
  ]
})";

const char* kOsm = R"(<?xml version="1.0" encoding="UTF-8"?>
<osm version="0.6">
  <node id="1" lat="48.0" lon="2.0"/>
  <node id="2" lat="48.0" lon="2.001"/>
  <node id="3" lat="48.001" lon="2.001">
    <tag k="place" v="city"/>
    <tag k="name" v="Ville &amp; Co"/>
    <tag k="population" v="12,000"/>
  </node>
  <node id="4" lat="48.002" lon="2.001"/>
  <way id="10">
    <nd ref="1"/><nd ref="2"/><nd ref="3"/>
    <tag k="highway" v="tertiary"/>
  </way>
  <way id="11">
    <nd ref="3"/><nd ref="4"/>
    <tag k="building" v="yes"/>
  </way>
  <way id="12">
    <nd ref="3"/><nd ref="4"/><nd ref="99"/>
    <tag k="highway" v="service"/>
  </way>
</osm>
)";

PlaceRecord place_with(std::optional<std::int64_t> pop) {
  PlaceRecord p;
  p.population = pop;
  p.id = pop ? std::to_string(*pop) : "none";
  return p;
}

double east_offset(PointGeo p, PointGeo c) {
  const auto cu = utm_project(c);
  return utm_project(p, cu.zone, cu.north).xy.x - cu.xy.x;
}

}  // namespace

TEST_CASE("parse_extract geojson") {
  const auto parsed = parse_extract(kGeojson, ExtractFormat::geojson);
  REQUIRE(parsed.streets.size() == 2);
  CHECK(parsed.streets.polylines[0].size() == 3);
  CHECK(parsed.streets.highway_tags[0] == "residential");
  CHECK(parsed.streets.highway_tags[1] == "primary");
  REQUIRE(parsed.places.size() == 1);
  const auto& p = parsed.places[0];
  CHECK(p.population == 1500);
  CHECK(p.kind == PlaceKind::town);
  CHECK(p.name == "Sample");
  CHECK(p.country == "FR");
  CHECK(p.id == "node/42");

  // Every output coordinate occurs in the source document.
  const std::set<std::pair<double, double>> source{{2.0, 48.0}, {2.001, 48.0}, {2.002, 48.001}, {2.0, 48.002}};
  for (const auto& line : parsed.streets.polylines) {
    for (const auto& v : line) CHECK(source.count({v.lon, v.lat}) == 1);
  }
}

TEST_CASE("parse_extract osm xml") {
  const auto parsed = parse_extract(kOsm, ExtractFormat::osm_xml);
  REQUIRE(parsed.streets.size() == 2);
  CHECK(parsed.streets.polylines[0].size() == 3);
  CHECK(parsed.streets.polylines[1].size() == 2);
  REQUIRE(parsed.places.size() == 1);
  CHECK(parsed.places[0].kind == PlaceKind::city);
  CHECK(parsed.places[0].name == "Ville & Co");
  CHECK_FALSE(parsed.places[0].population.has_value());
  CHECK(parsed.places[0].centroid.lat == 48.001);
}

TEST_CASE("parse_extract errors") {
  SUBCASE("malformed json reports offset") {
    const std::string bad = R"({"type": "FeatureCollection", "features": [ {"type": )";
    try {
      parse_extract(bad, ExtractFormat::geojson);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() > 40);
      CHECK(e.offset() <= bad.size() + 1);
    }
  }
  SUBCASE("malformed xml reports offset") {
    const std::string bad = "<osm><node id=\"1\" lat=\"1\" lon=\"2\"></way></osm>";
    try {
      parse_extract(bad, ExtractFormat::osm_xml);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() >= 34);
      CHECK(e.offset() < bad.size());
    }
  }
  SUBCASE("unknown format") {
    CHECK_THROWS_AS(parse_extract_format("shapefile"), UsageError);
    CHECK(parse_extract_format("osm") == ExtractFormat::osm_xml);
    CHECK(format_from_extension("x/y.geojson") == ExtractFormat::geojson);
    CHECK(format_from_extension("x/y.osm") == ExtractFormat::osm_xml);
    CHECK_FALSE(format_from_extension("x/y.pbf").has_value());
  }
}

TEST_CASE("parse_population") {
  CHECK(parse_population("1500") == 1500);
  CHECK(parse_population(" 42 ") == 42);
  CHECK_FALSE(parse_population("12,000").has_value());
  CHECK_FALSE(parse_population("approx 100").has_value());
  CHECK_FALSE(parse_population("-5").has_value());
  CHECK_FALSE(parse_population("").has_value());
}

TEST_CASE("filter_places") {
  const std::vector<PlaceRecord> three{place_with(1500), place_with(900), place_with(std::nullopt)};
  const auto kept = filter_places(three, 1000);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].population == 1500);

  std::vector<PlaceRecord> ten;
  for (int p = 100; p <= 1000; p += 100) ten.push_back(place_with(p));
  const auto half = filter_places(ten, 500);
  CHECK(half.size() == 5);
  CHECK(half.front().population == 600);

  const std::vector<PlaceRecord> positive{place_with(1), place_with(7)};
  CHECK(filter_places(positive, 0).size() == 2);
  CHECK(filter_places(std::vector<PlaceRecord>{place_with(1000)}, 1000).empty());
  CHECK_THROWS_AS(filter_places(three, -1), ArgumentError);
}

TEST_CASE("clip_box") {
  const PointGeo c{2.35, 48.85};
  const auto cu = utm_project(c);
  auto at = [&](double dx, double dy) { return utm_unproject({cu.xy.x + dx, cu.xy.y + dy}, cu.zone, cu.north); };

  SUBCASE("inside unchanged") {
    RawStreetData d;
    d.polylines.push_back({at(-100, 0), at(100, 50)});
    d.highway_tags.push_back("residential");
    const auto out = clip_box(d, c);
    REQUIRE(out.size() == 1);
    CHECK(out.polylines[0][0].lon == d.polylines[0][0].lon);
    CHECK(out.polylines[0][1].lat == d.polylines[0][1].lat);
  }
  SUBCASE("cut at the border") {
    RawStreetData d;
    d.polylines.push_back({at(0, 0), at(800, 0)});
    d.highway_tags.push_back("residential");
    const auto out = clip_box(d, c, 500.0);
    REQUIRE(out.size() == 1);
    REQUIRE(out.polylines[0].size() == 2);
    CHECK(std::abs(east_offset(out.polylines[0][1], c) - 500.0) < 1e-4);
    CHECK(out.highway_tags[0] == "residential");
  }
  SUBCASE("outside removed") {
    RawStreetData d;
    d.polylines.push_back({at(600, 600), at(900, 700)});
    d.highway_tags.push_back("service");
    CHECK(clip_box(d, c).empty());
  }
  SUBCASE("idempotent") {
    RawStreetData d;
    d.polylines.push_back({at(-900, -20), at(-100, 30), at(200, 700), at(450, -800)});
    d.polylines.push_back({at(-700, 480), at(700, 520), at(700, -520)});
    d.highway_tags = {"a", "b"};
    const auto once = clip_box(d, c);
    const auto twice = clip_box(once, c);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      REQUIRE(once.polylines[i].size() == twice.polylines[i].size());
      for (std::size_t k = 0; k < once.polylines[i].size(); ++k) {
        CHECK(std::abs(once.polylines[i][k].lon - twice.polylines[i][k].lon) < 1e-12);
        CHECK(std::abs(once.polylines[i][k].lat - twice.polylines[i][k].lat) < 1e-12);
      }
    }
    for (const auto& line : once.polylines) {
      for (const auto& v : line) {
        const auto xy = utm_project(v, cu.zone, cu.north).xy;
        CHECK(std::abs(xy.x - cu.xy.x) <= 500.0 + 1e-4);
        CHECK(std::abs(xy.y - cu.xy.y) <= 500.0 + 1e-4);
      }
    }
  }
  SUBCASE("bad half width") {
    CHECK_THROWS_AS(clip_box(RawStreetData{}, c, 0.0), ArgumentError);
  }
}
