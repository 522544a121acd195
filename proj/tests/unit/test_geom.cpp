#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "doctest.h"
#include "streetvae/error.hpp"
#include "streetvae/geom.hpp"

using namespace streetvae;

namespace {

struct UtmVector {
  double lon, lat;
  int zone;
  bool north;
  double easting, northing;
};

// Reference values produced with PROJ (+proj=utm +ellps=WGS84).
const UtmVector kUtmVectors[] = {
    {3.0, 0.0, 31, true, 500000.0000, 0.0000},
    {2.2945, 48.8583, 31, true, 448251.8983, 5411943.7938},
    {-74.0445, 40.6892, 18, true, 580735.8707, 4504695.1652},
    {151.2153, -33.8568, 56, false, 334900.5697, 6252288.7529},
    {-0.1276, 51.5072, 30, true, 699330.9839, 5710142.0666},
    {139.6917, 35.6895, 54, true, 381622.2300, 3950298.9079},
    {10.5, 83.5, 32, true, 518955.6610, 9272522.4195},
};

// Smallest enclosing circle by exhaustive search over pairs and triples.
Circle brute_force_circle(const std::vector<PointXY>& pts) {
  auto covers = [&](const Circle& c) {
    for (const auto& p : pts) {
      if (distance(p, c.center) > c.radius + 1e-9) return false;
    }
    return true;
  };
  Circle best{pts[0], std::numeric_limits<double>::infinity()};
  if (pts.size() == 1) return {pts[0], 0.0};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      Circle c{0.5 * (pts[i] + pts[j]), distance(pts[i], pts[j]) / 2.0};
      if (c.radius < best.radius && covers(c)) best = c;
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const PointXY a = pts[i], b = pts[j], q = pts[k];
        const double d = 2.0 * (a.x * (b.y - q.y) + b.x * (q.y - a.y) + q.x * (a.y - b.y));
        if (std::abs(d) < 1e-12) continue;
        const double a2 = a.x * a.x + a.y * a.y, b2 = b.x * b.x + b.y * b.y, q2 = q.x * q.x + q.y * q.y;
        const PointXY center{(a2 * (b.y - q.y) + b2 * (q.y - a.y) + q2 * (a.y - b.y)) / d,
                             (a2 * (q.x - b.x) + b2 * (a.x - q.x) + q2 * (b.x - a.x)) / d};
        Circle cc{center, distance(center, a)};
        if (cc.radius < best.radius && covers(cc)) best = cc;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("utm_project matches reference vectors") {
  for (const auto& v : kUtmVectors) {
    CAPTURE(v.lon);
    CAPTURE(v.lat);
    const UtmPoint p = utm_project({v.lon, v.lat});
    CHECK(p.zone == v.zone);
    CHECK(p.north == v.north);
    CHECK(std::abs(p.xy.x - v.easting) < 1e-3);
    CHECK(std::abs(p.xy.y - v.northing) < 1e-3);
  }
}

TEST_CASE("utm_unproject inverts utm_project") {
  for (const auto& v : kUtmVectors) {
    const UtmPoint p = utm_project({v.lon, v.lat});
    const PointGeo back = utm_unproject(p.xy, p.zone, p.north);
    CHECK(std::abs(back.lon - v.lon) < 1e-9);
    CHECK(std::abs(back.lat - v.lat) < 1e-9);
  }
}

TEST_CASE("utm northing spacing near the equator") {
  const auto a = utm_project({3.0, 0.0});
  const auto b = utm_project({3.0, 0.001});
  CHECK(std::abs((b.xy.y - a.xy.y) - 110.6) < 0.5);
  const auto again = utm_project({3.0, 0.001});
  CHECK(again.xy.x == b.xy.x);
  CHECK(again.xy.y == b.xy.y);
}

TEST_CASE("utm_project forced zone and validity band") {
  const auto p = utm_project({2.2945, 48.8583}, 30);
  CHECK(p.zone == 30);
  CHECK(p.xy.x > 800000.0);
  CHECK_THROWS_AS(utm_project({0.0, 84.5}), ProjectionError);
  CHECK_THROWS_AS(utm_project({0.0, -85.0}), ProjectionError);
  CHECK(utm_zone_for(-180.0) == 1);
  CHECK(utm_zone_for(179.999) == 60);
}

TEST_CASE("center_and_normalize examples") {
  SUBCASE("3-4-5") {
    const std::vector<PointXY> pts{{0, 0}, {3, 4}};
    const auto n = center_and_normalize(pts);
    CHECK(n.points[0].x == doctest::Approx(-0.3));
    CHECK(n.points[0].y == doctest::Approx(-0.4));
    CHECK(n.points[1].x == doctest::Approx(0.3));
    CHECK(n.points[1].y == doctest::Approx(0.4));
    CHECK(n.record.scale == doctest::Approx(0.2));
    CHECK(n.record.center.x == doctest::Approx(1.5));
    CHECK(n.record.center.y == doctest::Approx(2.0));
  }
  SUBCASE("unit segment") {
    const std::vector<PointXY> pts{{0, 0}, {1, 0}};
    const auto n = center_and_normalize(pts);
    CHECK(n.points[0].x == doctest::Approx(-0.5));
    CHECK(n.points[1].x == doctest::Approx(0.5));
    CHECK(n.points[1].y == doctest::Approx(0.0));
  }
  SUBCASE("fixed point") {
    const std::vector<PointXY> pts{{-0.3, -0.4}, {0.3, 0.4}};
    const auto n = center_and_normalize(pts);
    CHECK(n.record.scale == doctest::Approx(1.0));
    CHECK(std::abs(n.record.center.x) < 1e-12);
    CHECK(n.points[1].x == doctest::Approx(0.3));
  }
  SUBCASE("degenerate") {
    const std::vector<PointXY> pts{{2, 2}, {2, 2}};
    CHECK_THROWS_AS(center_and_normalize(pts), ArgumentError);
  }
}

TEST_CASE("center_and_normalize properties") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-5000.0, 5000.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<PointXY> pts(20);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const auto n = center_and_normalize(pts);
    const BBox box = bounding_box(n.points);
    CHECK(std::abs(box.center().x) < 1e-9);
    CHECK(std::abs(box.center().y) < 1e-9);
    CHECK(std::abs(box.diagonal() - 1.0) < 1e-9);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const PointXY back = n.record.invert(n.points[i]);
      CHECK(std::abs(back.x - pts[i].x) <= 1e-9 * std::max(1.0, std::abs(pts[i].x)));
      CHECK(std::abs(back.y - pts[i].y) <= 1e-9 * std::max(1.0, std::abs(pts[i].y)));
    }
  }
}

TEST_CASE("quantization") {
  CHECK(quantize_value(0.0) == 128);
  CHECK(dequantize_value(128) == 0.001953125);
  CHECK(quantize_value(-0.5) == 0);
  CHECK(quantize_value(0.5) == 255);
  CHECK(quantize_value(-3.0) == 0);
  CHECK(quantize_value(3.0) == 255);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng);
    REQUIRE(std::abs(dequantize_value(quantize_value(v)) - v) <= 1.0 / 512.0);
  }
  const auto q = quantize({0.0, -0.5});
  CHECK(q.qx == 128);
  CHECK(q.qy == 0);
}

TEST_CASE("polyline_length") {
  const std::vector<PointXY> a{{0, 0}, {100, 0}};
  const std::vector<PointXY> b{{0, 0}, {100, 0}, {100, 100}};
  const std::vector<PointXY> c{{0, 0}, {3, 4}};
  CHECK(polyline_length(a) == 100.0);
  CHECK(polyline_length(b) == 200.0);
  CHECK(polyline_length(c) == 5.0);
  const std::vector<PointXY> one{{0, 0}};
  CHECK_THROWS_AS(polyline_length(one), ArgumentError);
}

TEST_CASE("bearing") {
  CHECK(bearing({0, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(bearing({0, 0}, {1, 1}) == doctest::Approx(45.0));
  CHECK(bearing({0, 0}, {-1, 0}) == doctest::Approx(270.0));
  CHECK_THROWS_AS(bearing({1, 1}, {1, 1}), ArgumentError);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 200; ++i) {
    const PointXY a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const double fwd = bearing(a, b);
    CHECK(fwd >= 0.0);
    CHECK(fwd < 360.0);
    const double expect = std::fmod(bearing(b, a) + 180.0, 360.0);
    const double diff = std::abs(fwd - expect);
    CHECK(std::min(diff, 360.0 - diff) < 1e-9);
  }
}

TEST_CASE("polygon_area_perimeter") {
  const std::vector<PointXY> unit{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto ap = polygon_area_perimeter(unit);
  CHECK(ap.area == 1.0);
  CHECK(ap.perimeter == 4.0);
  const std::vector<PointXY> big{{0, 0}, {100, 0}, {100, 100}, {0, 100}, {0, 0}};
  ap = polygon_area_perimeter(big);
  CHECK(ap.area == 10000.0);
  CHECK(ap.perimeter == 400.0);
  const std::vector<PointXY> flat{{0, 0}, {1, 0}, {2, 0}};
  CHECK(polygon_area_perimeter(flat).area == 0.0);
  const std::vector<PointXY> two{{0, 0}, {1, 0}};
  CHECK_THROWS_AS(polygon_area_perimeter(two), ArgumentError);

  std::vector<PointXY> rotated{unit[2], unit[3], unit[0], unit[1]};
  CHECK(signed_area(rotated) == doctest::Approx(signed_area(unit)));
  std::vector<PointXY> reversed(unit.rbegin(), unit.rend());
  CHECK(signed_area(reversed) == doctest::Approx(-signed_area(unit)));
}

TEST_CASE("min_enclosing_circle examples") {
  const std::vector<PointXY> two{{0, 0}, {2, 0}};
  auto c = min_enclosing_circle(two);
  CHECK(c.center.x == doctest::Approx(1.0));
  CHECK(c.center.y == doctest::Approx(0.0));
  CHECK(c.radius == doctest::Approx(1.0));
  const std::vector<PointXY> tri{{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2.0}};
  c = min_enclosing_circle(tri);
  CHECK(c.radius == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(c.radius == doctest::Approx(brute_force_circle(tri).radius).epsilon(1e-12));
  const std::vector<PointXY> one{{4, 5}};
  c = min_enclosing_circle(one);
  CHECK(c.radius == 0.0);
  CHECK_THROWS_AS(min_enclosing_circle(std::vector<PointXY>{}), ArgumentError);
}

TEST_CASE("min_enclosing_circle agrees with brute force") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_int_distribution<int> count(1, 12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<PointXY> pts(static_cast<std::size_t>(count(rng)));
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Circle fast = min_enclosing_circle(pts);
    const Circle slow = brute_force_circle(pts);
    CHECK(fast.radius == doctest::Approx(slow.radius).epsilon(1e-9));
    for (const auto& p : pts) CHECK(distance(p, fast.center) <= fast.radius + 1e-9);
  }
}
