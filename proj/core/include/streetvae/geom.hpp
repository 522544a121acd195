#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace streetvae {

/// WGS84 geographic coordinate in degrees.
struct PointGeo {
  double lon = 0.0;
  double lat = 0.0;
  friend bool operator==(const PointGeo&, const PointGeo&) = default;
};

/// Planar coordinate: meters in a projected frame, or unitless after normalization.
struct PointXY {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PointXY&, const PointXY&) = default;
};

inline PointXY operator+(PointXY a, PointXY b) { return {a.x + b.x, a.y + b.y}; }
inline PointXY operator-(PointXY a, PointXY b) { return {a.x - b.x, a.y - b.y}; }
inline PointXY operator*(double s, PointXY p) { return {s * p.x, s * p.y}; }
double distance(PointXY a, PointXY b);

/// Pair of 8-bit coordinate bins.
struct QuantizedPoint {
  std::uint8_t qx = 0;
  std::uint8_t qy = 0;
  friend bool operator==(const QuantizedPoint&, const QuantizedPoint&) = default;
};

struct BBox {
  PointXY min;
  PointXY max;
  PointXY center() const { return {(min.x + max.x) / 2.0, (min.y + max.y) / 2.0}; }
  double diagonal() const;
};

BBox bounding_box(std::span<const PointXY> points);

// ---------------------------------------------------------------------------
// UTM

struct UtmPoint {
  PointXY xy;  // easting, northing
  int zone = 0;
  bool north = true;
};

/// Zone derived from longitude (1..60), no Norway/Svalbard exceptions.
int utm_zone_for(double lon);

/// WGS84 -> UTM via the 6th-order Krüger series. When `zone` is absent it is
/// derived from the point's longitude; `north` selects the false northing and
/// defaults to the hemisphere of the point.
UtmPoint utm_project(PointGeo p, std::optional<int> zone = std::nullopt,
                     std::optional<bool> north = std::nullopt);

/// Inverse of utm_project for a given zone and hemisphere.
PointGeo utm_unproject(PointXY easting_northing, int zone, bool north);

// ---------------------------------------------------------------------------
// Normalization and quantization

/// Maps original -> normalized as (p - center) * scale.
struct NormalizationRecord {
  PointXY center;
  double scale = 1.0;

  PointXY apply(PointXY p) const { return scale * (p - center); }
  PointXY invert(PointXY q) const { return (1.0 / scale) * q + center; }
};

struct NormalizedPoints {
  std::vector<PointXY> points;
  NormalizationRecord record;
};

/// Centers the bounding box at the origin and scales its diagonal to 1.
/// Throws ArgumentError when all points coincide.
NormalizedPoints center_and_normalize(std::span<const PointXY> points);

inline constexpr int kQuantBins = 256;

std::uint8_t quantize_value(double v);
double dequantize_value(std::uint8_t q);
QuantizedPoint quantize(PointXY p);
PointXY dequantize(QuantizedPoint q);

// ---------------------------------------------------------------------------
// Primitives

double polyline_length(std::span<const PointXY> vertices);

/// Compass bearing in degrees [0, 360): 0 = +y (north), 90 = +x (east).
double bearing(PointXY a, PointXY b);

/// Shoelace signed area (positive for counter-clockwise rings). The ring may be
/// closed explicitly (first == last) or implicitly.
double signed_area(std::span<const PointXY> ring);

struct AreaPerimeter {
  double area = 0.0;
  double perimeter = 0.0;
};

AreaPerimeter polygon_area_perimeter(std::span<const PointXY> ring);

struct Circle {
  PointXY center;
  double radius = 0.0;
  bool contains(PointXY p, double tol = 1e-9) const;
};

/// Smallest circle enclosing all points (Welzl, deterministic shuffle).
Circle min_enclosing_circle(std::span<const PointXY> points, std::uint64_t seed = 0x5eed);

}  // namespace streetvae
