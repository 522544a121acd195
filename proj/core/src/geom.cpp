#include "streetvae/geom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "streetvae/error.hpp"

namespace streetvae {

double distance(PointXY a, PointXY b) { return std::hypot(a.x - b.x, a.y - b.y); }

double BBox::diagonal() const { return std::hypot(max.x - min.x, max.y - min.y); }

BBox bounding_box(std::span<const PointXY> points) {
  if (points.empty()) throw ArgumentError("bounding_box: empty point set");
  BBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
  }
  return box;
}

// ---------------------------------------------------------------------------
// UTM: Krüger series in the third flattening, 6th order.

namespace {

constexpr double kWgs84A = 6378137.0;
constexpr double kWgs84F = 1.0 / 298.257223563;
constexpr double kUtmK0 = 0.9996;
constexpr double kFalseEasting = 500000.0;
constexpr double kFalseNorthingSouth = 10000000.0;
constexpr double kDeg = std::numbers::pi / 180.0;

struct KruegerSeries {
  double n;
  double e;              // first eccentricity
  double rectifying_a;   // A, radius of the rectifying sphere
  std::array<double, 6> alpha;
  std::array<double, 6> beta;
};

KruegerSeries make_series() {
  KruegerSeries s{};
  const double n = kWgs84F / (2.0 - kWgs84F);
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  s.n = n;
  s.e = std::sqrt(kWgs84F * (2.0 - kWgs84F));
  s.rectifying_a = kWgs84A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
  s.alpha = {
      n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 +
          7891.0 * n6 / 37800.0,
      13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 -
          1983433.0 * n6 / 1935360.0,
      61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
      49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
      34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
      212378941.0 * n6 / 319334400.0,
  };
  s.beta = {
      n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0 +
          96199.0 * n6 / 604800.0,
      n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0,
      17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
      4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
      4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
      20648693.0 * n6 / 638668800.0,
  };
  return s;
}

const KruegerSeries& series() {
  static const KruegerSeries s = make_series();
  return s;
}

double central_meridian(int zone) { return (zone - 1) * 6.0 - 180.0 + 3.0; }

void check_zone(int zone) {
  if (zone < 1 || zone > 60) throw ProjectionError("UTM zone out of range: " + std::to_string(zone));
}

}  // namespace

int utm_zone_for(double lon) {
  if (!(lon >= -180.0 && lon <= 180.0)) throw ProjectionError("longitude out of range");
  int zone = static_cast<int>(std::floor((lon + 180.0) / 6.0)) + 1;
  return std::clamp(zone, 1, 60);
}

UtmPoint utm_project(PointGeo p, std::optional<int> zone, std::optional<bool> north) {
  if (!(std::abs(p.lat) <= 84.0)) {
    throw ProjectionError("latitude " + std::to_string(p.lat) + " outside UTM band [-84, 84]");
  }
  const int z = zone.value_or(utm_zone_for(p.lon));
  check_zone(z);
  const bool hemisphere_north = north.value_or(p.lat >= 0.0);
  const auto& s = series();

  double dlon = p.lon - central_meridian(z);
  dlon = std::remainder(dlon, 360.0);
  const double phi = p.lat * kDeg;
  const double lam = dlon * kDeg;

  const double sin_phi = std::sin(phi);
  const double t = std::sinh(std::atanh(sin_phi) - s.e * std::atanh(s.e * sin_phi));
  const double xi_p = std::atan2(t, std::cos(lam));
  const double eta_p = std::atanh(std::sin(lam) / std::sqrt(1.0 + t * t));

  double xi = xi_p;
  double eta = eta_p;
  for (int j = 1; j <= 6; ++j) {
    const double a = s.alpha[j - 1];
    xi += a * std::sin(2.0 * j * xi_p) * std::cosh(2.0 * j * eta_p);
    eta += a * std::cos(2.0 * j * xi_p) * std::sinh(2.0 * j * eta_p);
  }

  UtmPoint out;
  out.zone = z;
  out.north = hemisphere_north;
  out.xy.x = kFalseEasting + kUtmK0 * s.rectifying_a * eta;
  out.xy.y = (hemisphere_north ? 0.0 : kFalseNorthingSouth) + kUtmK0 * s.rectifying_a * xi;
  return out;
}

PointGeo utm_unproject(PointXY en, int zone, bool north) {
  check_zone(zone);
  const auto& s = series();
  const double xi = (en.y - (north ? 0.0 : kFalseNorthingSouth)) / (kUtmK0 * s.rectifying_a);
  const double eta = (en.x - kFalseEasting) / (kUtmK0 * s.rectifying_a);

  double xi_p = xi;
  double eta_p = eta;
  for (int j = 1; j <= 6; ++j) {
    const double b = s.beta[j - 1];
    xi_p -= b * std::sin(2.0 * j * xi) * std::cosh(2.0 * j * eta);
    eta_p -= b * std::cos(2.0 * j * xi) * std::sinh(2.0 * j * eta);
  }

  const double tau_p =
      std::sin(xi_p) / std::sqrt(std::sinh(eta_p) * std::sinh(eta_p) + std::cos(xi_p) * std::cos(xi_p));
  const double lam = std::atan2(std::sinh(eta_p), std::cos(xi_p));

  // Newton iteration for tau = tan(phi) from the conformal tau'.
  const double e2 = s.e * s.e;
  double tau = tau_p;
  for (int it = 0; it < 8; ++it) {
    const double sigma = std::sinh(s.e * std::atanh(s.e * tau / std::sqrt(1.0 + tau * tau)));
    const double tau_i = tau * std::sqrt(1.0 + sigma * sigma) - sigma * std::sqrt(1.0 + tau * tau);
    const double delta = (tau_p - tau_i) / std::sqrt(1.0 + tau_i * tau_i) * (1.0 + (1.0 - e2) * tau * tau) /
                         ((1.0 - e2) * std::sqrt(1.0 + tau * tau));
    tau += delta;
    if (std::abs(delta) < 1e-15) break;
  }
  return {central_meridian(zone) + lam / kDeg, std::atan(tau) / kDeg};
}

// ---------------------------------------------------------------------------

NormalizedPoints center_and_normalize(std::span<const PointXY> points) {
  if (points.size() < 2) throw ArgumentError("center_and_normalize: need at least 2 points");
  const BBox box = bounding_box(points);
  const double diag = box.diagonal();
  if (!(diag > 0.0)) throw ArgumentError("center_and_normalize: degenerate extent (all points identical)");
  NormalizedPoints out;
  out.record.center = box.center();
  out.record.scale = 1.0 / diag;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(out.record.apply(p));
  return out;
}

std::uint8_t quantize_value(double v) {
  const double bin = std::floor((v + 0.5) * kQuantBins);
  return static_cast<std::uint8_t>(std::clamp(bin, 0.0, static_cast<double>(kQuantBins - 1)));
}

double dequantize_value(std::uint8_t q) { return (q + 0.5) / kQuantBins - 0.5; }

QuantizedPoint quantize(PointXY p) { return {quantize_value(p.x), quantize_value(p.y)}; }

PointXY dequantize(QuantizedPoint q) { return {dequantize_value(q.qx), dequantize_value(q.qy)}; }

// ---------------------------------------------------------------------------

double polyline_length(std::span<const PointXY> vertices) {
  if (vertices.size() < 2) throw ArgumentError("polyline_length: need at least 2 vertices");
  double total = 0.0;
  for (std::size_t i = 1; i < vertices.size(); ++i) total += distance(vertices[i - 1], vertices[i]);
  return total;
}

double bearing(PointXY a, PointXY b) {
  if (a == b) throw ArgumentError("bearing: identical points");
  double deg = std::atan2(b.x - a.x, b.y - a.y) / kDeg;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

namespace {

std::span<const PointXY> open_ring(std::span<const PointXY> ring) {
  if (ring.size() >= 2 && ring.front() == ring.back()) return ring.first(ring.size() - 1);
  return ring;
}

}  // namespace

double signed_area(std::span<const PointXY> ring) {
  const auto r = open_ring(ring);
  double twice = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto& p = r[i];
    const auto& q = r[(i + 1) % r.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return twice / 2.0;
}

AreaPerimeter polygon_area_perimeter(std::span<const PointXY> ring) {
  const auto r = open_ring(ring);
  if (r.size() < 3) throw ArgumentError("polygon_area_perimeter: need at least 3 vertices");
  AreaPerimeter out;
  out.area = std::abs(signed_area(r));
  for (std::size_t i = 0; i < r.size(); ++i) out.perimeter += distance(r[i], r[(i + 1) % r.size()]);
  return out;
}

// ---------------------------------------------------------------------------
// Welzl

bool Circle::contains(PointXY p, double tol) const { return distance(center, p) <= radius + tol; }

namespace {

Circle circle_two(PointXY a, PointXY b) {
  return {0.5 * (a + b), distance(a, b) / 2.0};
}

Circle circle_three(PointXY a, PointXY b, PointXY c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  if (std::abs(d) < 1e-18) {
    // Collinear: the widest pair spans the others.
    Circle best = circle_two(a, b);
    for (const auto& cand : {circle_two(a, c), circle_two(b, c)}) {
      if (cand.radius > best.radius) best = cand;
    }
    return best;
  }
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  const PointXY u{(cy * b2 - by * c2) / d, (bx * c2 - cx * b2) / d};
  return {u + a, std::hypot(u.x, u.y)};
}

constexpr double kWelzlTol = 1e-12;

bool inside(const Circle& c, PointXY p) {
  return distance(c.center, p) <= c.radius * (1.0 + kWelzlTol) + kWelzlTol;
}

}  // namespace

Circle min_enclosing_circle(std::span<const PointXY> points, std::uint64_t seed) {
  if (points.empty()) throw ArgumentError("min_enclosing_circle: empty input");
  std::vector<PointXY> pts(points.begin(), points.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pts.begin(), pts.end(), rng);

  // Iterative form of Welzl's move-to-front recursion.
  Circle c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (inside(c, pts[i])) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (inside(c, pts[j])) continue;
      c = circle_two(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (inside(c, pts[k])) continue;
        c = circle_three(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

}  // namespace streetvae
