#include "streetscape/geo.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "streetscape/error.hpp"

namespace streetscape {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMaxLatitude = 84.0;
constexpr double kZoneHalfWidthWarn = 6.0;

double eatanhe(double x, double e) { return e * std::atanh(e * x); }

// tan of the conformal latitude from tan of the geographic latitude.
double taupf(double tau, double e) {
  const double tau1 = std::hypot(1.0, tau);
  const double sig = std::sinh(eatanhe(tau / tau1, e));
  return std::hypot(1.0, sig) * tau - sig * tau1;
}

// Inverse of taupf by Newton iteration.
double tauf(double taup, double e2, double e) {
  const double e2m = 1.0 - e2;
  double tau = taup / e2m;
  const double stol = 0.1 * std::sqrt(std::numeric_limits<double>::epsilon()) *
                      std::max(1.0, std::abs(taup));
  for (int i = 0; i < 8; ++i) {
    const double taupa = taupf(tau, e);
    const double dtau = (taup - taupa) * (1.0 + e2m * tau * tau) /
                        (e2m * std::hypot(1.0, tau) * std::hypot(1.0, taupa));
    tau += dtau;
    if (!(std::abs(dtau) >= stol)) break;
  }
  return tau;
}

std::atomic<bool> g_warned_zone_width{false};

}  // namespace

double distance(MetricXY a, MetricXY b) { return std::hypot(b.x - a.x, b.y - a.y); }

BoundingBox BoundingBox::make(double min_lon, double min_lat, double max_lon, double max_lat) {
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(min_lon) || !finite(min_lat) || !finite(max_lon) || !finite(max_lat)) {
    throw Error(ErrorKind::kConfig, "bbox: coordinates must be finite");
  }
  if (min_lon < -180.0 || max_lon > 180.0 || min_lat < -90.0 || max_lat > 90.0) {
    throw Error(ErrorKind::kConfig,
                fmt::format("bbox: [{}, {}, {}, {}] outside [-180,180] x [-90,90]", min_lon,
                            min_lat, max_lon, max_lat));
  }
  if (!(min_lon < max_lon) || !(min_lat < max_lat)) {
    throw Error(ErrorKind::kConfig,
                fmt::format("bbox: min must be strictly below max, got [{}, {}, {}, {}]", min_lon,
                            min_lat, max_lon, max_lat));
  }
  return BoundingBox{min_lon, min_lat, max_lon, max_lat};
}

MetricCrs select_metric_crs(const BoundingBox& bbox) {
  const LonLat c = bbox.centroid();
  int zone = static_cast<int>(std::floor((c.lon + 180.0) / 6.0)) + 1;
  if (zone > 60) zone = 60;  // lon == 180
  if (zone < 1) zone = 1;
  return MetricCrs{zone, c.lat < 0.0 ? Hemisphere::kSouth : Hemisphere::kNorth};
}

TransverseMercator::TransverseMercator(double semi_major_axis, double flattening,
                                       double scale_factor)
    : a_(semi_major_axis), f_(flattening), k0_(scale_factor) {
  e2_ = f_ * (2.0 - f_);
  e_ = std::sqrt(e2_);
  n_ = f_ / (2.0 - f_);
  const double n = n_;
  const double n2 = n * n, n3 = n2 * n, n4 = n3 * n, n5 = n4 * n, n6 = n5 * n;
  rectifying_radius_ = a_ / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);

  alpha_[1] = n / 2 - 2 * n2 / 3 + 5 * n3 / 16 + 41 * n4 / 180 - 127 * n5 / 288 +
              7891 * n6 / 37800;
  alpha_[2] = 13 * n2 / 48 - 3 * n3 / 5 + 557 * n4 / 1440 + 281 * n5 / 630 -
              1983433 * n6 / 1935360;
  alpha_[3] = 61 * n3 / 240 - 103 * n4 / 140 + 15061 * n5 / 26880 + 167603 * n6 / 181440;
  alpha_[4] = 49561 * n4 / 161280 - 179 * n5 / 168 + 6601661 * n6 / 7257600;
  alpha_[5] = 34729 * n5 / 80640 - 3418889 * n6 / 1995840;
  alpha_[6] = 212378941 * n6 / 319334400;

  beta_[1] = n / 2 - 2 * n2 / 3 + 37 * n3 / 96 - n4 / 360 - 81 * n5 / 512 + 96199 * n6 / 604800;
  beta_[2] = n2 / 48 + n3 / 15 - 437 * n4 / 1440 + 46 * n5 / 105 - 1118711 * n6 / 3870720;
  beta_[3] = 17 * n3 / 480 - 37 * n4 / 840 - 209 * n5 / 4480 + 5569 * n6 / 90720;
  beta_[4] = 4397 * n4 / 161280 - 11 * n5 / 504 - 830251 * n6 / 7257600;
  beta_[5] = 4583 * n5 / 161280 - 108847 * n6 / 3991680;
  beta_[6] = 20648693 * n6 / 638668800;
}

const TransverseMercator& TransverseMercator::utm() {
  static const TransverseMercator tm(6378137.0, 1.0 / 298.257223563, 0.9996);
  return tm;
}

MetricXY TransverseMercator::forward(double lon0, LonLat p) const {
  double dlon = std::remainder(p.lon - lon0, 360.0) * kDeg;
  const double phi = p.lat * kDeg;
  const double tau = std::tan(phi);
  const double taup = std::abs(p.lat) == 90.0 ? (p.lat > 0 ? 1e300 : -1e300) : taupf(tau, e_);

  const double xip = std::atan2(taup, std::cos(dlon));
  const double etap = std::asinh(std::sin(dlon) / std::hypot(taup, std::cos(dlon)));

  double xi = xip;
  double eta = etap;
  for (int j = 1; j <= 6; ++j) {
    xi += alpha_[j] * std::sin(2 * j * xip) * std::cosh(2 * j * etap);
    eta += alpha_[j] * std::cos(2 * j * xip) * std::sinh(2 * j * etap);
  }
  return {k0_ * rectifying_radius_ * eta, k0_ * rectifying_radius_ * xi};
}

LonLat TransverseMercator::reverse(double lon0, MetricXY xy) const {
  const double xi = xy.y / (k0_ * rectifying_radius_);
  const double eta = xy.x / (k0_ * rectifying_radius_);

  double xip = xi;
  double etap = eta;
  for (int j = 1; j <= 6; ++j) {
    xip -= beta_[j] * std::sin(2 * j * xi) * std::cosh(2 * j * eta);
    etap -= beta_[j] * std::cos(2 * j * xi) * std::sinh(2 * j * eta);
  }
  const double sinh_etap = std::sinh(etap);
  const double cos_xip = std::cos(xip);
  const double taup = std::sin(xip) / std::hypot(sinh_etap, cos_xip);
  const double dlon = std::atan2(sinh_etap, cos_xip);
  const double tau = tauf(taup, e2_, e_);
  return {lon0 + dlon / kDeg, std::atan(tau) / kDeg};
}

MetricXY to_metric(LonLat p, const MetricCrs& crs) {
  if (!(std::abs(p.lat) <= kMaxLatitude)) {
    throw Error(ErrorKind::kRange,
                fmt::format("projection domain: latitude {} beyond ±{}°", p.lat, kMaxLatitude));
  }
  const double lon0 = crs.central_meridian();
  if (std::abs(std::remainder(p.lon - lon0, 360.0)) > kZoneHalfWidthWarn &&
      !g_warned_zone_width.exchange(true)) {
    spdlog::warn("coordinate at lon {} is more than {}° from the zone {} central meridian",
                 p.lon, kZoneHalfWidthWarn, crs.utm_zone);
  }
  const MetricXY xy = TransverseMercator::utm().forward(lon0, p);
  return {500'000.0 + xy.x, crs.false_northing() + xy.y};
}

std::vector<MetricXY> to_metric(std::span<const LonLat> coords, const MetricCrs& crs) {
  std::vector<MetricXY> out;
  out.reserve(coords.size());
  for (const LonLat& p : coords) out.push_back(to_metric(p, crs));
  return out;
}

LonLat from_metric(MetricXY xy, const MetricCrs& crs) {
  return TransverseMercator::utm().reverse(
      crs.central_meridian(), {xy.x - 500'000.0, xy.y - crs.false_northing()});
}

std::vector<LonLat> from_metric(std::span<const MetricXY> coords, const MetricCrs& crs) {
  std::vector<LonLat> out;
  out.reserve(coords.size());
  for (const MetricXY& p : coords) out.push_back(from_metric(p, crs));
  return out;
}

double polyline_length(std::span<const MetricXY> polyline) {
  double total = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) total += distance(polyline[i - 1], polyline[i]);
  return total;
}

double metric_length(std::span<const LonLat> polyline, const MetricCrs& crs) {
  const auto metric = to_metric(polyline, crs);
  return polyline_length(metric);
}

double bbox_area_km2(const BoundingBox& bbox, const MetricCrs& crs) {
  constexpr int kSteps = 32;
  std::vector<LonLat> ring;
  ring.reserve(4 * kSteps);
  const auto edge = [&](LonLat from, LonLat to) {
    for (int i = 0; i < kSteps; ++i) {
      const double t = static_cast<double>(i) / kSteps;
      ring.push_back({from.lon + t * (to.lon - from.lon), from.lat + t * (to.lat - from.lat)});
    }
  };
  const LonLat sw{bbox.min_lon, bbox.min_lat}, se{bbox.max_lon, bbox.min_lat};
  const LonLat ne{bbox.max_lon, bbox.max_lat}, nw{bbox.min_lon, bbox.max_lat};
  edge(sw, se);
  edge(se, ne);
  edge(ne, nw);
  edge(nw, sw);
  const auto metric = to_metric(ring, crs);
  double twice_area = 0.0;
  for (std::size_t i = 0; i < metric.size(); ++i) {
    const MetricXY& a = metric[i];
    const MetricXY& b = metric[(i + 1) % metric.size()];
    twice_area += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice_area) / 2.0 / 1e6;
}

LonLat interpolate_at(const StreetSegment& segment, double chainage_m, const MetricCrs& crs) {
  if (segment.polyline.size() < 2) {
    throw Error(ErrorKind::kRange,
                fmt::format("segment {} has fewer than 2 vertices", segment.segment_id));
  }
  if (!(chainage_m >= 0.0 && chainage_m <= segment.length_m)) {
    throw Error(ErrorKind::kRange, fmt::format("chainage {} outside [0, {}] on segment {}",
                                               chainage_m, segment.length_m, segment.segment_id));
  }
  if (chainage_m == 0.0) return segment.polyline.front();
  if (chainage_m == segment.length_m) return segment.polyline.back();

  const auto metric = to_metric(segment.polyline, crs);
  double walked = 0.0;
  for (std::size_t i = 1; i < metric.size(); ++i) {
    const double edge = distance(metric[i - 1], metric[i]);
    if (edge > 0.0 && walked + edge >= chainage_m) {
      const double t = (chainage_m - walked) / edge;
      const MetricXY p{metric[i - 1].x + t * (metric[i].x - metric[i - 1].x),
                       metric[i - 1].y + t * (metric[i].y - metric[i - 1].y)};
      return from_metric(p, crs);
    }
    walked += edge;
  }
  // Stored length and recomputed length can disagree in the last ulp.
  return segment.polyline.back();
}

}  // namespace streetscape
