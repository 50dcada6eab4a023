#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace streetscape {

/// WGS84 geographic position in decimal degrees. Axis order is always lon, lat.
struct LonLat {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const LonLat&, const LonLat&) = default;
};

/// Projected position in meters (easting, northing).
struct MetricXY {
  double x = 0.0;
  double y = 0.0;
};

double distance(MetricXY a, MetricXY b);

struct BoundingBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  /// Validating constructor; throws Error(kConfig) when the box is empty or out of range.
  static BoundingBox make(double min_lon, double min_lat, double max_lon, double max_lat);

  LonLat centroid() const { return {(min_lon + max_lon) / 2.0, (min_lat + max_lat) / 2.0}; }
  bool contains(LonLat p) const {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
};

enum class Hemisphere { kNorth, kSouth };

/// A UTM zone used as the working metric CRS of a run.
struct MetricCrs {
  int utm_zone = 31;
  Hemisphere hemisphere = Hemisphere::kNorth;

  double central_meridian() const { return -183.0 + 6.0 * utm_zone; }
  double false_northing() const { return hemisphere == Hemisphere::kSouth ? 10'000'000.0 : 0.0; }
  /// EPSG code of the WGS84 / UTM zone (326zz north, 327zz south).
  int epsg() const { return (hemisphere == Hemisphere::kNorth ? 32600 : 32700) + utm_zone; }

  friend bool operator==(const MetricCrs&, const MetricCrs&) = default;
};

/// UTM zone containing the bbox centroid; hemisphere from the centroid latitude sign.
MetricCrs select_metric_crs(const BoundingBox& bbox);

/// Ellipsoidal Transverse Mercator using the Krüger series to sixth order in n.
///
/// Accurate to well below a millimeter within a few degrees of the central
/// meridian, which covers every UTM zone.
class TransverseMercator {
 public:
  TransverseMercator(double semi_major_axis, double flattening, double scale_factor);

  static const TransverseMercator& utm();

  /// Projects (lon, lat) relative to `lon0`; returns unshifted x (east) and y (north).
  MetricXY forward(double lon0, LonLat p) const;
  LonLat reverse(double lon0, MetricXY xy) const;

 private:
  double a_, f_, k0_, e2_, e_, n_, rectifying_radius_;
  std::array<double, 7> alpha_{};
  std::array<double, 7> beta_{};
};

/// Forward projection into the CRS. Latitudes beyond ±84° raise Error(kRange).
MetricXY to_metric(LonLat p, const MetricCrs& crs);
std::vector<MetricXY> to_metric(std::span<const LonLat> coords, const MetricCrs& crs);
LonLat from_metric(MetricXY xy, const MetricCrs& crs);
std::vector<LonLat> from_metric(std::span<const MetricXY> coords, const MetricCrs& crs);

double polyline_length(std::span<const MetricXY> polyline);
double metric_length(std::span<const LonLat> polyline, const MetricCrs& crs);

/// Area of the bbox polygon in the metric CRS, km². Edges are densified before projection.
double bbox_area_km2(const BoundingBox& bbox, const MetricCrs& crs);

struct StreetSegment {
  std::string segment_id;
  std::int64_t source_way_id = 0;
  std::vector<LonLat> polyline;
  double length_m = 0.0;
  std::string highway_class;
  std::vector<std::int64_t> node_ids;  ///< OSM node per vertex; empty when read back from a layer
};

struct SamplePoint {
  std::string point_id;
  std::string segment_id;
  double chainage_m = 0.0;
  LonLat position;
};

/// Position at arc distance `chainage_m` along the segment, interpolated in metric space.
/// Throws Error(kRange) when chainage is outside [0, length_m].
LonLat interpolate_at(const StreetSegment& segment, double chainage_m, const MetricCrs& crs);

}  // namespace streetscape
