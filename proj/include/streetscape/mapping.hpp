#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streetscape/aggregate.hpp"
#include "streetscape/geo.hpp"

namespace streetscape::mapping {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  /// "#rrggbb", channels rounded to the nearest integer.
  std::string hex() const;
  static Rgb from_hex(const std::string& hex);
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

enum class Statistic { kMean, kSum };

const char* to_string(Statistic stat);
Statistic statistic_from(const std::string& text);

struct MapStyle {
  Statistic statistic = Statistic::kMean;
  /// Light yellow to dark purple.
  std::vector<Rgb> ramp{Rgb::from_hex("#fde725"), Rgb::from_hex("#5ec962"),
                        Rgb::from_hex("#21918c"), Rgb::from_hex("#3b528b"),
                        Rgb::from_hex("#440154")};
  Rgb nodata = Rgb::from_hex("#808080");
  double street_width = 2.0;
  double nodata_street_width = 1.2;
  double point_radius = 3.0;
  int width = 1000;
  int height = 1000;
  std::optional<std::pair<double, double>> fixed_domain;  ///< data min-max when unset

  /// Throws Error(kConfig) when the ramp has fewer than 2 stops or lo >= hi.
  void validate() const;
};

/// Statistic and domain each shipped task is drawn with: T1 mean over [0,1],
/// T2 sum over the data range, T3 mean over [0,3]. Other tasks use the mean
/// over the data range. A statistic override other than the task default
/// switches to the data range.
MapStyle default_style(const std::string& task_id, std::optional<Statistic> override_stat = {});

/// Piecewise-linear RGB interpolation between evenly spaced stops, clamped to
/// [lo, hi]. An absent value gets the nodata color.
Rgb color_for(std::optional<double> value, const MapStyle& style, double lo, double hi);

/// Fractional position of a value along the ramp, clamped to [0, 1].
double ramp_position(double value, double lo, double hi);

struct RenderedMaps {
  std::string points_svg;
  std::string streets_svg;
  std::pair<double, double> points_domain;
  std::pair<double, double> streets_domain;
};

/// Two SVG documents (points, streets). Geometry is projected to the metric
/// CRS and fitted to the canvas; grey features are drawn beneath colored ones.
RenderedMaps render_maps(const std::vector<StreetSegment>& segments,
                         const std::vector<SamplePoint>& points,
                         const std::vector<aggregate::SummaryRow>& point_rows,
                         const std::vector<aggregate::SummaryRow>& segment_rows,
                         const MapStyle& style, const std::string& task_id, const MetricCrs& crs,
                         const std::string& title = "");

}  // namespace streetscape::mapping
