#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "streetscape/geo.hpp"
#include "streetscape/osm.hpp"

namespace streetscape::sampler {

struct SamplingConfig {
  double spacing_m = 40.0;
  double offset_m = 15.0;

  /// Throws Error(kConfig) unless spacing > 0 and offset >= 0.
  void validate() const;
};

/// Number of points on a segment of length `length_m`: chainages offset,
/// offset + spacing, ... up to and including length - offset.
std::size_t point_count(double length_m, const SamplingConfig& cfg);

/// Chainages only, without positions.
std::vector<double> chainages(double length_m, const SamplingConfig& cfg);

/// Points on one segment; ids are `<segment_id>#<ordinal>`.
std::vector<SamplePoint> sample_segment(const StreetSegment& segment, const SamplingConfig& cfg,
                                        const MetricCrs& crs);

/// Coverage counters for one case study. Imagery fields stay unset until the
/// fetch stage has run.
struct CountsReport {
  std::size_t segments = 0;
  double total_length_km = 0.0;
  std::size_t points = 0;
  double bbox_km2 = 0.0;
  std::optional<std::size_t> points_4_images;
  std::optional<std::size_t> points_no_coverage;
};

struct NetworkSample {
  std::vector<SamplePoint> points;
  CountsReport report;
};

NetworkSample sample_network(const osm::NetworkDataset& net, const SamplingConfig& cfg,
                             const MetricCrs& crs, const BoundingBox& bbox);

}  // namespace streetscape::sampler
