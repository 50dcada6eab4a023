#include "streetscape/sampler.hpp"

#include <cmath>

#include <fmt/format.h>

#include "streetscape/error.hpp"

namespace streetscape::sampler {

void SamplingConfig::validate() const {
  if (!(spacing_m > 0.0) || !std::isfinite(spacing_m)) {
    throw Error(ErrorKind::kConfig, fmt::format("sampling: spacing_m must be > 0, got {}", spacing_m));
  }
  if (!(offset_m >= 0.0) || !std::isfinite(offset_m)) {
    throw Error(ErrorKind::kConfig, fmt::format("sampling: offset_m must be >= 0, got {}", offset_m));
  }
}

std::size_t point_count(double length_m, const SamplingConfig& cfg) {
  const double last = length_m - cfg.offset_m;
  if (!(cfg.offset_m <= last)) return 0;
  // Start from the closed form, then settle it against the exact chainage
  // predicate so that rounding in the division can never disagree with it.
  auto n = static_cast<std::size_t>(std::floor((length_m - 2.0 * cfg.offset_m) / cfg.spacing_m)) + 1;
  while (cfg.offset_m + static_cast<double>(n) * cfg.spacing_m <= last) ++n;
  while (n > 0 && cfg.offset_m + static_cast<double>(n - 1) * cfg.spacing_m > last) --n;
  return n;
}

std::vector<double> chainages(double length_m, const SamplingConfig& cfg) {
  const std::size_t n = point_count(length_m, cfg);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(cfg.offset_m + static_cast<double>(k) * cfg.spacing_m);
  return out;
}

std::vector<SamplePoint> sample_segment(const StreetSegment& segment, const SamplingConfig& cfg,
                                        const MetricCrs& crs) {
  std::vector<SamplePoint> out;
  const auto cs = chainages(segment.length_m, cfg);
  out.reserve(cs.size());
  for (std::size_t k = 0; k < cs.size(); ++k) {
    SamplePoint p;
    p.point_id = fmt::format("{}#{}", segment.segment_id, k);
    p.segment_id = segment.segment_id;
    p.chainage_m = cs[k];
    p.position = interpolate_at(segment, cs[k], crs);
    out.push_back(std::move(p));
  }
  return out;
}

NetworkSample sample_network(const osm::NetworkDataset& net, const SamplingConfig& cfg,
                             const MetricCrs& crs, const BoundingBox& bbox) {
  cfg.validate();
  NetworkSample out;
  double total_m = 0.0;
  for (const StreetSegment& seg : net.segments) {
    auto pts = sample_segment(seg, cfg, crs);
    out.points.insert(out.points.end(), std::make_move_iterator(pts.begin()),
                      std::make_move_iterator(pts.end()));
    total_m += seg.length_m;
  }
  out.report.segments = net.segments.size();
  out.report.total_length_km = total_m / 1000.0;
  out.report.points = out.points.size();
  out.report.bbox_km2 = bbox_area_km2(bbox, crs);
  return out;
}

}  // namespace streetscape::sampler
