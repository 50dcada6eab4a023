#pragma once

#include <optional>
#include <string>
#include <vector>

#include "streetscape/geo.hpp"
#include "streetscape/geojson.hpp"
#include "streetscape/scoring.hpp"

namespace streetscape::aggregate {

/// Statistics for one point or segment and one task. All four statistics are
/// absent exactly when count_valid is 0.
struct SummaryRow {
  std::string entity_id;
  std::string task_id;
  std::optional<double> mean;
  std::optional<double> sum;
  std::optional<double> min;
  std::optional<double> max;
  std::size_t count_valid = 0;

  bool has_data() const { return count_valid > 0; }
  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

/// One row per sample point (sorted by point id). Only scored records
/// contribute; a point without any scored record gets an empty row. Throws
/// Error(kValidation) listing log point ids missing from `points`.
std::vector<SummaryRow> aggregate_points(const std::vector<scoring::ScoreRecord>& log,
                                         const std::string& task_id,
                                         const std::vector<SamplePoint>& points);

/// One row per segment (sorted by segment id): mean of member-point means,
/// sum of member-point sums, min/max over member-point means, count of member
/// points with data.
std::vector<SummaryRow> aggregate_segments(const std::vector<SummaryRow>& point_rows,
                                           const std::vector<SamplePoint>& points,
                                           const std::vector<StreetSegment>& segments,
                                           const std::string& task_id);

/// Geometry layers carrying `{task}_mean`, `{task}_sum`, `{task}_min`,
/// `{task}_max` and `{task}_count`; absent statistics are null.
struct GeoOutputs {
  std::vector<geojson::Feature> point_features;
  std::vector<geojson::Feature> street_features;
  geojson::Properties metadata;
  std::string points_geojson;
  std::string streets_geojson;
};

/// Joins rows onto the geometry, features sorted by id. Throws
/// Error(kValidation) when ids on either side fail to match one to one.
GeoOutputs write_geo_outputs(const std::vector<StreetSegment>& segments,
                             const std::vector<SamplePoint>& points,
                             const std::vector<SummaryRow>& point_rows,
                             const std::vector<SummaryRow>& segment_rows,
                             const std::string& task_id);

/// Reads the statistics of `task_id` back from a layer; `id_key` is
/// "point_id" or "segment_id".
std::vector<SummaryRow> rows_from_layer(const geojson::Collection& layer, const std::string& id_key,
                                        const std::string& task_id);

}  // namespace streetscape::aggregate
