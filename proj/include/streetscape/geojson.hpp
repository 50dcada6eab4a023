#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "streetscape/geo.hpp"

namespace streetscape::geojson {

using Properties = nlohmann::ordered_json;
using Geometry = std::variant<LonLat, std::vector<LonLat>>;  // Point | LineString

struct Feature {
  Geometry geometry;
  Properties properties = Properties::object();
};

/// Serializes a FeatureCollection with one feature per line. `metadata` is
/// emitted as a foreign member when it is a non-empty object.
std::string write_collection(std::string_view name, const std::vector<Feature>& features,
                             const Properties& metadata = Properties::object());

struct Collection {
  std::string name;
  std::vector<Feature> features;
  Properties metadata = Properties::object();
};

/// Throws ParseError on malformed documents.
Collection read_collection(std::string_view text);

/// Streets layer: {segment_id, source_way_id, highway_class, length_m}.
std::vector<Feature> streets_features(const std::vector<StreetSegment>& segments);
/// Points layer: {point_id, segment_id, chainage_m}.
std::vector<Feature> points_features(const std::vector<SamplePoint>& points);

std::vector<StreetSegment> segments_from(const Collection& layer);
std::vector<SamplePoint> points_from(const Collection& layer);

}  // namespace streetscape::geojson
