#include "streetscape/geojson.hpp"

#include <fmt/format.h>

#include "streetscape/error.hpp"

namespace streetscape::geojson {

using nlohmann::ordered_json;

namespace {

ordered_json coord(LonLat p) { return ordered_json::array({p.lon, p.lat}); }

ordered_json geometry_json(const Geometry& g) {
  ordered_json out = ordered_json::object();
  if (const auto* pt = std::get_if<LonLat>(&g)) {
    out["type"] = "Point";
    out["coordinates"] = coord(*pt);
  } else {
    out["type"] = "LineString";
    ordered_json coords = ordered_json::array();
    for (const LonLat& p : std::get<std::vector<LonLat>>(g)) coords.push_back(coord(p));
    out["coordinates"] = std::move(coords);
  }
  return out;
}

LonLat parse_coord(const ordered_json& c) {
  return {c.at(0).get<double>(), c.at(1).get<double>()};
}

}  // namespace

std::string write_collection(std::string_view name, const std::vector<Feature>& features,
                             const Properties& metadata) {
  std::string out = "{\"type\":\"FeatureCollection\",\"name\":";
  out += ordered_json(std::string(name)).dump();
  if (metadata.is_object() && !metadata.empty()) {
    out += ",\"metadata\":";
    out += metadata.dump();
  }
  out += ",\"features\":[\n";
  for (std::size_t i = 0; i < features.size(); ++i) {
    ordered_json f = ordered_json::object();
    f["type"] = "Feature";
    f["properties"] = features[i].properties;
    f["geometry"] = geometry_json(features[i].geometry);
    out += f.dump();
    out += i + 1 < features.size() ? ",\n" : "\n";
  }
  out += "]}\n";
  return out;
}

Collection read_collection(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(fmt::format("GeoJSON: invalid JSON at byte {}", e.byte), e.byte);
  }
  Collection out;
  try {
    if (doc.at("type") != "FeatureCollection") throw ParseError("GeoJSON: not a FeatureCollection", 0);
    out.name = doc.value("name", "");
    if (doc.contains("metadata")) out.metadata = doc["metadata"];
    for (const auto& f : doc.at("features")) {
      Feature feat;
      feat.properties = f.at("properties");
      const auto& g = f.at("geometry");
      const std::string type = g.at("type").get<std::string>();
      if (type == "Point") {
        feat.geometry = parse_coord(g.at("coordinates"));
      } else if (type == "LineString") {
        std::vector<LonLat> line;
        for (const auto& c : g.at("coordinates")) line.push_back(parse_coord(c));
        feat.geometry = std::move(line);
      } else {
        throw ParseError(fmt::format("GeoJSON: unsupported geometry type {}", type), 0);
      }
      out.features.push_back(std::move(feat));
    }
  } catch (const ordered_json::exception& e) {
    throw ParseError(fmt::format("GeoJSON: unexpected structure: {}", e.what()), 0);
  }
  return out;
}

std::vector<Feature> streets_features(const std::vector<StreetSegment>& segments) {
  std::vector<Feature> out;
  out.reserve(segments.size());
  for (const auto& s : segments) {
    Feature f;
    f.geometry = s.polyline;
    f.properties["segment_id"] = s.segment_id;
    f.properties["source_way_id"] = s.source_way_id;
    f.properties["highway_class"] = s.highway_class;
    f.properties["length_m"] = s.length_m;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Feature> points_features(const std::vector<SamplePoint>& points) {
  std::vector<Feature> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    Feature f;
    f.geometry = p.position;
    f.properties["point_id"] = p.point_id;
    f.properties["segment_id"] = p.segment_id;
    f.properties["chainage_m"] = p.chainage_m;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<StreetSegment> segments_from(const Collection& layer) {
  std::vector<StreetSegment> out;
  try {
    for (const auto& f : layer.features) {
      StreetSegment s;
      s.segment_id = f.properties.at("segment_id").get<std::string>();
      s.source_way_id = f.properties.at("source_way_id").get<std::int64_t>();
      s.highway_class = f.properties.at("highway_class").get<std::string>();
      s.length_m = f.properties.at("length_m").get<double>();
      s.polyline = std::get<std::vector<LonLat>>(f.geometry);
      out.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    throw ParseError(fmt::format("streets layer: {}", e.what()), 0);
  }
  return out;
}

std::vector<SamplePoint> points_from(const Collection& layer) {
  std::vector<SamplePoint> out;
  try {
    for (const auto& f : layer.features) {
      SamplePoint p;
      p.point_id = f.properties.at("point_id").get<std::string>();
      p.segment_id = f.properties.at("segment_id").get<std::string>();
      p.chainage_m = f.properties.at("chainage_m").get<double>();
      p.position = std::get<LonLat>(f.geometry);
      out.push_back(std::move(p));
    }
  } catch (const std::exception& e) {
    throw ParseError(fmt::format("points layer: {}", e.what()), 0);
  }
  return out;
}

}  // namespace streetscape::geojson
