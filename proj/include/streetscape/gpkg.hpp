#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "streetscape/geojson.hpp"

namespace streetscape::gpkg {

struct Layer {
  std::string name;
  std::vector<geojson::Feature> features;
};

/// Writes the layers as feature tables of a new GeoPackage (EPSG:4326). An
/// existing file is replaced. Column types follow the first non-null value of
/// each property: string -> TEXT, integer -> INTEGER, number -> REAL.
void write_geopackage(const std::filesystem::path& path, const std::vector<Layer>& layers);

/// Encodes a geometry as a GeoPackage binary blob (little-endian, XY envelope).
std::string encode_geometry(const geojson::Geometry& geometry, int srs_id = 4326);

}  // namespace streetscape::gpkg
