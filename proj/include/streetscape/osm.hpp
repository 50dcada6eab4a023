#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "streetscape/geo.hpp"
#include "streetscape/http.hpp"

namespace streetscape::osm {

/// Set of accepted OSM `highway=*` values.
class HighwayFilter {
 public:
  /// motorway..service plus the *_link variants of the linked classes.
  static HighwayFilter defaults();
  explicit HighwayFilter(std::set<std::string> classes) : classes_(std::move(classes)) {}

  bool accepts(std::string_view highway) const { return classes_.contains(std::string(highway)); }
  const std::set<std::string>& classes() const { return classes_; }

 private:
  std::set<std::string> classes_;
};

struct RawOsmWay {
  std::int64_t way_id = 0;
  std::vector<std::int64_t> node_refs;
  std::map<std::string, std::string> tags;
};

using NodeMap = std::unordered_map<std::int64_t, LonLat>;

struct ParsedOverpass {
  std::vector<RawOsmWay> ways;  ///< only ways carrying a highway tag
  NodeMap nodes;
  std::size_t element_count = 0;
  std::size_t way_element_count = 0;
  std::size_t node_element_count = 0;
  std::string osm_base_timestamp;  ///< `osm3s.timestamp_osm_base` when present
};

/// Parses the JSON output of an Overpass query. Coordinates come from node
/// elements or from per-way `geometry` arrays (`out geom`).
/// Throws ParseError (with byte offset) on malformed JSON and
/// Error(kParse) listing node ids when a referenced node has no coordinates.
ParsedOverpass parse_overpass(std::string_view document);

/// Overpass QL selecting every way with a highway tag in the bbox, with geometry, as JSON.
std::string overpass_query(const BoundingBox& bbox);

struct Provenance {
  std::string endpoint;
  std::string query;
  std::string retrieved_at;  ///< ISO-8601 UTC; when the response was first downloaded
  std::string cache_key;     ///< sha256 of the query text
  std::string osm_base_timestamp;
};

struct FetchOptions {
  std::string endpoint = "https://overpass-api.de/api/interpreter";
  std::filesystem::path cache_dir;  ///< the run's cache/overpass directory
  bool offline = false;             ///< fail instead of downloading on a cache miss
  http::RetryPolicy retry;
  std::shared_ptr<http::Transport> transport;  ///< defaults to http::default_transport()
};

struct FetchResult {
  std::string document;
  std::filesystem::path cache_file;
  bool from_cache = false;
  Provenance provenance;
};

/// Returns the raw Overpass response for the bbox, reading it from
/// `<cache_dir>/<sha256(query)>.json` when present and otherwise downloading it
/// and persisting it verbatim. Responses that do not parse are never cached.
FetchResult fetch_osm(const BoundingBox& bbox, const FetchOptions& options);

struct NetworkDataset {
  std::vector<StreetSegment> segments;
  std::map<std::int64_t, LonLat> nodes;  ///< every node of a retained way
  Provenance provenance;
  std::size_t dropped_degenerate = 0;  ///< zero-length pieces removed during splitting
};

/// Filters ways by highway class and splits them at intersections: at every
/// interior node referenced by two or more retained ways or of street degree
/// three or more. Segment ids are `<way_id>_<index>`.
NetworkDataset build_network(const ParsedOverpass& parsed, const HighwayFilter& filter,
                             const MetricCrs& crs);

/// Street degree (number of incident way edges) of each node of the retained ways.
std::map<std::int64_t, int> street_degree(const ParsedOverpass& parsed,
                                          const HighwayFilter& filter);

}  // namespace streetscape::osm
