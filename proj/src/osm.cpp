#include "streetscape/osm.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "streetscape/error.hpp"
#include "streetscape/files.hpp"
#include "streetscape/hashing.hpp"

namespace streetscape::osm {

using nlohmann::json;

namespace {

bool retained(const RawOsmWay& way, const HighwayFilter& filter) {
  const auto it = way.tags.find("highway");
  return it != way.tags.end() && filter.accepts(it->second);
}

// Node refs with consecutive repeats collapsed.
std::vector<std::int64_t> clean_refs(const std::vector<std::int64_t>& refs) {
  std::vector<std::int64_t> out;
  out.reserve(refs.size());
  for (auto id : refs) {
    if (out.empty() || out.back() != id) out.push_back(id);
  }
  return out;
}

}  // namespace

HighwayFilter HighwayFilter::defaults() {
  return HighwayFilter({"motorway", "motorway_link", "trunk", "trunk_link", "primary",
                        "primary_link", "secondary", "secondary_link", "tertiary",
                        "tertiary_link", "unclassified", "residential", "living_street",
                        "pedestrian", "service"});
}

ParsedOverpass parse_overpass(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("overpass response is not valid JSON at byte {}: {}", e.byte,
                                 e.what()),
                     e.byte);
  }
  if (!doc.is_object() || !doc.contains("elements") || !doc["elements"].is_array()) {
    throw ParseError("overpass response has no 'elements' array", 0);
  }

  ParsedOverpass out;
  if (doc.contains("osm3s") && doc["osm3s"].is_object()) {
    out.osm_base_timestamp = doc["osm3s"].value("timestamp_osm_base", "");
  }
  if (doc.contains("remark")) {
    spdlog::warn("overpass remark: {}", doc["remark"].dump());
  }

  std::vector<const json*> way_elements;
  try {
    for (const json& el : doc["elements"]) {
      ++out.element_count;
      const std::string type = el.at("type").get<std::string>();
      if (type == "node") {
        ++out.node_element_count;
        out.nodes[el.at("id").get<std::int64_t>()] = {el.at("lon").get<double>(),
                                                      el.at("lat").get<double>()};
      } else if (type == "way") {
        ++out.way_element_count;
        way_elements.push_back(&el);
      }
    }

    std::set<std::int64_t> missing;
    for (const json* el : way_elements) {
      RawOsmWay way;
      way.way_id = el->at("id").get<std::int64_t>();
      if (el->contains("tags")) {
        for (const auto& [k, v] : el->at("tags").items()) {
          if (v.is_string()) way.tags[k] = v.get<std::string>();
        }
      }
      if (!way.tags.contains("highway")) continue;
      way.node_refs = el->at("nodes").get<std::vector<std::int64_t>>();
      if (way.node_refs.size() < 2) {
        spdlog::warn("overpass: skipping way {} with fewer than 2 nodes", way.way_id);
        continue;
      }
      const json* geometry = el->contains("geometry") ? &el->at("geometry") : nullptr;
      if (geometry && geometry->is_array() && geometry->size() == way.node_refs.size()) {
        for (std::size_t i = 0; i < way.node_refs.size(); ++i) {
          const json& g = (*geometry)[i];
          if (g.is_object() && g.contains("lat") && g.contains("lon")) {
            out.nodes.try_emplace(way.node_refs[i],
                                  LonLat{g["lon"].get<double>(), g["lat"].get<double>()});
          }
        }
      }
      for (auto id : way.node_refs) {
        if (!out.nodes.contains(id)) missing.insert(id);
      }
      out.ways.push_back(std::move(way));
    }
    if (!missing.empty()) {
      throw Error(ErrorKind::kParse,
                  fmt::format("overpass response lacks coordinates for referenced node(s): {}",
                              fmt::join(missing, ", ")));
    }
  } catch (const json::exception& e) {
    throw ParseError(fmt::format("overpass response has an unexpected structure: {}", e.what()),
                     0);
  }
  return out;
}

std::string overpass_query(const BoundingBox& bbox) {
  return fmt::format("[out:json][timeout:180];\nway[\"highway\"]({:.7f},{:.7f},{:.7f},{:.7f});\nout geom;\n",
                     bbox.min_lat, bbox.min_lon, bbox.max_lat, bbox.max_lon);
}

FetchResult fetch_osm(const BoundingBox& bbox, const FetchOptions& options) {
  FetchResult result;
  const std::string query = overpass_query(bbox);
  result.provenance.endpoint = options.endpoint;
  result.provenance.query = query;
  result.provenance.cache_key = sha256_hex(query);
  result.cache_file = options.cache_dir / (result.provenance.cache_key + ".json");
  const auto meta_file = options.cache_dir / (result.provenance.cache_key + ".meta.json");

  if (std::filesystem::exists(result.cache_file)) {
    result.document = read_file(result.cache_file);
    result.from_cache = true;
    if (std::filesystem::exists(meta_file)) {
      const json meta = json::parse(read_file(meta_file), nullptr, false);
      if (meta.is_object()) {
        result.provenance.retrieved_at = meta.value("retrieved_at", "");
        result.provenance.endpoint = meta.value("endpoint", options.endpoint);
      }
    }
    spdlog::info("overpass: replaying cached response {}", result.cache_file.string());
    return result;
  }
  if (options.offline) {
    throw Error(ErrorKind::kUpstream,
                fmt::format("overpass: no cached response {} and network access is disabled",
                            result.cache_file.string()));
  }

  auto transport = options.transport ? options.transport : http::default_transport();
  http::Request request;
  request.method = "POST";
  request.url = options.endpoint;
  request.content_type = "application/x-www-form-urlencoded";
  request.body = "data=" + http::url_encode(query);
  spdlog::info("overpass: querying {}", options.endpoint);
  const http::Response response =
      http::send_with_retry(*transport, request, options.retry, nullptr, "overpass");
  if (response.status != 200) {
    throw UpstreamError(fmt::format("overpass: HTTP {}", response.status), response.status, 1);
  }
  // Validates before anything is persisted.
  parse_overpass(response.body);

  result.provenance.retrieved_at = utc_now_iso();
  write_atomic(result.cache_file, response.body);
  json meta = {{"endpoint", options.endpoint},
               {"query", query},
               {"retrieved_at", result.provenance.retrieved_at}};
  write_atomic(meta_file, meta.dump(2) + "\n");
  result.document = response.body;
  return result;
}

std::map<std::int64_t, int> street_degree(const ParsedOverpass& parsed,
                                          const HighwayFilter& filter) {
  std::map<std::int64_t, int> degree;
  for (const RawOsmWay& way : parsed.ways) {
    if (!retained(way, filter)) continue;
    const auto refs = clean_refs(way.node_refs);
    for (std::size_t i = 1; i < refs.size(); ++i) {
      ++degree[refs[i - 1]];
      ++degree[refs[i]];
    }
  }
  return degree;
}

NetworkDataset build_network(const ParsedOverpass& parsed, const HighwayFilter& filter,
                             const MetricCrs& crs) {
  NetworkDataset net;
  net.provenance.osm_base_timestamp = parsed.osm_base_timestamp;

  std::vector<const RawOsmWay*> ways;
  for (const RawOsmWay& way : parsed.ways) {
    if (retained(way, filter) && clean_refs(way.node_refs).size() >= 2) ways.push_back(&way);
  }
  std::sort(ways.begin(), ways.end(),
            [](const RawOsmWay* a, const RawOsmWay* b) { return a->way_id < b->way_id; });

  const auto degree = street_degree(parsed, filter);
  std::map<std::int64_t, int> way_count;
  for (const RawOsmWay* way : ways) {
    auto refs = clean_refs(way->node_refs);
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    for (auto id : refs) ++way_count[id];
  }

  for (const RawOsmWay* way : ways) {
    const auto refs = clean_refs(way->node_refs);
    for (auto id : refs) net.nodes[id] = parsed.nodes.at(id);

    std::size_t start = 0;
    int index = 0;
    const auto emit = [&](std::size_t first, std::size_t last) {
      StreetSegment seg;
      seg.source_way_id = way->way_id;
      seg.highway_class = way->tags.at("highway");
      for (std::size_t i = first; i <= last; ++i) {
        seg.node_ids.push_back(refs[i]);
        seg.polyline.push_back(parsed.nodes.at(refs[i]));
      }
      seg.length_m = metric_length(seg.polyline, crs);
      if (!(seg.length_m > 0.0)) {
        ++net.dropped_degenerate;
        return;
      }
      seg.segment_id = fmt::format("{}_{}", way->way_id, index++);
      net.segments.push_back(std::move(seg));
    };
    for (std::size_t i = 1; i + 1 < refs.size(); ++i) {
      const auto id = refs[i];
      if (way_count.at(id) >= 2 || degree.at(id) >= 3) {
        emit(start, i);
        start = i;
      }
    }
    emit(start, refs.size() - 1);
  }
  if (net.dropped_degenerate > 0) {
    spdlog::warn("network: dropped {} zero-length segment(s)", net.dropped_degenerate);
  }
  return net;
}

}  // namespace streetscape::osm
