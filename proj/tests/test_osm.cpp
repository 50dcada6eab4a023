#include <doctest.h>

#include <numeric>

#include "fake_transport.hpp"
#include "streetscape/error.hpp"
#include "streetscape/hashing.hpp"
#include "streetscape/osm.hpp"
#include "support.hpp"

using namespace streetscape;
using test_support::FakeTransport;

namespace {

const MetricCrs kZone32{32, Hemisphere::kNorth};

double total_length(const std::vector<StreetSegment>& segments) {
  return std::accumulate(segments.begin(), segments.end(), 0.0,
                         [](double acc, const StreetSegment& s) { return acc + s.length_m; });
}

}  // namespace

TEST_CASE("three-way fixture parses to three highway ways") {
  const auto parsed = osm::parse_overpass(test_support::read_fixture("overpass/three_ways.json"));
  CHECK(parsed.ways.size() == 3);
  CHECK(parsed.nodes.size() == 7);
  CHECK(parsed.way_element_count == 4);
  CHECK(parsed.node_element_count == 7);
  CHECK(parsed.element_count == 11);
  CHECK(parsed.osm_base_timestamp == "2025-03-01T12:00:00Z");
  CHECK(parsed.ways[0].tags.at("name") == "Rue A");
  CHECK(parsed.ways[1].node_refs == std::vector<std::int64_t>{2, 4, 5});
}

TEST_CASE("non-highway ways are excluded") {
  const auto parsed = osm::parse_overpass(R"({"elements":[
    {"type":"node","id":1,"lat":0,"lon":0},{"type":"node","id":2,"lat":0,"lon":0.001},
    {"type":"way","id":9,"nodes":[1,2],"tags":{"railway":"rail"}}]})");
  CHECK(parsed.ways.empty());
}

TEST_CASE("malformed documents fail with a byte offset and no partial data") {
  const std::string doc = test_support::read_fixture("overpass/three_ways.json");
  const std::string truncated = doc.substr(0, doc.size() / 2);
  try {
    osm::parse_overpass(truncated);
    FAIL("truncated document accepted");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
    CHECK(e.offset() <= truncated.size() + 1);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
  CHECK_THROWS_AS(osm::parse_overpass(R"({"version":0.6})"), ParseError);
}

TEST_CASE("missing node coordinates are listed") {
  try {
    osm::parse_overpass(R"({"elements":[{"type":"node","id":1,"lat":0,"lon":0},
      {"type":"way","id":5,"nodes":[1,77,78],"tags":{"highway":"service"}}]})");
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("77, 78") != std::string::npos);
  }
}

TEST_CASE("geometry arrays supply coordinates") {
  const auto parsed = osm::parse_overpass(test_support::read_fixture("overpass/e2e_nice.json"));
  CHECK(parsed.ways.size() == 4);
  CHECK(parsed.nodes.at(10) == LonLat{7.300, 43.73946});
}

TEST_CASE("empty response is a valid empty dataset") {
  const auto parsed = osm::parse_overpass(R"({"elements":[]})");
  const auto net = osm::build_network(parsed, osm::HighwayFilter::defaults(), kZone32);
  CHECK(net.segments.empty());
}

TEST_CASE("default highway filter") {
  const auto f = osm::HighwayFilter::defaults();
  for (const char* cls : {"motorway", "motorway_link", "trunk_link", "primary", "secondary_link",
                          "tertiary", "unclassified", "residential", "living_street", "pedestrian",
                          "service"}) {
    CHECK_MESSAGE(f.accepts(cls), cls);
  }
  for (const char* cls : {"footway", "cycleway", "path", "steps", "track", "proposed"}) {
    CHECK_FALSE(f.accepts(cls));
  }
}

TEST_CASE("two crossing ways give four segments and conserve length") {
  const auto parsed = osm::parse_overpass(test_support::read_fixture("overpass/cross.json"));
  const auto net = osm::build_network(parsed, osm::HighwayFilter::defaults(), kZone32);
  REQUIRE(net.segments.size() == 4);
  std::vector<std::string> ids;
  for (const auto& s : net.segments) ids.push_back(s.segment_id);
  CHECK(ids == std::vector<std::string>{"10_0", "10_1", "20_0", "20_1"});
  double ways = 0.0;
  for (const auto& w : parsed.ways) {
    std::vector<LonLat> line;
    for (auto id : w.node_refs) line.push_back(parsed.nodes.at(id));
    ways += metric_length(line, kZone32);
  }
  CHECK(std::abs(total_length(net.segments) - ways) <= 1e-6 * ways);
  for (const auto& s : net.segments) {
    CHECK(s.polyline.size() == 2);
    CHECK(s.length_m > 0.0);
    CHECK(std::abs(s.length_m - metric_length(s.polyline, kZone32)) <= 1e-6 * s.length_m);
  }
}

TEST_CASE("an isolated dead end stays whole") {
  const auto parsed = osm::parse_overpass(R"({"elements":[
    {"type":"node","id":1,"lat":43.74,"lon":7.3},{"type":"node","id":2,"lat":43.7405,"lon":7.3},
    {"type":"node","id":3,"lat":43.741,"lon":7.3005},
    {"type":"way","id":1,"nodes":[1,2,3],"tags":{"highway":"residential"}}]})");
  const auto net = osm::build_network(parsed, osm::HighwayFilter::defaults(), kZone32);
  REQUIRE(net.segments.size() == 1);
  CHECK(net.segments[0].segment_id == "1_0");
  CHECK(net.segments[0].node_ids == std::vector<std::int64_t>{1, 2, 3});
}

TEST_CASE("a self crossing without a shared node is not split") {
  const auto parsed = osm::parse_overpass(R"({"elements":[
    {"type":"node","id":1,"lat":43.740,"lon":7.300},{"type":"node","id":2,"lat":43.741,"lon":7.301},
    {"type":"node","id":3,"lat":43.741,"lon":7.300},{"type":"node","id":4,"lat":43.740,"lon":7.301},
    {"type":"way","id":1,"nodes":[1,2,3,4],"tags":{"highway":"residential"}}]})");
  const auto net = osm::build_network(parsed, osm::HighwayFilter::defaults(), kZone32);
  CHECK(net.segments.size() == 1);
}

TEST_CASE("a loop revisiting a node splits there") {
  // 1-2-3-4-2: node 2 has degree 3.
  const auto parsed = osm::parse_overpass(R"({"elements":[
    {"type":"node","id":1,"lat":43.740,"lon":7.300},{"type":"node","id":2,"lat":43.740,"lon":7.301},
    {"type":"node","id":3,"lat":43.741,"lon":7.302},{"type":"node","id":4,"lat":43.741,"lon":7.301},
    {"type":"way","id":1,"nodes":[1,2,3,4,2],"tags":{"highway":"residential"}}]})");
  const auto net = osm::build_network(parsed, osm::HighwayFilter::defaults(), kZone32);
  CHECK(net.segments.size() == 2);
}

TEST_CASE("split segments only have degree-2 interior vertices") {
  for (const char* name : {"overpass/three_ways.json", "overpass/cross.json", "overpass/e2e_nice.json"}) {
    const auto parsed = osm::parse_overpass(test_support::read_fixture(name));
    const auto filter = osm::HighwayFilter::defaults();
    const auto net = osm::build_network(parsed, filter, kZone32);
    const auto degree = osm::street_degree(parsed, filter);
    std::map<std::int64_t, int> ways_at;
    for (const auto& w : parsed.ways) {
      if (!filter.accepts(w.tags.at("highway"))) continue;
      std::set<std::int64_t> uniq(w.node_refs.begin(), w.node_refs.end());
      for (auto id : uniq) ++ways_at[id];
    }
    std::set<std::string> ids;
    for (const auto& s : net.segments) {
      CHECK(ids.insert(s.segment_id).second);
      REQUIRE(s.node_ids.size() >= 2);
      CHECK(net.nodes.contains(s.node_ids.front()));
      CHECK(net.nodes.contains(s.node_ids.back()));
      for (std::size_t i = 1; i + 1 < s.node_ids.size(); ++i) {
        CHECK(degree.at(s.node_ids[i]) <= 2);
        CHECK(ways_at.at(s.node_ids[i]) == 1);
      }
    }
  }
}

TEST_CASE("the end-to-end fixture yields five segments") {
  const auto parsed = osm::parse_overpass(test_support::read_fixture("overpass/e2e_nice.json"));
  const auto net = osm::build_network(parsed, osm::HighwayFilter::defaults(), kZone32);
  std::vector<std::string> ids;
  for (const auto& s : net.segments) ids.push_back(s.segment_id);
  CHECK(ids == std::vector<std::string>{"1000_0", "1000_1", "1001_0", "1001_1", "1002_0"});
}

TEST_CASE("overpass query text") {
  const auto bbox = BoundingBox::make(7.296, 43.738, 7.304, 43.742);
  CHECK(osm::overpass_query(bbox) ==
        "[out:json][timeout:180];\n"
        "way[\"highway\"](43.7380000,7.2960000,43.7420000,7.3040000);\n"
        "out geom;\n");
}

TEST_CASE("fetch caches the verbatim response and replays it offline") {
  test_support::TempDir dir("osm");
  const std::string body = test_support::read_fixture("overpass/cross.json");
  auto transport = std::make_shared<FakeTransport>([&](const http::Request&) {
    return http::Response{200, body, "application/json", ""};
  });
  const auto bbox = BoundingBox::make(7.29, 43.73, 7.31, 43.75);
  osm::FetchOptions opts;
  opts.endpoint = "http://overpass.invalid/api/interpreter";
  opts.cache_dir = dir.path();
  opts.transport = transport;
  opts.retry.initial_backoff = std::chrono::milliseconds(0);

  const auto first = osm::fetch_osm(bbox, opts);
  CHECK_FALSE(first.from_cache);
  CHECK(first.cache_file == dir.path() / (sha256_hex(osm::overpass_query(bbox)) + ".json"));
  CHECK(read_file(first.cache_file) == body);
  REQUIRE(transport->count() == 1);
  const auto req = transport->requests()[0];
  CHECK(req.method == "POST");
  CHECK(req.body.starts_with("data=%5Bout%3Ajson%5D"));
  CHECK_FALSE(first.provenance.retrieved_at.empty());

  opts.offline = true;
  const auto second = osm::fetch_osm(bbox, opts);
  CHECK(second.from_cache);
  CHECK(second.document == body);
  CHECK(second.provenance.retrieved_at == first.provenance.retrieved_at);
  CHECK(transport->count() == 1);
  const auto a = osm::build_network(osm::parse_overpass(first.document), osm::HighwayFilter::defaults(), kZone32);
  const auto b = osm::build_network(osm::parse_overpass(second.document), osm::HighwayFilter::defaults(), kZone32);
  REQUIRE(a.segments.size() == b.segments.size());
  for (std::size_t i = 0; i < a.segments.size(); ++i) {
    CHECK(a.segments[i].segment_id == b.segments[i].segment_id);
    CHECK(a.segments[i].polyline == b.segments[i].polyline);
    CHECK(a.segments[i].length_m == b.segments[i].length_m);
  }
}

TEST_CASE("offline cache miss is an upstream error") {
  test_support::TempDir dir("osm");
  osm::FetchOptions opts;
  opts.cache_dir = dir.path();
  opts.offline = true;
  try {
    osm::fetch_osm(BoundingBox::make(0, 0, 0.01, 0.01), opts);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUpstream);
  }
}

TEST_CASE("server errors are retried, then reported with the attempt count") {
  test_support::TempDir dir("osm");
  auto transport = std::make_shared<FakeTransport>(
      [](const http::Request&) { return http::Response{504, "busy", "text/plain", ""}; });
  osm::FetchOptions opts;
  opts.endpoint = "http://overpass.invalid/api/interpreter";
  opts.cache_dir = dir.path();
  opts.transport = transport;
  opts.retry = {2, std::chrono::milliseconds(1), 2.0};
  try {
    osm::fetch_osm(BoundingBox::make(0, 0, 0.01, 0.01), opts);
    FAIL("no error");
  } catch (const UpstreamError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.status() == 504);
  }
  CHECK(transport->count() == 3);
  CHECK(std::filesystem::is_empty(dir.path()));
}

TEST_CASE("invalid responses are never cached") {
  test_support::TempDir dir("osm");
  auto transport = std::make_shared<FakeTransport>(
      [](const http::Request&) { return http::Response{200, "{\"elements\": [", "application/json", ""}; });
  osm::FetchOptions opts;
  opts.endpoint = "http://overpass.invalid/api/interpreter";
  opts.cache_dir = dir.path();
  opts.transport = transport;
  CHECK_THROWS_AS(osm::fetch_osm(BoundingBox::make(0, 0, 0.01, 0.01), opts), ParseError);
  CHECK(std::filesystem::is_empty(dir.path()));
}
