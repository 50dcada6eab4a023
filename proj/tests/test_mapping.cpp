#include <doctest.h>

#include <regex>

#include "streetscape/error.hpp"
#include "streetscape/mapping.hpp"

using namespace streetscape;
using namespace streetscape::mapping;
using aggregate::SummaryRow;

namespace {

const MetricCrs kZone32{32, Hemisphere::kNorth};

StreetSegment seg(const std::string& id, double lon) {
  StreetSegment s;
  s.segment_id = id;
  s.polyline = {{lon, 43.74}, {lon + 0.001, 43.7405}};
  s.length_m = 90;
  return s;
}

SummaryRow row(const std::string& id, std::optional<double> mean, std::optional<double> sum = {}) {
  SummaryRow r{id, "T1", mean, sum ? sum : mean, mean, mean, mean ? 1u : 0u};
  return r;
}

std::vector<std::string> strokes(const std::string& svg) {
  std::vector<std::string> out;
  static const std::regex re(R"re(<polyline id="([^"]+)"[^>]*stroke="(#[0-9a-f]{6})")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str() + "=" + (*it)[2].str());
  }
  return out;
}

}  // namespace

TEST_CASE("ramp endpoints, midpoint and nodata") {
  MapStyle style;
  CHECK(color_for(0.0, style, 0.0, 1.0) == style.ramp.front());
  CHECK(color_for(1.0, style, 0.0, 1.0) == style.ramp.back());
  CHECK(color_for(-5.0, style, 0.0, 1.0) == style.ramp.front());
  CHECK(color_for(9.0, style, 0.0, 1.0) == style.ramp.back());
  CHECK(color_for(std::nullopt, style, 0.0, 1.0).hex() == "#808080");
  style.ramp = {Rgb::from_hex("#000000"), Rgb::from_hex("#ff8040")};
  const auto mid = color_for(0.5, style, 0.0, 1.0);
  CHECK(mid.r == 127.5);
  CHECK(mid.g == 64.0);
  CHECK(mid.b == 32.0);
  CHECK(MapStyle{}.ramp.front().hex() == "#fde725");
  CHECK(MapStyle{}.ramp.back().hex() == "#440154");
}

TEST_CASE("ramp position is monotone") {
  double prev = -1.0;
  for (int i = 0; i <= 100; ++i) {
    const double p = ramp_position(i * 0.03, 0.0, 3.0);
    CHECK(p > prev);
    prev = p;
  }
}

TEST_CASE("style defaults per task") {
  CHECK(default_style("T1").statistic == Statistic::kMean);
  CHECK(default_style("T1").fixed_domain == std::pair{0.0, 1.0});
  CHECK(default_style("T2").statistic == Statistic::kSum);
  CHECK_FALSE(default_style("T2").fixed_domain);
  CHECK(default_style("T3").fixed_domain == std::pair{0.0, 3.0});
  CHECK(default_style("T1", Statistic::kSum).statistic == Statistic::kSum);
  CHECK_FALSE(default_style("T1", Statistic::kSum).fixed_domain);
  CHECK(default_style("T3", Statistic::kMean).fixed_domain == std::pair{0.0, 3.0});
  CHECK_THROWS_AS(statistic_from("median"), Error);
  MapStyle bad;
  bad.ramp.resize(1);
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.fixed_domain = std::pair{1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("three segments get three ordered colors") {
  const std::vector<StreetSegment> segs{seg("a", 7.300), seg("b", 7.302), seg("c", 7.304)};
  const std::vector<SummaryRow> rows{row("a", 0.0), row("b", 0.5), row("c", 1.0)};
  const auto maps = render_maps(segs, {}, {}, rows, default_style("T1"), "T1", kZone32);
  const auto s = strokes(maps.streets_svg);
  MapStyle style;
  REQUIRE(s.size() == 3);
  CHECK(s[0] == "a=" + style.ramp[0].hex());
  CHECK(s[1] == "b=" + style.ramp[2].hex());
  CHECK(s[2] == "c=" + style.ramp[4].hex());
  CHECK(maps.streets_domain == std::pair{0.0, 1.0});
}

TEST_CASE("grey features are drawn first and every feature appears once") {
  const std::vector<StreetSegment> segs{seg("a", 7.300), seg("b", 7.302), seg("c", 7.304)};
  const std::vector<SamplePoint> pts{{"a#0", "a", 15, {7.3005, 43.7402}}, {"b#0", "b", 15, {7.3025, 43.7402}}};
  const std::vector<SummaryRow> srows{row("a", 0.2), row("b", std::nullopt), row("c", 0.9)};
  const std::vector<SummaryRow> prows{row("a#0", std::nullopt), row("b#0", 1.0)};
  const auto maps = render_maps(segs, pts, prows, srows, default_style("T1"), "T1", kZone32, "Test");
  const auto& svg = maps.streets_svg;
  const auto nodata = svg.find("<g id=\"nodata\"");
  const auto data = svg.find("<g id=\"data\"");
  const auto b = svg.find("id=\"b\"");
  CHECK(nodata < b);
  CHECK(b < data);
  CHECK(svg.find("id=\"a\"") > data);
  for (const char* id : {"id=\"a\"", "id=\"b\"", "id=\"c\""}) {
    const auto first = svg.find(id);
    CHECK(first != std::string::npos);
    CHECK(svg.find(id, first + 1) == std::string::npos);
  }
  CHECK(svg.find("stroke=\"#808080\"") != std::string::npos);
  CHECK(svg.find("<text id=\"legend-lo\"") != std::string::npos);
  CHECK(svg.find(">T1 mean<") != std::string::npos);
  CHECK(maps.points_svg.find("<circle id=\"a#0\"") < maps.points_svg.find("<g id=\"data\""));
}

TEST_CASE("all-grey and empty datasets still render") {
  const std::vector<StreetSegment> segs{seg("a", 7.300), seg("b", 7.302)};
  const auto maps = render_maps(segs, {}, {}, {row("a", std::nullopt), row("b", std::nullopt)},
                                default_style("T2"), "T2", kZone32);
  for (const auto& s : strokes(maps.streets_svg)) CHECK(s.ends_with("#808080"));
  const auto empty = render_maps({}, {}, {}, {}, default_style("T3"), "T3", kZone32);
  CHECK(empty.streets_svg.find("<g id=\"legend\"") != std::string::npos);
  CHECK(empty.points_svg.ends_with("</svg>\n"));
}

TEST_CASE("rendering is a pure function") {
  const std::vector<StreetSegment> segs{seg("a", 7.300), seg("b", 7.302)};
  const std::vector<SummaryRow> rows{row("a", 2.0, 8.0), row("b", 1.0, 3.0)};
  const auto style = default_style("T2");
  const auto one = render_maps(segs, {}, {}, rows, style, "T2", kZone32);
  const auto two = render_maps({segs[1], segs[0]}, {}, {}, {rows[1], rows[0]}, style, "T2", kZone32);
  CHECK(one.streets_svg == two.streets_svg);
  CHECK(one.streets_domain == std::pair{3.0, 8.0});
}
