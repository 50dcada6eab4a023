#include <doctest.h>

#include <json.hpp>

#include "streetscape/error.hpp"
#include "streetscape/files.hpp"
#include "streetscape/mock_services.hpp"
#include "streetscape/pipeline.hpp"
#include "support.hpp"

using namespace streetscape;
using namespace streetscape::pipeline;
using nlohmann::json;
using test_support::TempDir;

namespace {

json base_config(const std::string& streetview_url) {
  return json{
      {"case_name", "nice_test"},
      {"bbox", {7.296, 43.738, 7.304, 43.742}},
      {"sampling", {{"spacing_m", 40}, {"offset_m", 15}}},
      {"camera", {{"width", 64}, {"height", 48}}},
      {"imagery", {{"base_url", streetview_url}, {"requests_per_second", 0}, {"workers", 4},
                   {"backoff_ms", 1}}},
      {"overpass", {{"offline", true}}},
      {"backend", {{"kind", "mock"}, {"concurrency", 2}}},
  };
}

RunConfig config_in(const TempDir& dir, json j) {
  j["paths"] = {{"run_dir", (dir / "run").string()}};
  return RunConfig::from_json(j, dir.path());
}

Services services() {
  Services s;
  s.streetview_key = "test-key";
  return s;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kIo;
}

std::vector<std::string> artefacts(const RunPaths& p, const std::string& c) {
  return {read_file(p.streets_layer()),
          read_file(p.points_layer()),
          read_file(p.counts()),
          read_file(p.image_manifest()),
          read_file(p.results_log("T1")),
          read_file(p.results_log("T2")),
          read_file(p.aggregate_layer(c, "T1", "points")),
          read_file(p.aggregate_layer(c, "T1", "streets")),
          read_file(p.aggregate_layer(c, "T2", "streets")),
          read_file(p.map(c, "T1", "points")),
          read_file(p.map(c, "T1", "streets")),
          read_file(p.map(c, "T2", "streets"))};
}

void run_all(Pipeline& p) {
  CHECK(p.sample(test_support::fixture("overpass/e2e_nice.json")).exit_code == 0);
  CHECK(p.fetch().exit_code == 0);
  for (const char* t : {"T1", "T2"}) {
    CHECK(p.score(t).exit_code == 0);
    CHECK(p.aggregate(t).exit_code == 0);
    CHECK(p.render(t).exit_code == 0);
  }
}

}  // namespace

TEST_CASE("config validation") {
  TempDir dir("cfg");
  const json ok = base_config("http://127.0.0.1:1/streetview");
  CHECK_NOTHROW(config_in(dir, ok));
  CHECK(config_in(dir, ok).run_dir == dir / "run");
  CHECK(RunConfig::from_json(ok, dir.path()).run_dir == dir / "run_nice_test");

  const auto bad = [&](const std::function<void(json&)>& edit) {
    json j = ok;
    edit(j);
    return kind_of([&] { config_in(dir, j); });
  };
  CHECK(bad([](json& j) { j.erase("case_name"); }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["bbox"] = {7.3, 43.7, 7.2, 43.8}; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["sampling"]["spacing_m"] = 0; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["sampling"]["spacing"] = 40; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["api_key"] = "secret"; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["backend"]["kind"] = "gpu"; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["tasks"] = {"T9"}; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["task_files"] = {"missing.json"}; }) == ErrorKind::kConfig);
  CHECK(bad([](json& j) { j["imagery"]["dominance_threshold"] = 1.5; }) == ErrorKind::kConfig);

  write_atomic(dir / "broken.json", "{ not json");
  CHECK(kind_of([&] { RunConfig::load(dir / "broken.json"); }) == ErrorKind::kConfig);
  CHECK(kind_of([&] { RunConfig::load(dir / "absent.json"); }) == ErrorKind::kConfig);
}

TEST_CASE("config hash tracks content") {
  TempDir dir("cfg");
  json j = base_config("http://127.0.0.1:1/streetview");
  const auto a = config_in(dir, j);
  CHECK(a.hash() == config_in(dir, j).hash());
  j["sampling"]["spacing_m"] = 30;
  CHECK(a.hash() != config_in(dir, j).hash());
}

TEST_CASE("stages refuse to run out of order before touching the run directory") {
  TempDir dir("order");
  Pipeline p(config_in(dir, base_config("http://127.0.0.1:1/streetview")), false, services());
  CHECK(kind_of([&] { p.fetch(); }) == ErrorKind::kPipeline);
  CHECK(kind_of([&] { p.score("T1"); }) == ErrorKind::kPipeline);
  CHECK(kind_of([&] { p.aggregate("T1"); }) == ErrorKind::kPipeline);
  CHECK(kind_of([&] { p.render("T1"); }) == ErrorKind::kPipeline);
  CHECK(kind_of([&] { p.validate("T1", dir / "ann.csv", 20, 1); }) == ErrorKind::kPipeline);
  CHECK_FALSE(std::filesystem::exists(dir / "run"));
  CHECK(kind_of([&] { p.score("T7"); }) == ErrorKind::kConfig);
}

TEST_CASE("offline sample without a cached response is an upstream failure") {
  TempDir dir("offline");
  Pipeline p(config_in(dir, base_config("http://127.0.0.1:1/streetview")), false, services());
  CHECK(kind_of([&] { p.sample(); }) == ErrorKind::kUpstream);
  CHECK(kind_of([&] { p.sample(dir / "nope.json"); }) == ErrorKind::kConfig);
}

TEST_CASE("sample stage outputs and counts schema") {
  TempDir dir("sample");
  Pipeline p(config_in(dir, base_config("http://127.0.0.1:1/streetview")), false, services());
  const auto r = p.sample(test_support::fixture("overpass/e2e_nice.json"), true);
  CHECK(r.exit_code == 0);
  CHECK_FALSE(r.skipped);
  CHECK(p.sample().skipped);

  const auto counts = nlohmann::ordered_json::parse(read_file(p.paths().counts()));
  std::vector<std::string> keys;
  for (const auto& [k, _] : counts.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"segments", "total_length_km", "points", "bbox_km2",
                                         "points_4_images", "points_no_coverage"});
  CHECK(counts["segments"] == 5);
  CHECK(counts["points"] == 10);
  CHECK(counts["points_4_images"].is_null());

  const auto layer = geojson::read_collection(read_file(p.paths().points_layer()));
  CHECK(layer.features.size() == 10);
  CHECK(layer.metadata["crs"] == "EPSG:32632");
  CHECK(layer.metadata["overpass_endpoint"] == "seed");
  CHECK(layer.metadata["osm_base_timestamp"].is_string());
  CHECK(std::filesystem::exists(p.paths().network_gpkg("nice_test")));

  // Fetch without a key fails before any request.
  Pipeline keyless(p.config(), false, Services{});
  if (std::getenv(imagery::kApiKeyEnv) == nullptr) {
    CHECK(kind_of([&] { keyless.fetch(); }) == ErrorKind::kConfig);
  }

  // A different configuration needs --force.
  json changed = base_config("http://127.0.0.1:1/streetview");
  changed["sampling"]["spacing_m"] = 30;
  Pipeline other(config_in(dir, changed), false, services());
  CHECK(kind_of([&] { other.fetch(); }) == ErrorKind::kConfig);
  Pipeline forced(config_in(dir, changed), true, services());
  CHECK(forced.sample(test_support::fixture("overpass/e2e_nice.json")).exit_code == 0);
  CHECK(nlohmann::json::parse(read_file(p.paths().counts()))["points"] != 10);
}

TEST_CASE("end to end twice gives identical outputs") {
  mock::MockServices server;
  server.start();
  TempDir a("e2e"), b("e2e");
  Pipeline pa(config_in(a, base_config(server.streetview_url())), false, services());
  Pipeline pb(config_in(b, base_config(server.streetview_url())), false, services());
  run_all(pa);
  run_all(pb);
  CHECK(artefacts(pa.paths(), "nice_test") == artefacts(pb.paths(), "nice_test"));

  const auto counts = json::parse(read_file(pa.paths().counts()));
  CHECK(counts["points_4_images"].is_number_integer());
  CHECK(counts["points_4_images"].get<int>() + counts["points_no_coverage"].get<int>() <= 10);
  CHECK(scoring::read_results_log(pa.paths().results_log("T1")).size() == 40);

  // Reruns are no-ops.
  const int served = server.imagery_requests();
  const int chats = server.chat_requests();
  CHECK(pa.fetch().skipped);
  CHECK(pa.score("T1").skipped);
  CHECK(pa.aggregate("T1").skipped);
  CHECK(pa.render("T1").skipped);
  CHECK(server.imagery_requests() == served);
  CHECK(server.chat_requests() == chats);

  // A different statistic is a new render.
  const auto sum = pa.render("T1", mapping::Statistic::kSum);
  CHECK_FALSE(sum.skipped);
  CHECK(read_file(pa.paths().map("nice_test", "T1", "streets")).find(">T1 sum<") != std::string::npos);

  // Validation: template first, then the report.
  const auto ann = a / "ann.csv";
  CHECK(pa.validate("T1", ann, 3, 7).exit_code == 0);
  auto rows = read_file(ann);
  CHECK(rows.starts_with("point_id,heading_deg,task_id,predicted,human\n"));
  CHECK(kind_of([&] { pa.validate("T1", ann, 3, 7); }) == ErrorKind::kValidation);
  std::string filled;
  std::size_t start = 0;
  for (std::size_t end = rows.find('\n'); end != std::string::npos; end = rows.find('\n', start)) {
    std::string line = rows.substr(start, end - start);
    if (start > 0) line += line.ends_with(",0,") ? "0" : "NA";
    filled += line + "\n";
    start = end + 1;
  }
  write_atomic(ann, filled);
  const auto report = pa.validate("T1", ann, 3, 7);
  CHECK(report.exit_code == 0);
  CHECK(report.message.find("Overall Accuracy") != std::string::npos);
  CHECK(std::filesystem::exists(pa.paths().report("nice_test", "T1", "csv")));
}

TEST_CASE("interrupted fetch resumes and an unreachable backend exits 3") {
  mock::MockServices server;
  server.start();
  TempDir dir("resume");
  json j = base_config(server.streetview_url());
  j["backend"] = {{"kind", "http"}, {"base_url", "http://127.0.0.1:9/v1"}, {"max_retries", 0},
                  {"backoff_ms", 1}, {"timeout_s", 2}};
  Pipeline p(config_in(dir, j), false, services());
  CHECK(p.sample(test_support::fixture("overpass/e2e_nice.json")).exit_code == 0);
  const auto partial = p.fetch(10);
  CHECK(partial.exit_code == 0);
  CHECK(kind_of([&] { p.score("T1"); }) == ErrorKind::kPipeline);
  CHECK(p.fetch().exit_code == 0);
  // Downloads finished past the limit are discarded; lookahead is 2 * workers.
  CHECK(server.imagery_requests() >= 40);
  CHECK(server.imagery_requests() < 40 + 2 * 4);
  CHECK(imagery::read_manifest(p.paths().image_manifest()).size() == 40);

  const auto scored = p.score("T1");
  CHECK(scored.exit_code == 3);
  CHECK(kind_of([&] { p.aggregate("T1"); }) == ErrorKind::kPipeline);
}

TEST_CASE("export tasks") {
  TempDir dir("tasks");
  const auto written = export_tasks(scoring::TaskRegistry{}, dir / "tasks");
  REQUIRE(written.size() == 3);
  const auto t3 = scoring::task_from_json(nlohmann::ordered_json::parse(read_file(written[2])));
  CHECK(t3.task_id == "T3");
  CHECK(scoring::assemble_prompt(t3) == scoring::assemble_prompt(scoring::TaskRegistry{}.get("T3")));
}
