#include "streetscape/pipeline.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "streetscape/aggregate.hpp"
#include "streetscape/error.hpp"
#include "streetscape/files.hpp"
#include "streetscape/geojson.hpp"
#include "streetscape/gpkg.hpp"
#include "streetscape/hashing.hpp"

namespace streetscape::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorKind::kConfig, "config: " + message);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(fmt::format("{} must be an object", where));
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error(fmt::format("unknown key '{}' in {}", key, where.empty() ? "top level" : where));
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(fmt::format("{}.{} has the wrong type", where, key));
  }
}

http::RetryPolicy retry_from(const json& j, http::RetryPolicy base, const std::string& where) {
  base.max_retries = get_or(j, "max_retries", base.max_retries, where);
  base.initial_backoff =
      std::chrono::milliseconds(get_or<long long>(j, "backoff_ms", base.initial_backoff.count(), where));
  if (base.max_retries < 0) config_error(where + ".max_retries must be >= 0");
  if (base.initial_backoff.count() < 0) config_error(where + ".backoff_ms must be >= 0");
  return base;
}

json retry_to(const http::RetryPolicy& r) {
  return {{"max_retries", r.max_retries}, {"backoff_ms", r.initial_backoff.count()}};
}

std::string env_or_empty(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

geojson::Collection read_layer(const fs::path& path) {
  return geojson::read_collection(read_file(path));
}

}  // namespace

// --- RunConfig --------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, "", {"case_name", "bbox", "sampling", "highway_classes", "camera", "imagery",
                     "overpass", "backend", "tasks", "task_files", "style", "paths"});
  RunConfig cfg;
  cfg.case_name = get_or<std::string>(j, "case_name", "", "");
  if (cfg.case_name.empty()) config_error("case_name is required");
  if (cfg.case_name.find_first_of("/\\ ") != std::string::npos) {
    config_error("case_name must not contain spaces or path separators");
  }

  if (!j.contains("bbox") || !j["bbox"].is_array() || j["bbox"].size() != 4 ||
      !std::all_of(j["bbox"].begin(), j["bbox"].end(), [](const json& v) { return v.is_number(); })) {
    config_error("bbox must be [min_lon, min_lat, max_lon, max_lat]");
  }
  cfg.bbox = BoundingBox::make(j["bbox"][0], j["bbox"][1], j["bbox"][2], j["bbox"][3]);

  if (j.contains("sampling")) {
    const json& s = j["sampling"];
    check_keys(s, "sampling", {"spacing_m", "offset_m"});
    cfg.sampling.spacing_m = get_or(s, "spacing_m", cfg.sampling.spacing_m, "sampling");
    cfg.sampling.offset_m = get_or(s, "offset_m", cfg.sampling.offset_m, "sampling");
  }
  cfg.sampling.validate();

  cfg.highway_classes = get_or(j, "highway_classes", cfg.highway_classes, "");

  if (j.contains("camera")) {
    const json& c = j["camera"];
    check_keys(c, "camera", {"headings_deg", "pitch_deg", "fov_deg", "width", "height"});
    cfg.camera.headings_deg = get_or(c, "headings_deg", cfg.camera.headings_deg, "camera");
    cfg.camera.pitch_deg = get_or(c, "pitch_deg", cfg.camera.pitch_deg, "camera");
    cfg.camera.fov_deg = get_or(c, "fov_deg", cfg.camera.fov_deg, "camera");
    cfg.camera.width = get_or(c, "width", cfg.camera.width, "camera");
    cfg.camera.height = get_or(c, "height", cfg.camera.height, "camera");
  }
  cfg.camera.validate();

  if (j.contains("imagery")) {
    const json& m = j["imagery"];
    check_keys(m, "imagery", {"base_url", "requests_per_second", "workers", "max_retries",
                              "backoff_ms", "dominance_threshold"});
    cfg.streetview_url = get_or(m, "base_url", cfg.streetview_url, "imagery");
    auto& p = cfg.imagery_policy;
    p.requests_per_second = get_or(m, "requests_per_second", p.requests_per_second, "imagery");
    p.workers = get_or(m, "workers", p.workers, "imagery");
    p.dominance_threshold = get_or(m, "dominance_threshold", p.dominance_threshold, "imagery");
    p.retry = retry_from(m, p.retry, "imagery");
    if (p.requests_per_second < 0) config_error("imagery.requests_per_second must be >= 0");
    if (p.workers == 0) config_error("imagery.workers must be >= 1");
    if (!(p.dominance_threshold > 0.0 && p.dominance_threshold <= 1.0)) {
      config_error("imagery.dominance_threshold must lie in (0, 1]");
    }
  }
  http::Url::parse(cfg.streetview_url);

  if (j.contains("overpass")) {
    const json& o = j["overpass"];
    check_keys(o, "overpass", {"endpoint", "offline", "max_retries", "backoff_ms"});
    cfg.overpass_url = get_or(o, "endpoint", cfg.overpass_url, "overpass");
    cfg.offline = get_or(o, "offline", cfg.offline, "overpass");
    cfg.overpass_retry = retry_from(o, cfg.overpass_retry, "overpass");
  }
  http::Url::parse(cfg.overpass_url);

  if (j.contains("backend")) {
    const json& b = j["backend"];
    check_keys(b, "backend", {"kind", "base_url", "model", "temperature", "max_new_tokens", "stop",
                              "concurrency", "max_retries", "backoff_ms", "timeout_s"});
    auto& be = cfg.backend;
    const auto kind = get_or<std::string>(b, "kind", "mock", "backend");
    if (kind == "mock") {
      be.kind = scoring::BackendKind::kMock;
    } else if (kind == "http") {
      be.kind = scoring::BackendKind::kHttp;
    } else {
      config_error(fmt::format("backend.kind must be 'mock' or 'http', not '{}'", kind));
    }
    be.base_url = get_or(b, "base_url", be.base_url, "backend");
    be.model_name = get_or(b, "model", be.model_name, "backend");
    be.temperature = get_or(b, "temperature", be.temperature, "backend");
    be.max_new_tokens = get_or(b, "max_new_tokens", be.max_new_tokens, "backend");
    be.stop_sequences = get_or(b, "stop", be.stop_sequences, "backend");
    be.concurrency = get_or(b, "concurrency", be.concurrency, "backend");
    be.retry = retry_from(b, be.retry, "backend");
    be.timeout = std::chrono::seconds(get_or<long long>(b, "timeout_s", be.timeout.count(), "backend"));
  }
  cfg.backend.validate();

  cfg.tasks = get_or(j, "tasks", cfg.tasks, "");
  if (cfg.tasks.empty()) config_error("tasks must name at least one task");
  for (const auto& file : get_or(j, "task_files", std::vector<std::string>{}, "")) {
    const fs::path p(file);
    cfg.task_files.push_back(p.is_absolute() ? p : base_dir / p);
  }

  if (j.contains("style")) {
    const json& s = j["style"];
    check_keys(s, "style", {"ramp", "nodata", "width", "height", "street_width", "point_radius"});
    if (s.contains("ramp")) {
      cfg.style.ramp.clear();
      for (const auto& hex : get_or(s, "ramp", std::vector<std::string>{}, "style")) {
        cfg.style.ramp.push_back(mapping::Rgb::from_hex(hex));
      }
      cfg.style_has_ramp = true;
    }
    if (s.contains("nodata")) cfg.style.nodata = mapping::Rgb::from_hex(s["nodata"].get<std::string>());
    cfg.style.width = get_or(s, "width", cfg.style.width, "style");
    cfg.style.height = get_or(s, "height", cfg.style.height, "style");
    cfg.style.street_width = get_or(s, "street_width", cfg.style.street_width, "style");
    cfg.style.point_radius = get_or(s, "point_radius", cfg.style.point_radius, "style");
    cfg.style.validate();
  }

  if (j.contains("paths")) {
    check_keys(j["paths"], "paths", {"run_dir"});
    const fs::path run_dir(get_or<std::string>(j["paths"], "run_dir", "", "paths"));
    if (!run_dir.empty()) cfg.run_dir = (run_dir.is_absolute() ? run_dir : base_dir / run_dir).lexically_normal();
  }
  if (cfg.run_dir.empty()) cfg.run_dir = base_dir / ("run_" + cfg.case_name);

  cfg.registry();  // every enabled task must resolve
  return cfg;
}

RunConfig RunConfig::load(const fs::path& path) {
  if (!fs::exists(path)) config_error(fmt::format("{} does not exist", path.string()));
  const json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) config_error(fmt::format("{} is not valid JSON", path.string()));
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::canonical_json() const {
  json j;
  j["case_name"] = case_name;
  j["bbox"] = {bbox.min_lon, bbox.min_lat, bbox.max_lon, bbox.max_lat};
  j["sampling"] = {{"spacing_m", sampling.spacing_m}, {"offset_m", sampling.offset_m}};
  const auto filter = highway_filter();
  std::vector<std::string> classes(filter.classes().begin(), filter.classes().end());
  j["highway_classes"] = classes;
  j["camera"] = {{"headings_deg", camera.headings_deg}, {"pitch_deg", camera.pitch_deg},
                 {"fov_deg", camera.fov_deg},           {"width", camera.width},
                 {"height", camera.height}};
  j["imagery"] = retry_to(imagery_policy.retry);
  j["imagery"]["base_url"] = streetview_url;
  j["imagery"]["dominance_threshold"] = imagery_policy.dominance_threshold;
  j["overpass"] = {{"endpoint", overpass_url}};
  j["backend"] = {{"kind", backend.kind == scoring::BackendKind::kMock ? "mock" : "http"},
                  {"base_url", backend.base_url},
                  {"model", backend.model_name},
                  {"temperature", backend.temperature},
                  {"max_new_tokens", backend.max_new_tokens},
                  {"stop", backend.stop_sequences}};
  j["tasks"] = tasks;
  json files = json::array();
  for (const auto& f : task_files) files.push_back(f.string());
  j["task_files"] = files;
  return j;
}

std::string RunConfig::hash() const { return sha256_hex(canonical_json().dump()); }

osm::HighwayFilter RunConfig::highway_filter() const {
  if (highway_classes.empty()) return osm::HighwayFilter::defaults();
  return osm::HighwayFilter({highway_classes.begin(), highway_classes.end()});
}

scoring::TaskRegistry RunConfig::registry() const {
  scoring::TaskRegistry registry;
  for (const auto& file : task_files) {
    if (!fs::exists(file)) config_error(fmt::format("task file {} does not exist", file.string()));
    const auto j = ojson::parse(read_file(file), nullptr, false);
    if (j.is_discarded()) config_error(fmt::format("task file {} is not valid JSON", file.string()));
    registry.add(scoring::task_from_json(j));
  }
  for (const auto& id : tasks) {
    if (!registry.contains(id)) config_error(fmt::format("task '{}' is not registered", id));
  }
  return registry;
}

// --- RunManifest ------------------------------------------------------------

RunManifest RunManifest::load_or_create(const fs::path& path, const std::string& config_hash) {
  RunManifest m;
  m.path_ = path;
  m.config_hash_ = config_hash;
  if (!fs::exists(path)) {
    m.created_at_ = utc_now_iso();
    return m;
  }
  const json j = json::parse(read_file(path), nullptr, false);
  if (!j.is_object() || !j.contains("stages") || !j["stages"].is_object()) {
    throw Error(ErrorKind::kPipeline, fmt::format("{} is not a run manifest", path.string()));
  }
  m.config_hash_ = j.value("config_hash", "");
  m.created_at_ = j.value("created_at", "");
  m.stages_ = j["stages"];
  return m;
}

bool RunManifest::complete(const std::string& stage) const { return stages_.contains(stage); }

void RunManifest::mark(const std::string& stage, const json& details) {
  json entry = details.is_object() ? details : json::object();
  entry["completed_at"] = utc_now_iso();
  stages_[stage] = entry;
}

void RunManifest::invalidate(const std::vector<std::string>& prefixes) {
  std::vector<std::string> doomed;
  for (const auto& [key, _] : stages_.items()) {
    for (const auto& prefix : prefixes) {
      if (key == prefix || key.starts_with(prefix + ":")) doomed.push_back(key);
    }
  }
  for (const auto& key : doomed) stages_.erase(key);
}

void RunManifest::save() const {
  json j;
  j["tool_version"] = STREETSCAPE_VERSION;
  j["config_hash"] = config_hash_;
  j["created_at"] = created_at_;
  j["updated_at"] = utc_now_iso();
  j["stages"] = stages_;
  fs::create_directories(path_.parent_path());
  write_atomic(path_, j.dump(2) + "\n");
}

// --- RunPaths ---------------------------------------------------------------

fs::path RunPaths::network_gpkg(const std::string& case_name) const {
  return root / "layers" / (case_name + "_network.gpkg");
}
fs::path RunPaths::results_log(const std::string& task) const {
  return root / "logs" / ("scores_" + task + ".csv");
}
fs::path RunPaths::aggregate_layer(const std::string& case_name, const std::string& task,
                                   const std::string& level) const {
  return root / "layers" / fmt::format("{}_{}_{}.geojson", case_name, task, level);
}
fs::path RunPaths::aggregate_gpkg(const std::string& case_name, const std::string& task) const {
  return root / "layers" / fmt::format("{}_{}.gpkg", case_name, task);
}
fs::path RunPaths::map(const std::string& case_name, const std::string& task,
                       const std::string& level) const {
  return root / "maps" / fmt::format("{}_{}_{}.svg", case_name, task, level);
}
fs::path RunPaths::report(const std::string& case_name, const std::string& task,
                          const std::string& ext) const {
  return root / "reports" / fmt::format("{}_{}_validation.{}", case_name, task, ext);
}

ojson counts_to_json(const sampler::CountsReport& r) {
  ojson j;
  j["segments"] = r.segments;
  j["total_length_km"] = r.total_length_km;
  j["points"] = r.points;
  j["bbox_km2"] = r.bbox_km2;
  j["points_4_images"] = r.points_4_images ? ojson(*r.points_4_images) : ojson(nullptr);
  j["points_no_coverage"] = r.points_no_coverage ? ojson(*r.points_no_coverage) : ojson(nullptr);
  return j;
}

// --- Pipeline ---------------------------------------------------------------

Pipeline::Pipeline(RunConfig config, bool force, Services services)
    : config_(std::move(config)),
      force_(force),
      services_(std::move(services)),
      paths_{config_.run_dir},
      registry_(config_.registry()) {
  if (services_.streetview_key.empty()) services_.streetview_key = env_or_empty(imagery::kApiKeyEnv);
  if (services_.backend_token.empty()) services_.backend_token = env_or_empty(scoring::kBackendTokenEnv);
  if (!services_.transport) services_.transport = http::default_transport();
}

RunManifest Pipeline::open_manifest(bool resetting) {
  auto manifest = RunManifest::load_or_create(paths_.manifest(), config_.hash());
  if (manifest.config_hash() != config_.hash()) {
    if (!force_ && !resetting) {
      throw Error(ErrorKind::kConfig,
                  fmt::format("config: {} was produced with a different configuration; rerun with --force",
                              paths_.root.string()));
    }
    manifest.set_config_hash(config_.hash());
  }
  return manifest;
}

void Pipeline::require(const RunManifest& manifest, const std::string& stage,
                       const std::string& needed) const {
  if (!manifest.complete(needed)) {
    throw Error(ErrorKind::kPipeline,
                fmt::format("pipeline: stage '{}' requires stage '{}', which has not completed", stage,
                            needed));
  }
}

const scoring::TaskSpec& Pipeline::task(const std::string& task_id) const {
  if (std::find(config_.tasks.begin(), config_.tasks.end(), task_id) == config_.tasks.end()) {
    config_error(fmt::format("task '{}' is not enabled for this run", task_id));
  }
  return registry_.get(task_id);
}

StageResult Pipeline::sample(const std::optional<fs::path>& seed_cache, bool gpkg) {
  auto manifest = open_manifest(force_);
  if (manifest.complete("sample") && !force_) {
    return {true, 0, "sample: already complete"};
  }
  if (seed_cache && !fs::exists(*seed_cache)) {
    config_error(fmt::format("seed cache {} does not exist", seed_cache->string()));
  }
  manifest.invalidate({"sample", "fetch", "score", "aggregate", "render", "validate"});

  const MetricCrs crs = config_.crs();
  osm::FetchOptions fo;
  fo.endpoint = config_.overpass_url;
  fo.cache_dir = paths_.overpass_cache();
  fo.offline = config_.offline;
  fo.retry = config_.overpass_retry;
  fo.transport = services_.transport;
  fs::create_directories(fo.cache_dir);
  if (seed_cache) {
    const std::string key = sha256_hex(osm::overpass_query(config_.bbox));
    const std::string doc = read_file(*seed_cache);
    osm::parse_overpass(doc);
    write_atomic(fo.cache_dir / (key + ".json"), doc);
    const json meta = {{"endpoint", "seed"}, {"source", seed_cache->filename().string()}};
    write_atomic(fo.cache_dir / (key + ".meta.json"), meta.dump(2) + "\n");
  }

  osm::FetchResult fetched;
  try {
    fetched = osm::fetch_osm(config_.bbox, fo);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kUpstream) throw Error(ErrorKind::kUpstream, "sample: " + std::string(e.what()));
    throw;
  }
  const auto parsed = osm::parse_overpass(fetched.document);
  auto net = osm::build_network(parsed, config_.highway_filter(), crs);
  net.provenance = fetched.provenance;
  net.provenance.osm_base_timestamp = parsed.osm_base_timestamp;
  const auto sampled = sampler::sample_network(net, config_.sampling, crs, config_.bbox);

  ojson meta;
  meta["case_name"] = config_.case_name;
  meta["crs"] = fmt::format("EPSG:{}", crs.epsg());
  meta["overpass_endpoint"] = net.provenance.endpoint;
  meta["overpass_cache_key"] = net.provenance.cache_key;
  if (!net.provenance.retrieved_at.empty()) meta["retrieved_at"] = net.provenance.retrieved_at;
  if (!net.provenance.osm_base_timestamp.empty()) {
    meta["osm_base_timestamp"] = net.provenance.osm_base_timestamp;
  }
  meta["spacing_m"] = config_.sampling.spacing_m;
  meta["offset_m"] = config_.sampling.offset_m;

  fs::create_directories(paths_.root / "layers");
  const auto streets = geojson::streets_features(net.segments);
  const auto points = geojson::points_features(sampled.points);
  write_atomic(paths_.streets_layer(), geojson::write_collection("streets", streets, meta));
  write_atomic(paths_.points_layer(), geojson::write_collection("points", points, meta));
  write_atomic(paths_.counts(), counts_to_json(sampled.report).dump(2) + "\n");
  if (gpkg) {
    gpkg::write_geopackage(paths_.network_gpkg(config_.case_name),
                           {{"streets", streets}, {"points", points}});
  }

  const auto& r = sampled.report;
  manifest.mark("sample", {{"segments", r.segments}, {"points", r.points}});
  manifest.save();
  return {false, 0,
          fmt::format("sample: {} segments, {:.3f} km, {} points", r.segments, r.total_length_km, r.points)};
}

StageResult Pipeline::fetch(std::optional<std::size_t> stop_after) {
  auto manifest = open_manifest(false);
  require(manifest, "fetch", "sample");
  if (manifest.complete("fetch") && !force_) return {true, 0, "fetch: already complete"};
  if (services_.streetview_key.empty()) {
    config_error(fmt::format("set {} to the Street View API key", imagery::kApiKeyEnv));
  }
  manifest.invalidate({"fetch", "score", "aggregate", "render", "validate"});
  manifest.save();

  const auto points = geojson::points_from(read_layer(paths_.points_layer()));
  imagery::FetchOptions fo;
  fo.base_url = config_.streetview_url;
  fo.api_key = services_.streetview_key;
  fo.image_dir = paths_.images();
  fo.manifest_path = paths_.image_manifest();
  fo.policy = config_.imagery_policy;
  fo.policy.stop_after = stop_after;
  fo.transport = services_.transport;
  const auto outcome = imagery::fetch_batch(points, config_.camera, fo);

  const auto cov = imagery::coverage(outcome.records, config_.camera.headings_deg.size());
  auto counts = json::parse(read_file(paths_.counts()));
  counts["points_4_images"] = cov.points_all_headings;
  counts["points_no_coverage"] = cov.points_no_coverage;
  // Keep the key order of the sample stage.
  ojson ordered;
  for (const char* key : {"segments", "total_length_km", "points", "bbox_km2", "points_4_images",
                          "points_no_coverage"}) {
    ordered[key] = counts[key];
  }
  write_atomic(paths_.counts(), ordered.dump(2) + "\n");

  std::size_t failed = 0;
  for (const auto& r : outcome.records) failed += r.status == imagery::ImageStatus::kFetchFailed;
  const std::string summary =
      fmt::format("fetch: {} downloaded, {} reused, {} fetch_failed, {} points with all headings",
                  outcome.downloaded, outcome.reused, failed, cov.points_all_headings);
  if (outcome.halted) {
    if (stop_after && outcome.halt_reason.starts_with("stop")) {
      return {false, 0, summary + " (stopped early; rerun to resume)"};
    }
    return {false, 3, summary + "; halted: " + outcome.halt_reason};
  }
  manifest.mark("fetch", {{"downloaded", outcome.downloaded}, {"fetch_failed", failed}});
  manifest.save();
  return {false, 0, summary};
}

StageResult Pipeline::score(const std::string& task_id, std::optional<std::size_t> stop_after) {
  const auto& spec = task(task_id);
  auto manifest = open_manifest(false);
  require(manifest, "score", "fetch");
  const std::string stage = "score:" + task_id;
  if (manifest.complete(stage) && !force_) return {true, 0, stage + ": already complete"};
  manifest.invalidate({stage, "aggregate:" + task_id, "render:" + task_id, "validate:" + task_id});
  manifest.save();

  const auto log_path = paths_.results_log(task_id);
  if (force_ && fs::exists(log_path)) fs::remove(log_path);
  fs::create_directories(log_path.parent_path());

  auto backend_cfg = config_.backend;
  backend_cfg.api_token = services_.backend_token;
  auto backend = scoring::make_backend(backend_cfg, services_.transport);
  const auto images = imagery::read_manifest(paths_.image_manifest());
  scoring::RunOptions ro;
  ro.concurrency = backend_cfg.concurrency;
  ro.stop_after = stop_after;
  const auto s = scoring::run_task(images, paths_.images(), spec, *backend, log_path, ro);

  std::size_t backend_errors = 0;
  for (const auto& r : scoring::read_results_log(log_path)) {
    backend_errors += r.status == scoring::ScoreStatus::kBackendError;
  }
  const std::string summary = fmt::format(
      "{}: {} appended ({} scored, {} unavailable, {} parse_error, {} backend_error), {} already logged",
      stage, s.appended, s.scored, s.unavailable, s.parse_errors, s.backend_errors, s.skipped_existing);
  if (s.stopped_early) return {false, 0, summary + " (stopped early; rerun to resume)"};
  if (backend_errors > 0) {
    return {false, 3, fmt::format("{}; {} backend_error record(s) in the log, rerun with --force", summary,
                                  backend_errors)};
  }
  manifest.mark(stage, {{"records", s.appended + s.skipped_existing}});
  manifest.save();
  return {false, 0, summary};
}

StageResult Pipeline::aggregate(const std::string& task_id, bool gpkg) {
  task(task_id);
  auto manifest = open_manifest(false);
  const std::string stage = "aggregate:" + task_id;
  require(manifest, stage, "score:" + task_id);
  if (manifest.complete(stage) && !force_) return {true, 0, stage + ": already complete"};
  manifest.invalidate({stage, "render:" + task_id});

  const auto segments = geojson::segments_from(read_layer(paths_.streets_layer()));
  const auto points = geojson::points_from(read_layer(paths_.points_layer()));
  const auto log = scoring::read_results_log(paths_.results_log(task_id));
  const auto point_rows = aggregate::aggregate_points(log, task_id, points);
  const auto segment_rows = aggregate::aggregate_segments(point_rows, points, segments, task_id);
  const auto out = aggregate::write_geo_outputs(segments, points, point_rows, segment_rows, task_id);

  write_atomic(paths_.aggregate_layer(config_.case_name, task_id, "points"), out.points_geojson);
  write_atomic(paths_.aggregate_layer(config_.case_name, task_id, "streets"), out.streets_geojson);
  if (gpkg) {
    gpkg::write_geopackage(paths_.aggregate_gpkg(config_.case_name, task_id),
                           {{"points_" + task_id, out.point_features},
                            {"streets_" + task_id, out.street_features}});
  }
  const auto with_data = std::count_if(segment_rows.begin(), segment_rows.end(),
                                       [](const auto& r) { return r.has_data(); });
  manifest.mark(stage);
  manifest.save();
  return {false, 0,
          fmt::format("{}: {} points, {} segments ({} with data)", stage, point_rows.size(),
                      segment_rows.size(), with_data)};
}

StageResult Pipeline::render(const std::string& task_id, std::optional<mapping::Statistic> stat) {
  task(task_id);
  auto manifest = open_manifest(false);
  const std::string stage = "render:" + task_id;
  require(manifest, stage, "aggregate:" + task_id);
  // The statistic is part of the marker so that switching it is never a no-op.
  const auto style_base = mapping::default_style(task_id, stat);
  const std::string marker = stage + ":" + mapping::to_string(style_base.statistic);
  if (manifest.complete(marker) && !force_) return {true, 0, marker + ": already complete"};
  manifest.invalidate({stage});

  mapping::MapStyle style = style_base;
  if (config_.style_has_ramp) style.ramp = config_.style.ramp;
  style.nodata = config_.style.nodata;
  style.width = config_.style.width;
  style.height = config_.style.height;
  style.street_width = config_.style.street_width;
  style.point_radius = config_.style.point_radius;
  style.validate();

  const auto points_layer = read_layer(paths_.aggregate_layer(config_.case_name, task_id, "points"));
  const auto streets_layer = read_layer(paths_.aggregate_layer(config_.case_name, task_id, "streets"));
  const auto points = geojson::points_from(points_layer);
  const auto segments = geojson::segments_from(streets_layer);
  const auto point_rows = aggregate::rows_from_layer(points_layer, "point_id", task_id);
  const auto segment_rows = aggregate::rows_from_layer(streets_layer, "segment_id", task_id);
  const std::string title = fmt::format("{} {} ({})", config_.case_name, task_id, mapping::to_string(style.statistic));
  const auto maps = mapping::render_maps(segments, points, point_rows, segment_rows, style, task_id,
                                         config_.crs(), title);
  fs::create_directories(paths_.root / "maps");
  write_atomic(paths_.map(config_.case_name, task_id, "points"), maps.points_svg);
  write_atomic(paths_.map(config_.case_name, task_id, "streets"), maps.streets_svg);
  manifest.mark(marker, {{"statistic", mapping::to_string(style.statistic)}});
  manifest.save();
  return {false, 0,
          fmt::format("{}: wrote {} and {}", marker,
                      paths_.map(config_.case_name, task_id, "points").string(),
                      paths_.map(config_.case_name, task_id, "streets").string())};
}

StageResult Pipeline::validate(const std::string& task_id, const fs::path& annotations,
                               std::size_t per_class, std::uint64_t seed) {
  const auto& spec = task(task_id);
  auto manifest = open_manifest(false);
  const std::string stage = "validate:" + task_id;
  require(manifest, stage, "score:" + task_id);
  if (per_class == 0) config_error("--per-class must be at least 1");

  if (!fs::exists(annotations)) {
    const auto log = scoring::read_results_log(paths_.results_log(task_id));
    const auto drawn = validate::stratified_sample(log, spec, per_class, seed);
    if (annotations.has_parent_path()) fs::create_directories(annotations.parent_path());
    write_atomic(annotations, validate::format_annotation_template(drawn.sample));
    std::string msg = fmt::format("{}: wrote {} records to annotate to {}", stage, drawn.sample.size(),
                                  annotations.string());
    for (const auto& [label, missing] : drawn.shortfalls) {
      msg += fmt::format("; class {} short by {}", label, missing);
    }
    return {false, 0, msg};
  }

  const auto rows = validate::parse_annotations(read_file(annotations));
  for (const auto& row : rows) {
    if (row.task_id != task_id) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("validate: annotation for task '{}' in a '{}' file", row.task_id, task_id));
    }
  }
  const auto report = validate::compute_report(rows, spec);
  const auto rendered = validate::render_report(report);
  fs::create_directories(paths_.root / "reports");
  write_atomic(paths_.report(config_.case_name, task_id, "txt"), rendered.table);
  write_atomic(paths_.report(config_.case_name, task_id, "csv"), rendered.csv);
  manifest.mark(stage, {{"sample_size", report.sample_size}});
  manifest.save();
  return {false, 0, rendered.table};
}

std::vector<fs::path> export_tasks(const scoring::TaskRegistry& registry, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  for (const auto& id : registry.ids()) {
    const auto path = dir / (id + ".json");
    write_atomic(path, scoring::task_to_json(registry.get(id)).dump(2) + "\n");
    written.push_back(path);
  }
  return written;
}

}  // namespace streetscape::pipeline
