#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "streetscape/geo.hpp"
#include "streetscape/http.hpp"
#include "streetscape/imagery.hpp"
#include "streetscape/mapping.hpp"
#include "streetscape/osm.hpp"
#include "streetscape/sampler.hpp"
#include "streetscape/scoring.hpp"
#include "streetscape/tasks.hpp"
#include "streetscape/validate.hpp"

namespace streetscape::pipeline {

/// Declarative run configuration (JSON). Secrets never live here: the Street
/// View key and the backend token come from environment variables.
struct RunConfig {
  std::string case_name;
  BoundingBox bbox;
  sampler::SamplingConfig sampling;
  std::vector<std::string> highway_classes;  ///< empty = default filter
  imagery::CameraConfig camera;
  imagery::FetchPolicy imagery_policy;
  std::string streetview_url = imagery::kStreetViewBaseUrl;
  std::string overpass_url = "https://overpass-api.de/api/interpreter";
  http::RetryPolicy overpass_retry{3, std::chrono::milliseconds(2000), 2.0};
  bool offline = false;  ///< never query Overpass; the cache must hold the response
  scoring::BackendConfig backend;
  std::vector<std::string> tasks{"T1", "T2", "T3"};
  std::vector<std::filesystem::path> task_files;
  mapping::MapStyle style;
  bool style_has_ramp = false;
  std::filesystem::path run_dir;

  /// Parses and validates; relative paths resolve against `base_dir`.
  /// Throws Error(kConfig).
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  nlohmann::json canonical_json() const;
  /// sha256 of the canonical JSON.
  std::string hash() const;
  osm::HighwayFilter highway_filter() const;
  /// Shipped tasks plus every task file; throws when an enabled task is unknown.
  scoring::TaskRegistry registry() const;
  MetricCrs crs() const { return select_metric_crs(bbox); }
};

/// Stage completion markers and provenance of one run directory.
class RunManifest {
 public:
  static RunManifest load_or_create(const std::filesystem::path& path, const std::string& config_hash);

  bool complete(const std::string& stage) const;
  void mark(const std::string& stage, const nlohmann::json& details = nlohmann::json::object());
  /// Drops the markers of `stage` and of every stage whose key starts with one of `prefixes`.
  void invalidate(const std::vector<std::string>& prefixes);
  const std::string& config_hash() const { return config_hash_; }
  void set_config_hash(const std::string& hash) { config_hash_ = hash; }
  void save() const;
  const nlohmann::json& stages() const { return stages_; }

 private:
  std::filesystem::path path_;
  std::string config_hash_;
  std::string created_at_;
  nlohmann::json stages_ = nlohmann::json::object();
};

/// Directory layout of a run.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "run_manifest.json"; }
  std::filesystem::path overpass_cache() const { return root / "cache" / "overpass"; }
  std::filesystem::path streets_layer() const { return root / "layers" / "streets.geojson"; }
  std::filesystem::path points_layer() const { return root / "layers" / "points.geojson"; }
  std::filesystem::path counts() const { return root / "layers" / "counts.json"; }
  std::filesystem::path network_gpkg(const std::string& case_name) const;
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path image_manifest() const { return root / "image_manifest.csv"; }
  std::filesystem::path results_log(const std::string& task) const;
  std::filesystem::path aggregate_layer(const std::string& case_name, const std::string& task,
                                        const std::string& level) const;
  std::filesystem::path aggregate_gpkg(const std::string& case_name, const std::string& task) const;
  std::filesystem::path map(const std::string& case_name, const std::string& task,
                            const std::string& level) const;
  std::filesystem::path report(const std::string& case_name, const std::string& task,
                               const std::string& ext) const;
};

/// Coverage counters as written to layers/counts.json.
nlohmann::ordered_json counts_to_json(const sampler::CountsReport& report);

struct StageResult {
  bool skipped = false;  ///< stage marker present and --force not given
  int exit_code = 0;
  std::string message;
};

struct Services {
  std::shared_ptr<http::Transport> transport;  ///< defaults to the httplib transport
  std::string streetview_key;                  ///< defaults to $STREETSCAPE_STREETVIEW_KEY
  std::string backend_token;                   ///< defaults to $STREETSCAPE_BACKEND_TOKEN
};

/// Runs pipeline stages over one run directory. Stage order is
/// sample -> fetch -> score -> aggregate -> render (validate needs score).
/// A stage whose prerequisite is missing fails with Error(kPipeline) before
/// touching the run directory.
class Pipeline {
 public:
  Pipeline(RunConfig config, bool force, Services services = {});

  StageResult sample(const std::optional<std::filesystem::path>& seed_cache = {}, bool gpkg = false);
  StageResult fetch(std::optional<std::size_t> stop_after = {});
  StageResult score(const std::string& task_id, std::optional<std::size_t> stop_after = {});
  StageResult aggregate(const std::string& task_id, bool gpkg = false);
  StageResult render(const std::string& task_id, std::optional<mapping::Statistic> stat = {});
  /// Writes a stratified annotation template to `annotations` when the file is
  /// absent; otherwise reads it and writes the precision report.
  StageResult validate(const std::string& task_id, const std::filesystem::path& annotations,
                       std::size_t per_class, std::uint64_t seed);

  const RunPaths& paths() const { return paths_; }
  const RunConfig& config() const { return config_; }

 private:
  RunManifest open_manifest(bool resetting);
  void require(const RunManifest& manifest, const std::string& stage, const std::string& needed) const;
  const scoring::TaskSpec& task(const std::string& task_id) const;

  RunConfig config_;
  bool force_;
  Services services_;
  RunPaths paths_;
  scoring::TaskRegistry registry_;
};

/// Writes the shipped task specs (and any configured ones) as JSON files.
std::vector<std::filesystem::path> export_tasks(const scoring::TaskRegistry& registry,
                                                const std::filesystem::path& dir);

}  // namespace streetscape::pipeline
