// streetscape: street-level scene assessment pipeline over one run directory.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "streetscape/error.hpp"
#include "streetscape/pipeline.hpp"

namespace fs = std::filesystem;
using namespace streetscape;

namespace {

struct Flags {
  std::string config;
  std::string run_dir;
  bool force = false;
  int verbose = 0;
  std::string task;
  std::string stat;
  std::string annotations;
  std::size_t per_class = 20;
  std::uint64_t seed = 0;
  std::size_t limit = 0;
  std::string seed_cache;
  bool gpkg = false;
  std::string out_dir = "tasks";
};

pipeline::Pipeline open(const Flags& f) {
  auto cfg = pipeline::RunConfig::load(f.config);
  if (!f.run_dir.empty()) cfg.run_dir = fs::absolute(f.run_dir);
  return pipeline::Pipeline(std::move(cfg), f.force);
}

std::optional<std::size_t> limit(const Flags& f) {
  return f.limit > 0 ? std::optional<std::size_t>(f.limit) : std::nullopt;
}

int report(const pipeline::StageResult& r) {
  if (!r.message.empty()) std::cout << r.message << (r.message.ends_with('\n') ? "" : "\n");
  if (r.skipped) std::cout << "(use --force to rerun)\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  Flags f;
  CLI::App app{"Street-level scene assessment: OSM sampling, street imagery, VLM scoring, maps"};
  app.set_version_flag("--version", STREETSCAPE_VERSION);
  app.require_subcommand(1);
  app.add_option("-c,--config", f.config, "Run configuration (JSON)");
  app.add_option("--run-dir", f.run_dir, "Run directory (overrides paths.run_dir)");
  app.add_flag("--force", f.force, "Rerun a completed stage and invalidate later stages");
  app.add_flag("-v,--verbose", f.verbose, "More logging (repeatable)");

  auto* sample = app.add_subcommand("sample", "Download the street network and place sample points");
  sample->add_option("--seed-cache", f.seed_cache, "Use this saved Overpass response instead of querying")
      ->check(CLI::ExistingFile);
  sample->add_flag("--gpkg", f.gpkg, "Also write the layers as a GeoPackage");

  auto* fetch = app.add_subcommand("fetch", "Download street-level images for every sample point");
  fetch->add_option("--limit", f.limit, "Stop after this many new downloads");

  auto* score = app.add_subcommand("score", "Score images with the vision-language backend");
  score->add_option("--task", f.task, "Task id (T1, T2, T3 or a configured task)")->required();
  score->add_option("--limit", f.limit, "Stop after this many new records");

  auto* aggregate = app.add_subcommand("aggregate", "Summarize scores per point and per segment");
  aggregate->add_option("--task", f.task, "Task id")->required();
  aggregate->add_flag("--gpkg", f.gpkg, "Also write the layers as a GeoPackage");

  auto* render = app.add_subcommand("render", "Draw the point and street maps");
  render->add_option("--task", f.task, "Task id")->required();
  render->add_option("--stat", f.stat, "mean or sum (default depends on the task)")
      ->check(CLI::IsMember({"mean", "sum"}));

  auto* validate = app.add_subcommand(
      "validate", "Write a stratified annotation sheet, or score a filled-in one");
  validate->add_option("--task", f.task, "Task id")->required();
  validate->add_option("--annotations", f.annotations, "Annotation CSV")->required();
  validate->add_option("--per-class", f.per_class, "Records drawn per predicted class");
  validate->add_option("--seed", f.seed, "Sampling seed");

  auto* export_tasks = app.add_subcommand("export-tasks", "Write the task definitions as JSON files");
  export_tasks->add_option("--out", f.out_dir, "Output directory");

  for (auto* sub : {sample, fetch, score, aggregate, render, validate}) {
    sub->callback([&f, sub] {
      if (f.config.empty()) throw CLI::RequiredError("--config");
      (void)sub;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("streetscape");
  spdlog::set_default_logger(logger);
  spdlog::set_level(f.verbose >= 2 ? spdlog::level::debug
                    : f.verbose == 1 ? spdlog::level::info
                                     : spdlog::level::warn);

  try {
    if (export_tasks->parsed()) {
      scoring::TaskRegistry registry;
      if (!f.config.empty()) registry = pipeline::RunConfig::load(f.config).registry();
      for (const auto& path : pipeline::export_tasks(registry, f.out_dir)) {
        std::cout << path.string() << "\n";
      }
      return 0;
    }
    auto p = open(f);
    if (sample->parsed()) {
      std::optional<fs::path> seed;
      if (!f.seed_cache.empty()) seed = fs::path(f.seed_cache);
      return report(p.sample(seed, f.gpkg));
    }
    if (fetch->parsed()) return report(p.fetch(limit(f)));
    if (score->parsed()) return report(p.score(f.task, limit(f)));
    if (aggregate->parsed()) return report(p.aggregate(f.task, f.gpkg));
    if (render->parsed()) {
      std::optional<mapping::Statistic> stat;
      if (!f.stat.empty()) stat = mapping::statistic_from(f.stat);
      return report(p.render(f.task, stat));
    }
    if (validate->parsed()) {
      return report(p.validate(f.task, f.annotations, f.per_class, f.seed));
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
