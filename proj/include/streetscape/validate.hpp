#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streetscape/scoring.hpp"
#include "streetscape/tasks.hpp"

namespace streetscape::validate {

/// Class columns used to stratify and report a task. Predictions at or above
/// `overflow_at` fall in a single "2+"-style bucket.
struct Strata {
  std::vector<std::string> labels;
  std::optional<double> overflow_at;

  std::string label_for(double predicted) const;
};

/// T1: 0, 1. T2: 0, 1, 2+. T3: 0, 0.5, 1, 1.5, 2+. Custom finite domains use
/// their values; custom step domains use the labels met in the data.
Strata strata_for(const scoring::TaskSpec& task);

struct SampleResult {
  std::vector<scoring::ScoreRecord> sample;       ///< grouped by stratum, log order within
  std::map<std::string, std::size_t> shortfalls;  ///< stratum -> missing records
};

/// Draws up to `per_class_n` scored records of the task per predicted stratum.
/// Deterministic for a given seed on every platform. Throws Error(kValidation)
/// when the log has no scored record for the task.
SampleResult stratified_sample(const std::vector<scoring::ScoreRecord>& log,
                               const scoring::TaskSpec& task, std::size_t per_class_n,
                               std::uint64_t seed);

struct AnnotationRow {
  std::string point_id;
  double heading_deg = 0.0;
  std::string task_id;
  double predicted = 0.0;
  std::optional<double> human;  ///< nullopt = NA
};

inline const std::vector<std::string> kAnnotationHeader{"point_id", "heading_deg", "task_id",
                                                        "predicted", "human"};

/// Annotation template with an empty human column.
std::string format_annotation_template(const std::vector<scoring::ScoreRecord>& sample);
/// Throws Error(kValidation) for unannotated rows and unreadable values.
std::vector<AnnotationRow> parse_annotations(std::string_view text);

struct ClassPrecision {
  std::string label;
  std::size_t correct = 0;
  std::size_t total_evaluated = 0;
  double precision() const { return static_cast<double>(correct) / static_cast<double>(total_evaluated); }
  friend bool operator==(const ClassPrecision&, const ClassPrecision&) = default;
};

struct PrecisionReport {
  std::string task_id;
  std::vector<std::string> columns;     ///< every class column of the task, in order
  std::vector<ClassPrecision> classes;  ///< only classes with at least one evaluated row
  std::size_t correct = 0;
  std::size_t evaluated = 0;
  std::size_t na_count = 0;
  std::size_t sample_size = 0;

  std::optional<double> accuracy() const {
    if (evaluated == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(evaluated);
  }
  const ClassPrecision* find(std::string_view label) const;
  friend bool operator==(const PrecisionReport&, const PrecisionReport&) = default;
};

/// Class-specific precision over predicted classes and overall accuracy. A row
/// is correct iff human equals predicted; NA rows count only toward
/// sample_size. Throws Error(kValidation) for values outside the answer domain.
PrecisionReport compute_report(const std::vector<AnnotationRow>& rows, const scoring::TaskSpec& task);

/// "95.83% (23/24)", or a single U+2014 dash when nothing was evaluated.
std::string format_cell(std::size_t correct, std::size_t total);

struct RenderedReport {
  std::string table;
  std::string csv;
};

RenderedReport render_report(const PrecisionReport& report);
PrecisionReport parse_report_csv(std::string_view csv);

}  // namespace streetscape::validate
