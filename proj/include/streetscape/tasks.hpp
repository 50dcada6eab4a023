#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace streetscape::scoring {

/// Set of scalar answers a task accepts: either an explicit finite set, or
/// zero together with every positive multiple of `step` (optionally capped).
class AnswerDomain {
 public:
  static AnswerDomain finite(std::vector<double> values);
  static AnswerDomain multiples(double step, std::optional<double> max = std::nullopt);

  bool contains(double value) const;
  bool is_finite() const { return step_ == 0.0; }
  const std::vector<double>& values() const { return values_; }
  double step() const { return step_; }
  std::optional<double> max() const { return max_; }

  nlohmann::ordered_json to_json() const;
  static AnswerDomain from_json(const nlohmann::ordered_json& j);

 private:
  std::vector<double> values_;
  double step_ = 0.0;
  std::optional<double> max_;
};

struct TaskSpec {
  std::string task_id;
  std::string role_description;
  std::string theory_model;
  std::string task;
  std::string response_format;
  AnswerDomain answer_domain = AnswerDomain::finite({0.0});
};

/// The four blocks joined by blank lines. Throws Error(kConfig) when a block is empty.
std::string assemble_prompt(const TaskSpec& task);

/// T1 urban/rural, T2 shopfront count, T3 sidewalk width.
const std::vector<TaskSpec>& shipped_tasks();

/// TaskSpec file format (JSON): {"task_id", "role_description", "theory_model",
/// "task", "response_format", "answer_domain": {"kind": "set", "values": [...]} |
/// {"kind": "multiples", "step": s[, "max": m]}}.
nlohmann::ordered_json task_to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::ordered_json& j);

class TaskRegistry {
 public:
  /// Starts with the shipped tasks.
  TaskRegistry();

  /// Adds or replaces a task by id.
  void add(TaskSpec task);
  /// Throws Error(kConfig) for an unknown id.
  const TaskSpec& get(std::string_view task_id) const;
  bool contains(std::string_view task_id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, TaskSpec, std::less<>> tasks_;
};

struct ParsedAnswer {
  std::optional<double> score;
  std::string error;  ///< set when score is empty
};

/// First maximal signed decimal token in `raw`, accepted iff it lies in the
/// task's answer domain.
ParsedAnswer parse_answer(std::string_view raw, const TaskSpec& task);

/// Shortest decimal text that round-trips: 1 -> "1", 1.5 -> "1.5".
std::string format_number(double value);

}  // namespace streetscape::scoring
