#include "streetscape/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "streetscape/error.hpp"

namespace streetscape::scoring {

AnswerDomain AnswerDomain::finite(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::kConfig, "answer domain: no values");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  AnswerDomain d;
  d.values_ = std::move(values);
  return d;
}

AnswerDomain AnswerDomain::multiples(double step, std::optional<double> max) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw Error(ErrorKind::kConfig, fmt::format("answer domain: step must be > 0, got {}", step));
  }
  AnswerDomain d;
  d.step_ = step;
  d.max_ = max;
  return d;
}

bool AnswerDomain::contains(double value) const {
  if (!std::isfinite(value)) return false;
  if (is_finite()) return std::find(values_.begin(), values_.end(), value) != values_.end();
  if (value < 0.0) return false;
  if (max_ && value > *max_) return false;
  const double q = value / step_;
  return q == std::floor(q);
}

nlohmann::ordered_json AnswerDomain::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (is_finite()) {
    j["kind"] = "set";
    j["values"] = values_;
  } else {
    j["kind"] = "multiples";
    j["step"] = step_;
    if (max_) j["max"] = *max_;
  }
  return j;
}

AnswerDomain AnswerDomain::from_json(const nlohmann::ordered_json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "set") return finite(j.at("values").get<std::vector<double>>());
  if (kind == "multiples") {
    std::optional<double> max;
    if (j.contains("max")) max = j["max"].get<double>();
    return multiples(j.at("step").get<double>(), max);
  }
  throw Error(ErrorKind::kConfig, fmt::format("answer domain: unknown kind '{}'", kind));
}

std::string assemble_prompt(const TaskSpec& task) {
  const std::pair<const char*, const std::string*> blocks[] = {
      {"role_description", &task.role_description},
      {"theory_model", &task.theory_model},
      {"task", &task.task},
      {"response_format", &task.response_format}};
  std::string out;
  for (const auto& [name, text] : blocks) {
    if (text->find_first_not_of(" \t\r\n") == std::string::npos) {
      throw Error(ErrorKind::kConfig, fmt::format("task {}: empty {} block", task.task_id, name));
    }
    if (!out.empty()) out += "\n\n";
    out += *text;
  }
  return out;
}

const std::vector<TaskSpec>& shipped_tasks() {
  static const std::vector<TaskSpec> tasks = [] {
    std::vector<TaskSpec> t;
    t.push_back(TaskSpec{
        "T1",
        "You are an AI assistant designed to analyze street-level images. Your task is to "
        "determine whether the environment shown in the image is urban or rural.",
        "Classification Guide:\n"
        "- 0: Rural area — sparse built environment, natural surroundings, few or no "
        "buildings.\n"
        "- 1: Urban area — dense built environment, visible infrastructure, buildings.",
        "Carefully observe the image and determine whether it depicts a rural or urban "
        "environment.\n"
        "Use the classification guide above to assign a score.\n"
        "Return only the classification (0 or 1). Do not explain your answer or add extra text.",
        "Answer format: 0 or 1",
        AnswerDomain::finite({0.0, 1.0})});
    t.push_back(TaskSpec{
        "T2",
        "You are an AI assistant designed to analyze street-level images.\n"
        "Your job is to detect the presence of commercial storefronts, such as shops, "
        "restaurants, or businesses.",
        "Scoring Guide:\n"
        "- 0: No visible shops or commercial storefronts.\n"
        "- 1: One visible shop or storefront.\n"
        "- 2: More than one shop or storefront is visible.",
        "Look at the image carefully and apply the scoring guide above.\n"
        "Return only the score (0, 1, or 2) based on how many shops are visible.\n"
        "Do not explain your answer or add text. Only output the number.",
        "Answer format: 0, 1, or 2",
        AnswerDomain::finite({0.0, 1.0, 2.0})});
    t.push_back(TaskSpec{
        "T3",
        "You are an AI assistant designed to analyze street-level images. Your task is to "
        "estimate the visible width of a sidewalk.",
        "Scoring Guide:\n"
        "- 0: No visible sidewalk or the sidewalk is not clearly identifiable.\n"
        "- Otherwise: Return the estimated width of the sidewalk in meters, rounded to the "
        "nearest 0.5 (e.g., 1.0, 1.5, 2.0, 2.5, 3.0).",
        "Look at the image carefully. If a sidewalk is visible, estimate its width in meters.\n"
        "If no sidewalk is visible or it's unclear, return 0.\n"
        "Do not explain your answer or add any text. Only output a single number.",
        "Answer format: 0 or a number (e.g., 1.0, 1.5, 2.0, 2.5, 3.0)",
        AnswerDomain::multiples(0.5)});
    return t;
  }();
  return tasks;
}

nlohmann::ordered_json task_to_json(const TaskSpec& task) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  j["task_id"] = task.task_id;
  j["role_description"] = task.role_description;
  j["theory_model"] = task.theory_model;
  j["task"] = task.task;
  j["response_format"] = task.response_format;
  j["answer_domain"] = task.answer_domain.to_json();
  return j;
}

TaskSpec task_from_json(const nlohmann::ordered_json& j) {
  try {
    TaskSpec t;
    t.task_id = j.at("task_id").get<std::string>();
    t.role_description = j.at("role_description").get<std::string>();
    t.theory_model = j.at("theory_model").get<std::string>();
    t.task = j.at("task").get<std::string>();
    t.response_format = j.at("response_format").get<std::string>();
    t.answer_domain = AnswerDomain::from_json(j.at("answer_domain"));
    if (t.task_id.empty()) throw Error(ErrorKind::kConfig, "task file: empty task_id");
    assemble_prompt(t);
    return t;
  } catch (const nlohmann::ordered_json::exception& e) {
    throw Error(ErrorKind::kConfig, fmt::format("task file: {}", e.what()));
  }
}

TaskRegistry::TaskRegistry() {
  for (const auto& t : shipped_tasks()) tasks_.emplace(t.task_id, t);
}

void TaskRegistry::add(TaskSpec task) {
  const std::string id = task.task_id;
  tasks_.insert_or_assign(id, std::move(task));
}

const TaskSpec& TaskRegistry::get(std::string_view task_id) const {
  const auto it = tasks_.find(task_id);
  if (it == tasks_.end()) {
    throw Error(ErrorKind::kConfig, fmt::format("unknown task '{}'", task_id));
  }
  return it->second;
}

bool TaskRegistry::contains(std::string_view task_id) const { return tasks_.find(task_id) != tasks_.end(); }

std::vector<std::string> TaskRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : tasks_) out.push_back(id);
  return out;
}

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Finds the first maximal match of [+-]?(\d+(\.\d*)?|\.\d+).
std::optional<std::string_view> first_number(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::size_t j = i;
    if (s[j] == '+' || s[j] == '-') ++j;
    std::size_t digits = j;
    while (digits < s.size() && is_digit(s[digits])) ++digits;
    std::size_t end = digits;
    if (digits > j) {
      if (end < s.size() && s[end] == '.') {
        ++end;
        while (end < s.size() && is_digit(s[end])) ++end;
      }
      return s.substr(i, end - i);
    }
    if (j < s.size() && s[j] == '.' && j + 1 < s.size() && is_digit(s[j + 1])) {
      end = j + 1;
      while (end < s.size() && is_digit(s[end])) ++end;
      return s.substr(i, end - i);
    }
  }
  return std::nullopt;
}

}  // namespace

ParsedAnswer parse_answer(std::string_view raw, const TaskSpec& task) {
  ParsedAnswer out;
  const auto token = first_number(raw);
  if (!token) {
    out.error = "no numeric token";
    return out;
  }
  std::string_view text = *token;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  std::string normalized(text);
  if (!normalized.empty() && normalized.back() == '.') normalized.pop_back();
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(normalized.data(), normalized.data() + normalized.size(), value);
  if (ec != std::errc() || ptr != normalized.data() + normalized.size()) {
    out.error = fmt::format("unreadable number '{}'", *token);
    return out;
  }
  if (value == 0.0) value = 0.0;  // folds -0
  if (!task.answer_domain.contains(value)) {
    out.error = fmt::format("value {} outside the answer domain of {}", format_number(value),
                            task.task_id);
    return out;
  }
  out.score = value;
  return out;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  if (value == std::floor(value) && std::abs(value) < 1e15) return fmt::format("{:.0f}", value);
  return fmt::format("{}", value);
}

}  // namespace streetscape::scoring
