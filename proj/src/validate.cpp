#include "streetscape/validate.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <fmt/format.h>

#include "streetscape/csv.hpp"
#include "streetscape/error.hpp"
#include "streetscape/imagery.hpp"

namespace streetscape::validate {

using scoring::format_number;

namespace {

constexpr const char* kDash = "\xE2\x80\x94";  // U+2014

// Unbiased draw in [0, bound) from the raw engine output, so that results do
// not depend on the standard library's distribution implementation.
std::uint64_t draw_below(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = 0;
  do {
    x = engine();
  } while (x >= limit);
  return x % bound;
}

double parse_value(const std::string& text, const csv::Record& rec, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw Error(ErrorKind::kValidation,
                fmt::format("annotations: line {}: {} '{}' is not a number", rec.line, what, text));
  }
  return v;
}

double label_order(const std::string& label) {
  if (!label.empty() && label.back() == '+') return std::stod(label.substr(0, label.size() - 1));
  return std::stod(label);
}

}  // namespace

std::string Strata::label_for(double predicted) const {
  if (overflow_at && predicted >= *overflow_at) return format_number(*overflow_at) + "+";
  return format_number(predicted);
}

Strata strata_for(const scoring::TaskSpec& task) {
  Strata s;
  const auto& domain = task.answer_domain;
  if (task.task_id == "T2" || task.task_id == "T3") s.overflow_at = 2.0;
  if (domain.is_finite()) {
    for (double v : domain.values()) {
      if (s.overflow_at && v >= *s.overflow_at) continue;
      s.labels.push_back(format_number(v));
    }
  } else if (s.overflow_at) {
    for (double v = 0.0; v < *s.overflow_at; v += domain.step()) s.labels.push_back(format_number(v));
  }
  if (s.overflow_at) s.labels.push_back(format_number(*s.overflow_at) + "+");
  return s;
}

SampleResult stratified_sample(const std::vector<scoring::ScoreRecord>& log,
                               const scoring::TaskSpec& task, std::size_t per_class_n,
                               std::uint64_t seed) {
  Strata strata = strata_for(task);
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log[i];
    if (r.task_id != task.task_id || r.status != scoring::ScoreStatus::kScored || !r.score) continue;
    by_label[strata.label_for(*r.score)].push_back(i);
  }
  if (by_label.empty()) {
    throw Error(ErrorKind::kValidation,
                fmt::format("no scored {} records to sample from", task.task_id));
  }
  std::vector<std::string> order = strata.labels;
  std::vector<std::string> extra;
  for (const auto& [label, _] : by_label) {
    if (std::find(order.begin(), order.end(), label) == order.end()) extra.push_back(label);
  }
  std::sort(extra.begin(), extra.end(),
            [](const auto& a, const auto& b) { return label_order(a) < label_order(b); });
  order.insert(order.end(), extra.begin(), extra.end());

  std::mt19937_64 engine(seed);
  SampleResult out;
  for (const auto& label : order) {
    auto candidates = by_label[label];
    if (candidates.size() < per_class_n) {
      out.shortfalls[label] = per_class_n - candidates.size();
    }
    const std::size_t take = std::min(per_class_n, candidates.size());
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(draw_below(engine, candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(take);
    std::sort(candidates.begin(), candidates.end());
    for (auto idx : candidates) out.sample.push_back(log[idx]);
  }
  return out;
}

std::string format_annotation_template(const std::vector<scoring::ScoreRecord>& sample) {
  std::string out = csv::format_row(kAnnotationHeader);
  for (const auto& r : sample) {
    out += csv::format_row({r.point_id, imagery::format_angle(r.heading_deg), r.task_id,
                            r.score ? format_number(*r.score) : "", ""});
  }
  return out;
}

std::vector<AnnotationRow> parse_annotations(std::string_view text) {
  std::vector<csv::Record> records;
  try {
    records = csv::parse_with_header(text, kAnnotationHeader, "annotations");
  } catch (const ParseError& e) {
    throw Error(ErrorKind::kValidation, e.what());
  }
  std::vector<AnnotationRow> rows;
  for (const auto& rec : records) {
    AnnotationRow row;
    row.point_id = rec.fields[0];
    row.heading_deg = parse_value(rec.fields[1], rec, "heading_deg");
    row.task_id = rec.fields[2];
    row.predicted = parse_value(rec.fields[3], rec, "predicted");
    const std::string& human = rec.fields[4];
    if (human.empty()) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("annotations: line {}: human label missing (use NA for ambiguous cases)",
                              rec.line));
    }
    if (human != "NA") row.human = parse_value(human, rec, "human");
    rows.push_back(std::move(row));
  }
  return rows;
}

const ClassPrecision* PrecisionReport::find(std::string_view label) const {
  for (const auto& c : classes) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

PrecisionReport compute_report(const std::vector<AnnotationRow>& rows, const scoring::TaskSpec& task) {
  const Strata strata = strata_for(task);
  PrecisionReport report;
  report.task_id = task.task_id;
  std::map<std::string, ClassPrecision> per_class;
  for (const auto& row : rows) {
    if (row.task_id != task.task_id) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("annotation for task {} in a {} report", row.task_id, task.task_id));
    }
    if (!task.answer_domain.contains(row.predicted)) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("prediction {} for {} is outside the {} answer domain",
                              format_number(row.predicted), row.point_id, task.task_id));
    }
    if (row.human && !task.answer_domain.contains(*row.human)) {
      throw Error(ErrorKind::kValidation,
                  fmt::format("human label {} for {} is outside the {} answer domain",
                              format_number(*row.human), row.point_id, task.task_id));
    }
    ++report.sample_size;
    if (!row.human) {
      ++report.na_count;
      continue;
    }
    const std::string label = strata.label_for(row.predicted);
    auto& c = per_class[label];
    c.label = label;
    ++c.total_evaluated;
    if (*row.human == row.predicted) ++c.correct;
  }

  report.columns = strata.labels;
  std::vector<std::string> extra;
  for (const auto& [label, _] : per_class) {
    if (std::find(report.columns.begin(), report.columns.end(), label) == report.columns.end()) {
      extra.push_back(label);
    }
  }
  std::sort(extra.begin(), extra.end(),
            [](const auto& a, const auto& b) { return label_order(a) < label_order(b); });
  report.columns.insert(report.columns.end(), extra.begin(), extra.end());
  for (const auto& label : report.columns) {
    const auto it = per_class.find(label);
    if (it == per_class.end()) continue;
    report.classes.push_back(it->second);
    report.correct += it->second.correct;
    report.evaluated += it->second.total_evaluated;
  }
  return report;
}

std::string format_cell(std::size_t correct, std::size_t total) {
  if (total == 0) return kDash;
  return fmt::format("{:.2f}% ({}/{})",
                     100.0 * static_cast<double>(correct) / static_cast<double>(total), correct,
                     total);
}

RenderedReport render_report(const PrecisionReport& report) {
  std::vector<std::string> head{"Task"};
  std::vector<std::string> cells{report.task_id};
  for (const auto& label : report.columns) {
    head.push_back("Precision " + label);
    const auto* c = report.find(label);
    cells.push_back(c ? format_cell(c->correct, c->total_evaluated) : kDash);
  }
  head.push_back("Overall Accuracy");
  cells.push_back(format_cell(report.correct, report.evaluated));
  head.push_back("NA Cases");
  cells.push_back(std::to_string(report.na_count));
  head.push_back("Sample Size");
  cells.push_back(std::to_string(report.sample_size));

  // Pad by code points so the em dash lines up.
  const auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  std::string table;
  const auto line = [&](const std::vector<std::string>& row) {
    table += "|";
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::size_t w = std::max(width(head[i]), width(cells[i]));
      table += " " + row[i] + std::string(w - width(row[i]), ' ') + " |";
    }
    table += "\n";
  };
  line(head);
  table += "|";
  for (std::size_t i = 0; i < head.size(); ++i) {
    table += std::string(std::max(width(head[i]), width(cells[i])) + 2, '-') + "|";
  }
  table += "\n";
  line(cells);

  RenderedReport out;
  out.table = std::move(table);
  out.csv = csv::format_row({"section", "label", "correct", "total", "percent"});
  out.csv += csv::format_row({"task", report.task_id, "", "", ""});
  const auto pct = [](std::size_t c, std::size_t t) {
    return fmt::format("{:.2f}", 100.0 * static_cast<double>(c) / static_cast<double>(t));
  };
  for (const auto& label : report.columns) {
    const auto* c = report.find(label);
    if (c) {
      out.csv += csv::format_row({"precision", label, std::to_string(c->correct),
                                  std::to_string(c->total_evaluated), pct(c->correct, c->total_evaluated)});
    } else {
      out.csv += csv::format_row({"precision", label, "", "", ""});
    }
  }
  out.csv += csv::format_row({"overall", "accuracy", std::to_string(report.correct),
                              std::to_string(report.evaluated),
                              report.evaluated ? pct(report.correct, report.evaluated) : ""});
  out.csv += csv::format_row({"na", "cases", std::to_string(report.na_count), "", ""});
  out.csv += csv::format_row({"sample", "size", std::to_string(report.sample_size), "", ""});
  return out;
}

PrecisionReport parse_report_csv(std::string_view text) {
  const auto records = csv::parse_with_header(text, {"section", "label", "correct", "total", "percent"},
                                              "validation report");
  PrecisionReport report;
  const auto count = [](const std::string& s) -> std::size_t { return s.empty() ? 0 : std::stoull(s); };
  for (const auto& rec : records) {
    const auto& f = rec.fields;
    if (f[0] == "task") {
      report.task_id = f[1];
    } else if (f[0] == "precision") {
      report.columns.push_back(f[1]);
      if (!f[3].empty()) report.classes.push_back({f[1], count(f[2]), count(f[3])});
    } else if (f[0] == "overall") {
      report.correct = count(f[2]);
      report.evaluated = count(f[3]);
    } else if (f[0] == "na") {
      report.na_count = count(f[2]);
    } else if (f[0] == "sample") {
      report.sample_size = count(f[2]);
    } else {
      throw ParseError(fmt::format("validation report: line {}: unknown section '{}'", rec.line, f[0]), 0);
    }
  }
  return report;
}

}  // namespace streetscape::validate
