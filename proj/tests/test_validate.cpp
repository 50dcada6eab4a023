#include <doctest.h>

#include <algorithm>
#include <random>

#include "streetscape/error.hpp"
#include "streetscape/validate.hpp"

using namespace streetscape;
using namespace streetscape::validate;
using scoring::ScoreRecord;
using scoring::ScoreStatus;

namespace {

const scoring::TaskSpec& task(const std::string& id) {
  static const scoring::TaskRegistry registry;
  return registry.get(id);
}

// `correct` of `total` rows predicted `predicted` carry a matching human
// label; the rest carry `wrong`.
void add_class(std::vector<AnnotationRow>& rows, const std::string& task_id, double predicted,
               std::size_t correct, std::size_t total, double wrong) {
  for (std::size_t i = 0; i < total; ++i) {
    const std::string id = task_id + "_" + std::to_string(predicted) + "_" + std::to_string(i);
    rows.push_back({id, 0.0, task_id, predicted, i < correct ? predicted : wrong});
  }
}

void add_na(std::vector<AnnotationRow>& rows, const std::string& task_id, double predicted, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back({"na_" + std::to_string(i), 90.0, task_id, predicted, std::nullopt});
  }
}

std::string cell(const PrecisionReport& r, const std::string& label) {
  const auto* c = r.find(label);
  return c ? format_cell(c->correct, c->total_evaluated) : format_cell(0, 0);
}

std::string overall(const PrecisionReport& r) { return format_cell(r.correct, r.evaluated); }

}  // namespace

TEST_CASE("T1 Nice confusion fixture") {
  std::vector<AnnotationRow> rows;
  add_class(rows, "T1", 0, 23, 24, 1);
  add_class(rows, "T1", 1, 21, 25, 0);
  add_na(rows, "T1", 1, 1);
  const auto r = compute_report(rows, task("T1"));
  CHECK(cell(r, "0") == "95.83% (23/24)");
  CHECK(cell(r, "1") == "84.00% (21/25)");
  CHECK(r.sample_size == 50);
  CHECK(r.na_count == 1);
  // NA rows stay out of the overall fraction: 44 of 49, not 45 of 50.
  CHECK(overall(r) == "89.80% (44/49)");
  const auto rendered = render_report(r);
  CHECK(rendered.table.find("| 95.83% (23/24) ") != std::string::npos);
  CHECK(rendered.table.find("Precision 0 ") != std::string::npos);
  CHECK(rendered.table.find("NA Cases") != std::string::npos);
}

TEST_CASE("reference confusion counts give their cells") {
  SUBCASE("T1 Vienna") {
    std::vector<AnnotationRow> rows;
    add_class(rows, "T1", 0, 21, 23, 1);
    add_class(rows, "T1", 1, 22, 24, 0);
    add_na(rows, "T1", 0, 3);
    const auto r = compute_report(rows, task("T1"));
    CHECK(cell(r, "0") == "91.30% (21/23)");
    CHECK(cell(r, "1") == "91.67% (22/24)");
    CHECK(overall(r) == "91.49% (43/47)");
    CHECK(r.na_count == 3);
  }
  SUBCASE("T2 Nice") {
    std::vector<AnnotationRow> rows;
    add_class(rows, "T2", 0, 18, 20, 1);
    add_class(rows, "T2", 1, 14, 20, 0);
    add_class(rows, "T2", 2, 12, 20, 0);
    const auto r = compute_report(rows, task("T2"));
    CHECK(cell(r, "0") == "90.00% (18/20)");
    CHECK(cell(r, "1") == "70.00% (14/20)");
    CHECK(cell(r, "2+") == "60.00% (12/20)");
    CHECK(overall(r) == "73.33% (44/60)");
  }
  SUBCASE("T2 Vienna") {
    std::vector<AnnotationRow> rows;
    add_class(rows, "T2", 0, 20, 20, 1);
    add_class(rows, "T2", 1, 9, 20, 2);
    add_class(rows, "T2", 2, 4, 20, 0);
    const auto r = compute_report(rows, task("T2"));
    CHECK(cell(r, "0") == "100.00% (20/20)");
    CHECK(cell(r, "1") == "45.00% (9/20)");
    CHECK(cell(r, "2+") == "20.00% (4/20)");
    CHECK(overall(r) == "55.00% (33/60)");
    CHECK(r.na_count == 0);
  }
  SUBCASE("T3 Nice and Vienna") {
    std::vector<AnnotationRow> nice, vienna;
    add_class(nice, "T3", 0, 10, 14, 0.5);
    add_class(nice, "T3", 0.5, 3, 12, 1);
    add_class(nice, "T3", 1, 7, 13, 1.5);
    add_class(nice, "T3", 1.5, 8, 15, 2);
    add_na(nice, "T3", 1, 6);
    add_class(vienna, "T3", 0, 8, 15, 0.5);
    add_class(vienna, "T3", 0.5, 8, 13, 0);
    add_class(vienna, "T3", 1, 9, 14, 0.5);
    add_class(vienna, "T3", 1.5, 7, 15, 1);
    add_na(vienna, "T3", 0, 3);
    const auto n = compute_report(nice, task("T3"));
    const auto v = compute_report(vienna, task("T3"));
    CHECK(cell(n, "0") == "71.43% (10/14)");
    CHECK(cell(n, "0.5") == "25.00% (3/12)");
    CHECK(cell(n, "1") == "53.85% (7/13)");
    CHECK(cell(n, "1.5") == "53.33% (8/15)");
    CHECK(cell(n, "2+") == "\xE2\x80\x94");
    CHECK(overall(n) == "51.85% (28/54)");
    CHECK(cell(v, "0.5") == "61.54% (8/13)");
    CHECK(overall(v) == "56.14% (32/57)");
    CHECK(n.columns == std::vector<std::string>{"0", "0.5", "1", "1.5", "2+"});
  }
}

TEST_CASE("empty classes render as a dash") {
  CHECK(format_cell(0, 0) == "\xE2\x80\x94");
  std::vector<AnnotationRow> rows;
  add_class(rows, "T2", 0, 3, 4, 1);
  const auto rendered = render_report(compute_report(rows, task("T2")));
  CHECK(rendered.table.find("\xE2\x80\x94") != std::string::npos);
  CHECK(rendered.csv.find("precision,1,,,") != std::string::npos);
}

TEST_CASE("report CSV round trips") {
  std::vector<AnnotationRow> rows;
  add_class(rows, "T3", 0.5, 2, 7, 1);
  add_class(rows, "T3", 4, 1, 3, 0);
  add_na(rows, "T3", 1, 2);
  const auto r = compute_report(rows, task("T3"));
  CHECK(parse_report_csv(render_report(r).csv) == r);
  CHECK_THROWS_AS(parse_report_csv("section,label,correct,total,percent\nbogus,x,,,\n"), ParseError);
}

TEST_CASE("degenerate inputs") {
  std::vector<AnnotationRow> all_na;
  add_na(all_na, "T1", 0, 7);
  const auto r = compute_report(all_na, task("T1"));
  CHECK(r.classes.empty());
  CHECK_FALSE(r.accuracy());
  CHECK(r.na_count == r.sample_size);

  std::vector<AnnotationRow> perfect;
  add_class(perfect, "T3", 0, 4, 4, 0);
  add_class(perfect, "T3", 1.5, 6, 6, 0);
  const auto p = compute_report(perfect, task("T3"));
  for (const auto& c : p.classes) CHECK(c.precision() == 1.0);
  CHECK(p.accuracy() == 1.0);

  std::vector<AnnotationRow> bad{{"x", 0, "T1", 2, 1}};
  CHECK_THROWS_AS(compute_report(bad, task("T1")), Error);
  bad = {{"x", 0, "T1", 1, 0.5}};
  CHECK_THROWS_AS(compute_report(bad, task("T1")), Error);
  bad = {{"x", 0, "T2", 1, 1}};
  CHECK_THROWS_AS(compute_report(bad, task("T1")), Error);
}

TEST_CASE("report invariants hold under permutation and NA insertion") {
  std::mt19937_64 rng(5);
  const std::vector<double> values{0, 0.5, 1, 1.5, 2, 3};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<AnnotationRow> rows;
    const auto n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      AnnotationRow row{"p" + std::to_string(i), 0, "T3", values[rng() % values.size()], {}};
      if (rng() % 5 != 0) row.human = values[rng() % values.size()];
      rows.push_back(row);
    }
    const auto r = compute_report(rows, task("T3"));
    std::size_t correct = 0, evaluated = 0;
    for (const auto& c : r.classes) {
      correct += c.correct;
      evaluated += c.total_evaluated;
    }
    CHECK(correct == r.correct);
    CHECK(evaluated == r.evaluated);
    CHECK(r.sample_size == r.evaluated + r.na_count);

    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(compute_report(shuffled, task("T3")) == r);

    shuffled.push_back({"extra", 0, "T3", 1, std::nullopt});
    auto expected = r;
    ++expected.sample_size;
    ++expected.na_count;
    CHECK(compute_report(shuffled, task("T3")) == expected);
  }
}

TEST_CASE("strata per task") {
  CHECK(strata_for(task("T1")).labels == std::vector<std::string>{"0", "1"});
  CHECK(strata_for(task("T2")).labels == std::vector<std::string>{"0", "1", "2+"});
  CHECK(strata_for(task("T3")).labels == std::vector<std::string>{"0", "0.5", "1", "1.5", "2+"});
  CHECK(strata_for(task("T2")).label_for(7) == "2+");
  CHECK(strata_for(task("T3")).label_for(1.5) == "1.5");
}

namespace {

std::vector<ScoreRecord> synthetic_log(const std::string& task_id, const std::vector<double>& classes,
                                       std::size_t per_class) {
  std::vector<ScoreRecord> log;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (double v : classes) {
      log.push_back({"p" + std::to_string(log.size()), 0, task_id, ScoreStatus::kScored, v, ""});
    }
  }
  log.push_back({"u", 0, task_id, ScoreStatus::kUnavailable, std::nullopt, ""});
  log.push_back({"e", 0, task_id, ScoreStatus::kParseError, std::nullopt, "?"});
  return log;
}

}  // namespace

TEST_CASE("stratified sampling") {
  const auto log = synthetic_log("T2", {0, 1, 2}, 100);
  const auto a = stratified_sample(log, task("T2"), 20, 42);
  CHECK(a.sample.size() == 60);
  CHECK(a.shortfalls.empty());
  std::map<std::string, int> per;
  for (const auto& r : a.sample) {
    CHECK(r.status == ScoreStatus::kScored);
    ++per[strata_for(task("T2")).label_for(*r.score)];
  }
  CHECK(per == std::map<std::string, int>{{"0", 20}, {"1", 20}, {"2+", 20}});
  CHECK(stratified_sample(log, task("T2"), 20, 42).sample == a.sample);
  CHECK(stratified_sample(log, task("T2"), 20, 43).sample != a.sample);

  const auto few = synthetic_log("T1", {0, 1}, 5);
  const auto s = stratified_sample(few, task("T1"), 20, 1);
  CHECK(s.sample.size() == 10);
  CHECK(s.shortfalls == std::map<std::string, std::size_t>{{"0", 15}, {"1", 15}});

  try {
    stratified_sample({}, task("T1"), 20, 1);
    FAIL("accepted an empty log");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
  }
}

TEST_CASE("annotation template and parsing") {
  const auto log = synthetic_log("T3", {0, 1.5}, 2);
  const auto sample = stratified_sample(log, task("T3"), 20, 9).sample;
  const auto tmpl = format_annotation_template(sample);
  CHECK(tmpl.starts_with("point_id,heading_deg,task_id,predicted,human\n"));
  CHECK_THROWS_AS(parse_annotations(tmpl), Error);

  const auto rows = parse_annotations(
      "point_id,heading_deg,task_id,predicted,human\n"
      "a#0,90,T3,1.5,1.5\n"
      "a#1,180,T3,0,NA\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].human == 1.5);
  CHECK(rows[1].heading_deg == 180.0);
  CHECK_FALSE(rows[1].human);
  try {
    parse_annotations("point_id,heading_deg,task_id,predicted,human\na,0,T3,x1,0\n");
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
