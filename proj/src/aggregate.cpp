#include "streetscape/aggregate.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "streetscape/error.hpp"

namespace streetscape::aggregate {

namespace {

struct Accumulator {
  double sum = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;

  void add(double v) {
    if (count == 0) {
      min = max = v;
    } else {
      min = std::min(min, v);
      max = std::max(max, v);
    }
    sum += v;
    ++count;
  }
};

template <typename Map>
std::string list_ids(const Map& ids) {
  constexpr std::size_t kShown = 10;
  std::vector<std::string> shown;
  for (const auto& id : ids) {
    if (shown.size() == kShown) {
      shown.push_back(fmt::format("... ({} total)", ids.size()));
      break;
    }
    shown.push_back(id);
  }
  return fmt::format("{}", fmt::join(shown, ", "));
}

void stats_to(geojson::Properties& props, const std::string& task_id, const SummaryRow* row) {
  const auto put = [&](const char* stat, const std::optional<double>& v) {
    props[task_id + "_" + stat] = v ? geojson::Properties(*v) : geojson::Properties(nullptr);
  };
  const std::optional<double> none;
  put("mean", row ? row->mean : none);
  put("sum", row ? row->sum : none);
  put("min", row ? row->min : none);
  put("max", row ? row->max : none);
  props[task_id + "_count"] = row ? row->count_valid : 0;
}

}  // namespace

std::vector<SummaryRow> aggregate_points(const std::vector<scoring::ScoreRecord>& log,
                                         const std::string& task_id,
                                         const std::vector<SamplePoint>& points) {
  std::map<std::string, Accumulator> acc;
  for (const auto& p : points) acc.emplace(p.point_id, Accumulator{});
  std::set<std::string> unknown;
  for (const auto& r : log) {
    if (r.task_id != task_id) continue;
    const auto it = acc.find(r.point_id);
    if (it == acc.end()) {
      unknown.insert(r.point_id);
      continue;
    }
    if (r.status == scoring::ScoreStatus::kScored && r.score) it->second.add(*r.score);
  }
  if (!unknown.empty()) {
    throw Error(ErrorKind::kValidation,
                fmt::format("results log references unknown point id(s): {}", list_ids(unknown)));
  }
  std::vector<SummaryRow> rows;
  rows.reserve(acc.size());
  for (const auto& [id, a] : acc) {
    SummaryRow row{id, task_id, {}, {}, {}, {}, a.count};
    if (a.count > 0) {
      row.sum = a.sum;
      row.mean = a.sum / static_cast<double>(a.count);
      row.min = a.min;
      row.max = a.max;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SummaryRow> aggregate_segments(const std::vector<SummaryRow>& point_rows,
                                           const std::vector<SamplePoint>& points,
                                           const std::vector<StreetSegment>& segments,
                                           const std::string& task_id) {
  std::map<std::string, std::string> segment_of;
  for (const auto& p : points) segment_of.emplace(p.point_id, p.segment_id);

  struct SegmentAcc {
    Accumulator means;
    double sums = 0.0;
  };
  std::map<std::string, SegmentAcc> acc;
  for (const auto& s : segments) acc.emplace(s.segment_id, SegmentAcc{});

  std::set<std::string> orphans;
  for (const auto& row : point_rows) {
    const auto seg = segment_of.find(row.entity_id);
    if (seg == segment_of.end() || !acc.contains(seg->second)) {
      orphans.insert(row.entity_id);
      continue;
    }
    if (!row.has_data()) continue;
    auto& a = acc[seg->second];
    a.means.add(*row.mean);
    a.sums += *row.sum;
  }
  if (!orphans.empty()) {
    throw Error(ErrorKind::kValidation,
                fmt::format("point row(s) without a segment: {}", list_ids(orphans)));
  }

  std::vector<SummaryRow> rows;
  rows.reserve(acc.size());
  for (const auto& [id, a] : acc) {
    SummaryRow row{id, task_id, {}, {}, {}, {}, a.means.count};
    if (a.means.count > 0) {
      row.mean = a.means.sum / static_cast<double>(a.means.count);
      row.sum = a.sums;
      row.min = a.means.min;
      row.max = a.means.max;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

GeoOutputs write_geo_outputs(const std::vector<StreetSegment>& segments,
                             const std::vector<SamplePoint>& points,
                             const std::vector<SummaryRow>& point_rows,
                             const std::vector<SummaryRow>& segment_rows,
                             const std::string& task_id) {
  const auto index = [&](const std::vector<SummaryRow>& rows, const char* what) {
    std::map<std::string, const SummaryRow*> by_id;
    for (const auto& r : rows) {
      if (!by_id.emplace(r.entity_id, &r).second) {
        throw Error(ErrorKind::kValidation, fmt::format("duplicate {} row '{}'", what, r.entity_id));
      }
    }
    return by_id;
  };
  auto point_index = index(point_rows, "point");
  auto segment_index = index(segment_rows, "segment");

  std::vector<const SamplePoint*> sorted_points;
  for (const auto& p : points) sorted_points.push_back(&p);
  std::sort(sorted_points.begin(), sorted_points.end(),
            [](auto* a, auto* b) { return a->point_id < b->point_id; });
  std::vector<const StreetSegment*> sorted_segments;
  for (const auto& s : segments) sorted_segments.push_back(&s);
  std::sort(sorted_segments.begin(), sorted_segments.end(),
            [](auto* a, auto* b) { return a->segment_id < b->segment_id; });

  GeoOutputs out;
  std::set<std::string> missing;
  for (const SamplePoint* p : sorted_points) {
    const auto it = point_index.find(p->point_id);
    if (it == point_index.end()) {
      missing.insert(p->point_id);
      continue;
    }
    geojson::Feature f;
    f.geometry = p->position;
    f.properties["point_id"] = p->point_id;
    f.properties["segment_id"] = p->segment_id;
    f.properties["chainage_m"] = p->chainage_m;
    stats_to(f.properties, task_id, it->second);
    point_index.erase(it);
    out.point_features.push_back(std::move(f));
  }
  for (const StreetSegment* s : sorted_segments) {
    const auto it = segment_index.find(s->segment_id);
    if (it == segment_index.end()) {
      missing.insert(s->segment_id);
      continue;
    }
    geojson::Feature f;
    f.geometry = s->polyline;
    f.properties["segment_id"] = s->segment_id;
    f.properties["source_way_id"] = s->source_way_id;
    f.properties["highway_class"] = s->highway_class;
    f.properties["length_m"] = s->length_m;
    stats_to(f.properties, task_id, it->second);
    segment_index.erase(it);
    out.street_features.push_back(std::move(f));
  }
  for (const auto& [id, _] : point_index) missing.insert(id);
  for (const auto& [id, _] : segment_index) missing.insert(id);
  if (!missing.empty()) {
    throw Error(ErrorKind::kValidation,
                fmt::format("aggregate ids do not match the geometry layers: {}", list_ids(missing)));
  }

  out.metadata["task_id"] = task_id;
  out.metadata["point_statistics"] = "over scored images of the point";
  out.metadata["segment_mean"] = "equal-weight mean of member point means";
  out.metadata["segment_sum"] = "sum of member point sums";
  out.metadata["segment_min_max"] = "over member point means";
  out.points_geojson = geojson::write_collection("points_" + task_id, out.point_features, out.metadata);
  out.streets_geojson = geojson::write_collection("streets_" + task_id, out.street_features, out.metadata);
  return out;
}

std::vector<SummaryRow> rows_from_layer(const geojson::Collection& layer, const std::string& id_key,
                                        const std::string& task_id) {
  std::vector<SummaryRow> rows;
  try {
    for (const auto& f : layer.features) {
      SummaryRow row;
      row.entity_id = f.properties.at(id_key).get<std::string>();
      row.task_id = task_id;
      const auto get = [&](const char* stat) -> std::optional<double> {
        const auto& v = f.properties.at(task_id + "_" + stat);
        if (v.is_null()) return std::nullopt;
        return v.get<double>();
      };
      row.mean = get("mean");
      row.sum = get("sum");
      row.min = get("min");
      row.max = get("max");
      row.count_valid = f.properties.at(task_id + "_count").get<std::size_t>();
      rows.push_back(std::move(row));
    }
  } catch (const std::exception& e) {
    throw ParseError(fmt::format("layer lacks {} statistics: {}", task_id, e.what()), 0);
  }
  return rows;
}

}  // namespace streetscape::aggregate
