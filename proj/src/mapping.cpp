#include "streetscape/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "streetscape/error.hpp"
#include "streetscape/tasks.hpp"

namespace streetscape::mapping {

namespace {

constexpr double kMargin = 20.0;
constexpr double kLegendHeight = 90.0;

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::optional<double> pick(const aggregate::SummaryRow& row, Statistic stat) {
  return stat == Statistic::kMean ? row.mean : row.sum;
}

std::pair<double, double> domain_for(const std::vector<aggregate::SummaryRow>& rows,
                                     const MapStyle& style) {
  if (style.fixed_domain) return *style.fixed_domain;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (const auto v = pick(r, style.statistic)) {
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  }
  if (lo > hi) return {0.0, 1.0};
  if (lo == hi) return {lo, lo + 1.0};
  return {lo, hi};
}

// Maps metric coordinates into the drawing area above the legend.
class Viewport {
 public:
  Viewport(const std::vector<MetricXY>& all, const MapStyle& style) {
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (const auto& p : all) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    const double draw_w = style.width - 2 * kMargin;
    const double draw_h = style.height - 2 * kMargin - kLegendHeight;
    if (all.empty()) {
      min_x = max_x = min_y = max_y = 0.0;
    }
    const double span_x = std::max(max_x - min_x, 1e-9);
    const double span_y = std::max(max_y - min_y, 1e-9);
    scale_ = std::min(draw_w / span_x, draw_h / span_y);
    // Center the content in the drawing area.
    offset_x_ = kMargin + (draw_w - span_x * scale_) / 2.0 - min_x * scale_;
    offset_y_ = kMargin + (draw_h - span_y * scale_) / 2.0 + max_y * scale_;
  }

  std::string coord(MetricXY p) const {
    return fmt::format("{:.2f},{:.2f}", offset_x_ + p.x * scale_, offset_y_ - p.y * scale_);
  }
  std::pair<double, double> xy(MetricXY p) const {
    return {offset_x_ + p.x * scale_, offset_y_ - p.y * scale_};
  }

 private:
  double scale_ = 1.0, offset_x_ = 0.0, offset_y_ = 0.0;
};

std::string header(const MapStyle& style, const std::string& title) {
  std::string out = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} "
      "{1}\">\n",
      style.width, style.height);
  out += fmt::format("<title>{}</title>\n", xml_escape(title));
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
                     style.width, style.height);
  return out;
}

std::string legend(const MapStyle& style, double lo, double hi, const std::string& task_id) {
  const double top = style.height - kLegendHeight + 10.0;
  const double bar_w = std::min(300.0, style.width - 2 * kMargin - 120.0);
  std::string out = "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"0\" x2=\"1\" y2=\"0\">\n";
  const std::size_t n = style.ramp.size();
  for (std::size_t i = 0; i < n; ++i) {
    out += fmt::format("<stop offset=\"{:.4f}\" stop-color=\"{}\"/>\n",
                       static_cast<double>(i) / static_cast<double>(n - 1), style.ramp[i].hex());
  }
  out += "</linearGradient></defs>\n";
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{} {}</text>\n", kMargin, top,
                     xml_escape(task_id), to_string(style.statistic));
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"14\" fill=\"url(#ramp)\" "
      "stroke=\"#333333\" stroke-width=\"0.5\"/>\n",
      kMargin, top + 8.0, bar_w);
  out += fmt::format("<text id=\"legend-lo\" x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kMargin,
                     top + 38.0, scoring::format_number(lo));
  out += fmt::format(
      "<text id=\"legend-hi\" x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n",
      kMargin + bar_w, top + 38.0, scoring::format_number(hi));
  const double nd_x = kMargin + bar_w + 30.0;
  out += fmt::format(
      "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"14\" height=\"14\" fill=\"{}\"/>\n", nd_x,
      top + 8.0, style.nodata.hex());
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">no data</text>\n", nd_x + 20.0, top + 19.0);
  out += "</g>\n";
  return out;
}

}  // namespace

std::string Rgb::hex() const {
  const auto ch = [](double v) {
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0)));
  };
  return fmt::format("#{:02x}{:02x}{:02x}", ch(r), ch(g), ch(b));
}

Rgb Rgb::from_hex(const std::string& hex) {
  if (hex.size() != 7 || hex[0] != '#' ||
      hex.find_first_not_of("0123456789abcdefABCDEF", 1) != std::string::npos) {
    throw Error(ErrorKind::kConfig, fmt::format("color '{}' is not #rrggbb", hex));
  }
  const auto ch = [&](int i) {
    return static_cast<double>(std::stoi(hex.substr(static_cast<std::size_t>(i), 2), nullptr, 16));
  };
  return {ch(1), ch(3), ch(5)};
}

const char* to_string(Statistic stat) { return stat == Statistic::kMean ? "mean" : "sum"; }

Statistic statistic_from(const std::string& text) {
  if (text == "mean") return Statistic::kMean;
  if (text == "sum") return Statistic::kSum;
  throw Error(ErrorKind::kConfig, fmt::format("statistic must be mean or sum, got '{}'", text));
}

void MapStyle::validate() const {
  if (ramp.size() < 2) throw Error(ErrorKind::kConfig, "style: ramp needs at least 2 stops");
  if (fixed_domain && !(fixed_domain->first < fixed_domain->second)) {
    throw Error(ErrorKind::kConfig, "style: fixed domain needs lo < hi");
  }
  if (width < 200 || height < 200) throw Error(ErrorKind::kConfig, "style: canvas too small");
}

MapStyle default_style(const std::string& task_id, std::optional<Statistic> override_stat) {
  MapStyle style;
  Statistic natural = Statistic::kMean;
  std::optional<std::pair<double, double>> domain;
  if (task_id == "T1") {
    domain = std::pair{0.0, 1.0};
  } else if (task_id == "T2") {
    natural = Statistic::kSum;
  } else if (task_id == "T3") {
    domain = std::pair{0.0, 3.0};
  }
  style.statistic = override_stat.value_or(natural);
  if (style.statistic == natural) style.fixed_domain = domain;
  return style;
}

double ramp_position(double value, double lo, double hi) {
  return std::clamp((value - lo) / (hi - lo), 0.0, 1.0);
}

Rgb color_for(std::optional<double> value, const MapStyle& style, double lo, double hi) {
  if (!value) return style.nodata;
  const double t = ramp_position(*value, lo, hi);
  const std::size_t segments = style.ramp.size() - 1;
  const double scaled = t * static_cast<double>(segments);
  const std::size_t i = std::min(static_cast<std::size_t>(scaled), segments - 1);
  const double u = scaled - static_cast<double>(i);
  const Rgb& a = style.ramp[i];
  const Rgb& b = style.ramp[i + 1];
  if (u == 0.0) return a;
  if (u == 1.0) return b;
  return {a.r + u * (b.r - a.r), a.g + u * (b.g - a.g), a.b + u * (b.b - a.b)};
}

RenderedMaps render_maps(const std::vector<StreetSegment>& segments,
                         const std::vector<SamplePoint>& points,
                         const std::vector<aggregate::SummaryRow>& point_rows,
                         const std::vector<aggregate::SummaryRow>& segment_rows,
                         const MapStyle& style, const std::string& task_id, const MetricCrs& crs,
                         const std::string& title) {
  style.validate();
  std::map<std::string, const aggregate::SummaryRow*> point_index, segment_index;
  for (const auto& r : point_rows) point_index[r.entity_id] = &r;
  for (const auto& r : segment_rows) segment_index[r.entity_id] = &r;

  std::vector<const StreetSegment*> segs;
  for (const auto& s : segments) segs.push_back(&s);
  std::sort(segs.begin(), segs.end(), [](auto* a, auto* b) { return a->segment_id < b->segment_id; });
  std::vector<const SamplePoint*> pts;
  for (const auto& p : points) pts.push_back(&p);
  std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->point_id < b->point_id; });

  std::map<std::string, std::vector<MetricXY>> seg_metric;
  std::vector<MetricXY> all;
  for (const auto* s : segs) {
    auto m = to_metric(s->polyline, crs);
    all.insert(all.end(), m.begin(), m.end());
    seg_metric.emplace(s->segment_id, std::move(m));
  }
  std::map<std::string, MetricXY> pt_metric;
  for (const auto* p : pts) {
    const MetricXY m = to_metric(p->position, crs);
    all.push_back(m);
    pt_metric.emplace(p->point_id, m);
  }
  const Viewport view(all, style);

  const auto value_of = [&](const std::map<std::string, const aggregate::SummaryRow*>& index,
                            const std::string& id) -> std::optional<double> {
    const auto it = index.find(id);
    if (it == index.end()) return std::nullopt;
    return pick(*it->second, style.statistic);
  };

  RenderedMaps out;
  out.streets_domain = domain_for(segment_rows, style);
  out.points_domain = domain_for(point_rows, style);

  {
    const auto [lo, hi] = out.streets_domain;
    std::string svg = header(style, title.empty() ? task_id + " streets" : title + " streets");
    std::string grey = "<g id=\"nodata\" fill=\"none\" stroke-linecap=\"round\">\n";
    std::string colored = "<g id=\"data\" fill=\"none\" stroke-linecap=\"round\">\n";
    for (const auto* s : segs) {
      const auto v = value_of(segment_index, s->segment_id);
      std::string pts_attr;
      for (const auto& m : seg_metric.at(s->segment_id)) {
        if (!pts_attr.empty()) pts_attr.push_back(' ');
        pts_attr += view.coord(m);
      }
      const std::string el = fmt::format(
          "<polyline id=\"{}\" points=\"{}\" stroke=\"{}\" stroke-width=\"{:.2f}\"/>\n",
          xml_escape(s->segment_id), pts_attr, color_for(v, style, lo, hi).hex(),
          v ? style.street_width : style.nodata_street_width);
      (v ? colored : grey) += el;
    }
    svg += grey + "</g>\n" + colored + "</g>\n" + legend(style, lo, hi, task_id) + "</svg>\n";
    out.streets_svg = std::move(svg);
  }
  {
    const auto [lo, hi] = out.points_domain;
    std::string svg = header(style, title.empty() ? task_id + " points" : title + " points");
    std::string grey = "<g id=\"nodata\">\n";
    std::string colored = "<g id=\"data\">\n";
    for (const auto* p : pts) {
      const auto v = value_of(point_index, p->point_id);
      const auto [x, y] = view.xy(pt_metric.at(p->point_id));
      const std::string el =
          fmt::format("<circle id=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"{}\"/>\n",
                      xml_escape(p->point_id), x, y, style.point_radius,
                      color_for(v, style, lo, hi).hex());
      (v ? colored : grey) += el;
    }
    svg += grey + "</g>\n" + colored + "</g>\n" + legend(style, lo, hi, task_id) + "</svg>\n";
    out.points_svg = std::move(svg);
  }
  return out;
}

}  // namespace streetscape::mapping
