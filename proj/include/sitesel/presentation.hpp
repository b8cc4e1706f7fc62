#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sitesel/hierarchy.hpp"
#include "sitesel/number_format.hpp"
#include "sitesel/snapshot.hpp"

namespace sitesel {

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

enum class ClassScheme { quantile, equal_interval };

inline std::string_view to_string(ClassScheme s) {
  return s == ClassScheme::quantile ? "quantile" : "equal_interval";
}

inline std::optional<ClassScheme> parse_class_scheme(std::string_view s) {
  if (s == "quantile") return ClassScheme::quantile;
  if (s == "equal_interval" || s == "equal-interval") return ClassScheme::equal_interval;
  return std::nullopt;
}

inline constexpr int kDefaultClassCount = 5;

struct ClassBreaks {
  ClassScheme scheme = ClassScheme::quantile;
  int k = kDefaultClassCount;
  std::vector<double> breaks;  ///< k-1 upper class bounds (inclusive), ascending
  std::vector<int> classes;    ///< per input entry; -1 = no data
  std::optional<double> min, max;
};

using KeyedValue = std::pair<std::string, std::optional<double>>;

/// Assigns each value to one of k classes. A value equal to a break falls
/// in the lower class. Quantile breaks sit at the ceil(i*n/k)-th order
/// statistic; equal_interval splits [min, max] into k equal spans.
inline ClassBreaks classify(const std::vector<KeyedValue>& values, ClassScheme scheme,
                            int k = kDefaultClassCount) {
  if (k < 2 || k > 9) throw precondition("class count must be within [2, 9]");
  ClassBreaks out;
  out.scheme = scheme;
  out.k = k;
  out.classes.assign(values.size(), -1);

  std::vector<double> sorted;
  for (const auto& [id, v] : values)
    if (v) sorted.push_back(*v);
  if (sorted.empty()) return out;
  std::sort(sorted.begin(), sorted.end());
  out.min = sorted.front();
  out.max = sorted.back();

  const auto n = sorted.size();
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t i = 1; i < kk; ++i) {
    if (scheme == ClassScheme::quantile) {
      const std::size_t idx = (i * n + kk - 1) / kk - 1;
      out.breaks.push_back(sorted[idx]);
    } else {
      out.breaks.push_back(*out.min +
                           (*out.max - *out.min) * static_cast<double>(i) / static_cast<double>(k));
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].second) continue;
    const auto it = std::lower_bound(out.breaks.begin(), out.breaks.end(), *values[i].second);
    out.classes[i] = static_cast<int>(it - out.breaks.begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Choropleth
// ---------------------------------------------------------------------------

struct ChoroplethEntry {
  std::string site_id;
  std::string name;
  std::optional<Geometry> geometry;
  AggregatedValue value;
  int class_index = -1;
};

struct ChoroplethLayer {
  std::string parent_id;
  std::string factor_id;
  std::string unit;
  TimePoint t;
  ClassBreaks breaks;
  std::vector<ChoroplethEntry> entries;  ///< children of parent, by name then id
  std::vector<std::string> legend;       ///< one label per class
};

inline std::vector<std::string> legend_labels(const ClassBreaks& b, std::string_view unit) {
  std::vector<std::string> out;
  if (!b.min) return out;
  const std::string suffix = unit.empty() ? "" : " " + std::string(unit);
  for (int c = 0; c < b.k; ++c) {
    const double lo = c == 0 ? *b.min : b.breaks[static_cast<std::size_t>(c - 1)];
    const double hi = c == b.k - 1 ? *b.max : b.breaks[static_cast<std::size_t>(c)];
    out.push_back(format_number(lo) + " to " + format_number(hi) + suffix);
  }
  return out;
}

inline ChoroplethLayer build_choropleth(const Snapshot& snap, std::string_view parent_id,
                                        std::string_view factor_id, TimePoint t,
                                        ClassScheme scheme = ClassScheme::quantile,
                                        int k = kDefaultClassCount) {
  const auto p = snap.site_index(parent_id);
  const auto f = snap.factor_index(factor_id);
  const auto kids = snap.children_of(p);
  if (kids.empty())
    throw precondition("site '" + std::string(parent_id) + "' has no children to map");

  ChoroplethLayer layer;
  layer.parent_id = std::string(parent_id);
  layer.factor_id = std::string(factor_id);
  layer.unit = snap.factor_at(f).unit;
  layer.t = t;
  std::vector<KeyedValue> keyed;
  for (auto c : kids) {
    const Site& s = snap.site_at(c);
    ChoroplethEntry e{s.id, s.name, std::nullopt, aggregate_at(snap, c, f, t), -1};
    if (const Geometry* g = snap.geometry(c)) e.geometry = *g;
    keyed.emplace_back(s.id, e.value.value);
    layer.entries.push_back(std::move(e));
  }
  layer.breaks = classify(keyed, scheme, k);
  for (std::size_t i = 0; i < layer.entries.size(); ++i)
    layer.entries[i].class_index = layer.breaks.classes[i];
  layer.legend = legend_labels(layer.breaks, layer.unit);
  return layer;
}

// ---------------------------------------------------------------------------
// Time-series view
// ---------------------------------------------------------------------------

struct TimeRange {
  TimePoint from{0, 1};
  TimePoint to{9999, 12};
};

struct SeriesLine {
  std::string site_id;
  std::string name;
  std::vector<Observation> points;
  bool highlighted = false;
};

struct SeriesView {
  std::string factor_id;
  std::string unit;
  std::vector<SeriesLine> lines;
  std::optional<double> reference;
  std::optional<std::string> highlight;

  /// Points strictly below the reference line, across all lines.
  std::vector<std::pair<std::string, Observation>> points_below_reference() const {
    std::vector<std::pair<std::string, Observation>> out;
    if (!reference) return out;
    for (const auto& l : lines)
      for (const auto& p : l.points)
        if (p.value < *reference) out.emplace_back(l.site_id, p);
    return out;
  }
};

inline SeriesView build_series_view(const Snapshot& snap, const std::vector<std::string>& site_ids,
                                    std::string_view factor_id, TimeRange range = {},
                                    std::optional<double> reference = {},
                                    std::optional<std::string> highlight = {}) {
  if (range.to < range.from) throw precondition("time range is inverted");
  if (reference && !std::isfinite(*reference)) throw precondition("reference must be finite");
  const auto f = snap.factor_index(factor_id);
  if (highlight) snap.site_index(*highlight);

  SeriesView view{std::string(factor_id), snap.factor_at(f).unit, {}, reference, highlight};
  for (const auto& id : site_ids) {
    const auto s = snap.site_index(id);
    SeriesLine line{id, snap.site_at(s).name, {}, highlight && *highlight == id};
    for (const auto& o : snap.series(s, f))
      if (!(o.t < range.from) && !(range.to < o.t)) line.points.push_back(o);
    view.lines.push_back(std::move(line));
  }
  return view;
}

// ---------------------------------------------------------------------------
// Insights: pie, bars, statistics, data table
// ---------------------------------------------------------------------------

struct PieSlice {
  std::string site_id;
  double value = 0;
  double proportion = 0;
};

struct Bar {
  std::string site_id;
  std::string factor_id;
  double value = 0;
  double coverage = 1;
};

struct BarScale {
  std::string factor_id;
  std::string unit;
  double min = 0;
  double max = 0;
};

struct MissingCell {
  std::string site_id;
  std::string factor_id;
};

struct InsightCharts {
  std::string primary_factor;
  std::vector<PieSlice> pie;
  std::vector<std::string> missing;  ///< sites without a usable primary-factor value
  std::vector<Bar> bars;
  std::vector<BarScale> scales;  ///< one per factor that has at least one bar
  std::vector<MissingCell> missing_bars;
};

/// Pie over the first factor (negative values cannot be slices and are
/// listed as missing); bars for every (site, factor) pair with a value.
inline InsightCharts build_insights(const Snapshot& snap, const std::vector<std::string>& site_ids,
                                    const std::vector<std::string>& factor_ids, TimePoint t) {
  if (site_ids.empty()) throw precondition("insights need at least one site");
  if (factor_ids.empty()) throw precondition("insights need at least one factor");
  std::vector<Snapshot::Index> sites, factors;
  for (const auto& s : site_ids) sites.push_back(snap.site_index(s));
  for (const auto& f : factor_ids) factors.push_back(snap.factor_index(f));

  InsightCharts out;
  out.primary_factor = factor_ids.front();

  double total = 0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto v = aggregate_at(snap, sites[i], factors[0], t).value;
    if (!v || *v < 0) {
      out.missing.push_back(site_ids[i]);
      continue;
    }
    out.pie.push_back({site_ids[i], *v, 0});
    total += *v;
  }
  if (total > 0) {
    for (auto& s : out.pie) s.proportion = s.value / total;
  } else {
    // All-zero pie has no proportions to show.
    for (auto& s : out.pie) out.missing.push_back(s.site_id);
    out.pie.clear();
  }

  for (std::size_t j = 0; j < factors.size(); ++j) {
    std::optional<BarScale> scale;
    for (std::size_t i = 0; i < sites.size(); ++i) {
      const auto a = aggregate_at(snap, sites[i], factors[j], t);
      if (!a.value) {
        out.missing_bars.push_back({site_ids[i], factor_ids[j]});
        continue;
      }
      out.bars.push_back({site_ids[i], factor_ids[j], *a.value, a.coverage});
      if (!scale) scale = BarScale{factor_ids[j], snap.factor_at(factors[j]).unit, *a.value, *a.value};
      scale->min = std::min(scale->min, *a.value);
      scale->max = std::max(scale->max, *a.value);
    }
    if (scale) out.scales.push_back(*scale);
  }
  return out;
}

struct ChildStatistics {
  std::optional<double> mean, min, max, stddev;
  std::size_t n = 0;
};

/// Statistics over the children's values at t. stddev is the population
/// standard deviation.
inline ChildStatistics child_statistics(const Snapshot& snap, std::string_view site_id,
                                        std::string_view factor_id, TimePoint t) {
  const auto s = snap.site_index(site_id);
  const auto f = snap.factor_index(factor_id);
  std::vector<double> xs;
  for (auto c : snap.children_of(s))
    if (auto v = aggregate_at(snap, c, f, t).value) xs.push_back(*v);
  ChildStatistics out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  out.mean = mean;
  out.min = *std::min_element(xs.begin(), xs.end());
  out.max = *std::max_element(xs.begin(), xs.end());
  out.stddev = std::sqrt(ss / static_cast<double>(xs.size()));
  return out;
}

struct DataColumn {
  std::string factor_id;
  std::string name;
  std::string unit;
};

struct DataRow {
  std::string site_id;
  std::string name;
  std::vector<AggregatedValue> cells;  ///< one per column; absent = empty cell
};

struct DataTable {
  std::vector<DataColumn> columns;
  std::vector<DataRow> rows;
};

inline DataTable data_table(const Snapshot& snap, const std::vector<std::string>& site_ids,
                            const std::vector<std::string>& factor_ids, TimePoint t) {
  DataTable table;
  std::vector<Snapshot::Index> factors;
  for (const auto& id : factor_ids) {
    factors.push_back(snap.factor_index(id));
    const auto& f = snap.factor_at(factors.back());
    table.columns.push_back({f.id, f.name, f.unit});
  }
  for (const auto& id : site_ids) {
    const auto s = snap.site_index(id);
    DataRow row{id, snap.site_at(s).name, {}};
    for (auto f : factors) row.cells.push_back(aggregate_at(snap, s, f, t));
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// SVG export
// ---------------------------------------------------------------------------

struct Rgb {
  int r, g, b;
};

inline constexpr Rgb kPaletteLight{247, 251, 255};
inline constexpr Rgb kPaletteDark{8, 48, 107};
inline constexpr Rgb kNoDataFill{217, 217, 217};

/// Sequential ramp: class 0 is lightest, class k-1 darkest.
inline Rgb class_color(int class_index, int k) {
  if (class_index < 0) return kNoDataFill;
  const double f = k > 1 ? static_cast<double>(class_index) / (k - 1) : 0.0;
  auto mix = [f](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * f)); };
  return {mix(kPaletteLight.r, kPaletteDark.r), mix(kPaletteLight.g, kPaletteDark.g),
          mix(kPaletteLight.b, kPaletteDark.b)};
}

inline std::string hex_color(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string fixed2(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Static SVG 1.1 rendering of a choropleth layer. Equirectangular
/// projection centred on the layer's mean latitude, fit to the canvas;
/// legend below the map. Sites without geometry are skipped and noted
/// in <metadata>.
inline std::string render_choropleth_svg(const ChoroplethLayer& layer, int width = 800,
                                         int height = 600) {
  if (width <= 0 || height <= 0) throw precondition("SVG size must be positive");
  constexpr double margin = 10;
  constexpr double row_h = 18;
  const std::size_t legend_rows = layer.legend.size() + 1;  // + no-data entry
  const double legend_h = row_h * static_cast<double>(legend_rows) + margin;

  double min_lon = std::numeric_limits<double>::infinity(), max_lon = -min_lon;
  double min_lat = min_lon, max_lat = -min_lon;
  std::vector<std::string> warnings;
  for (const auto& e : layer.entries) {
    if (!e.geometry) {
      warnings.push_back("missing geometry for site '" + e.site_id + "'");
      continue;
    }
    for (const auto& poly : e.geometry->polygons)
      for (const auto& ring : poly.rings)
        for (const auto& p : ring) {
          min_lon = std::min(min_lon, p.lon);
          max_lon = std::max(max_lon, p.lon);
          min_lat = std::min(min_lat, p.lat);
          max_lat = std::max(max_lat, p.lat);
        }
  }

  const bool have_bounds = min_lon <= max_lon;
  const double kx = have_bounds ? std::cos((min_lat + max_lat) / 2 * 3.14159265358979323846 / 180) : 1;
  const double span_x = have_bounds ? std::max((max_lon - min_lon) * kx, 1e-9) : 1;
  const double span_y = have_bounds ? std::max(max_lat - min_lat, 1e-9) : 1;
  const double avail_w = std::max(width - 2 * margin, 1.0);
  const double avail_h = std::max(height - 2 * margin - legend_h, 1.0);
  const double scale = std::min(avail_w / span_x, avail_h / span_y);
  const double off_x = margin + (avail_w - span_x * scale) / 2;
  const double off_y = margin + (avail_h - span_y * scale) / 2;
  auto px = [&](const LonLat& p) {
    return std::pair{off_x + (p.lon - min_lon) * kx * scale, off_y + (max_lat - p.lat) * scale};
  };

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
         std::to_string(width) + " " + std::to_string(height) + "\">\n";
  svg += "<title>" + detail::xml_escape(layer.factor_id) + " " + layer.t.str() + "</title>\n";
  svg += "<metadata>";
  for (const auto& w : warnings) svg += "\nwarning: " + detail::xml_escape(w);
  svg += "\n</metadata>\n";
  svg += "<g id=\"sites\" stroke=\"#ffffff\" stroke-width=\"0.5\" fill-rule=\"evenodd\">\n";
  for (const auto& e : layer.entries) {
    if (!e.geometry) continue;
    std::string d;
    for (const auto& poly : e.geometry->polygons)
      for (const auto& ring : poly.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
          auto [x, y] = px(ring[i]);
          d += (i == 0 ? "M" : "L") + detail::fixed2(x) + " " + detail::fixed2(y) + " ";
        }
        d += "Z ";
      }
    if (!d.empty()) d.pop_back();
    const std::string value = e.value.value ? format_number(*e.value.value) : "no data";
    svg += "<path id=\"site-" + detail::xml_escape(e.site_id) + "\" class=\"c" +
           std::to_string(e.class_index) + "\" fill=\"" +
           hex_color(class_color(e.class_index, layer.breaks.k)) + "\" d=\"" + d + "\"><title>" +
           detail::xml_escape(e.name) + ": " + value + "</title></path>\n";
  }
  svg += "</g>\n";

  svg += "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double y = height - legend_h + margin / 2;
  auto legend_row = [&](const char* css, const std::string& fill, const std::string& label) {
    svg += std::string("<rect class=\"") + css + "\" x=\"" + detail::fixed2(margin) + "\" y=\"" +
           detail::fixed2(y) + "\" width=\"14\" height=\"14\" fill=\"" + fill +
           "\" stroke=\"#555555\" stroke-width=\"0.5\"/>";
    svg += "<text x=\"" + detail::fixed2(margin + 20) + "\" y=\"" + detail::fixed2(y + 11) + "\">" +
           detail::xml_escape(label) + "</text>\n";
    y += row_h;
  };
  for (std::size_t c = 0; c < layer.legend.size(); ++c)
    legend_row("legend-entry", hex_color(class_color(static_cast<int>(c), layer.breaks.k)),
               layer.legend[c]);
  legend_row("legend-nodata", hex_color(kNoDataFill), "no data");
  svg += "</g>\n</svg>\n";
  return svg;
}

}  // namespace sitesel
