#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sitesel/error.hpp"
#include "sitesel/time_point.hpp"

namespace sitesel {

// ---------------------------------------------------------------------------
// Hierarchy and factor metadata
// ---------------------------------------------------------------------------

struct AdminLevel {
  int ordinal = 0;  ///< 0 = root (nation)
  std::string name;

  bool operator==(const AdminLevel&) const = default;
};

struct LonLat {
  double lon = 0;
  double lat = 0;
  bool operator==(const LonLat&) const = default;
};

using Ring = std::vector<LonLat>;

/// Outer ring first, holes after. Rings are closed (first == last).
struct Polygon {
  std::vector<Ring> rings;
  bool operator==(const Polygon&) const = default;
};

struct Geometry {
  std::vector<Polygon> polygons;
  bool multi = false;  ///< serialized as MultiPolygon
  bool operator==(const Geometry&) const = default;
};

struct Site {
  std::string id;
  std::string name;
  int level = 0;
  std::optional<std::string> parent_id;
  std::optional<std::string> geometry_ref;
  std::string short_name;  ///< optional alias used by id resolution (e.g. "NRW")

  bool operator==(const Site&) const = default;
};

enum class FactorCategory {
  transportation,
  labor,
  raw_materials,
  markets,
  industrial_site,
  utilities,
  government_attitude,
  tax_structure,
  climate_ecology,
  other,
};

enum class FactorKind { hard, soft };
enum class Aggregation { sum, mean, weighted_mean, none };
enum class Direction { higher_is_better, lower_is_better, neutral };

struct FactorDefinition {
  std::string id;
  std::string name;
  FactorCategory category = FactorCategory::other;
  std::string unit;
  FactorKind kind = FactorKind::hard;
  Aggregation aggregation = Aggregation::none;
  std::string weight_factor;  ///< only for weighted_mean
  Direction direction = Direction::neutral;

  bool operator==(const FactorDefinition&) const = default;
};

struct FactorValue {
  std::string site_id;
  std::string factor_id;
  TimePoint t;
  double value = 0;

  bool operator==(const FactorValue&) const = default;
};

// ---------------------------------------------------------------------------
// Enum text forms
// ---------------------------------------------------------------------------

namespace detail {

inline std::string normalize_token(std::string_view s) {
  std::string out;
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u))
      out.push_back(static_cast<char>(std::tolower(u)));
    else if (!out.empty() && out.back() != '_')
      out.push_back('_');
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

}  // namespace detail

inline std::string_view to_string(FactorCategory c) {
  switch (c) {
    case FactorCategory::transportation: return "transportation";
    case FactorCategory::labor: return "labor";
    case FactorCategory::raw_materials: return "raw_materials";
    case FactorCategory::markets: return "markets";
    case FactorCategory::industrial_site: return "industrial_site";
    case FactorCategory::utilities: return "utilities";
    case FactorCategory::government_attitude: return "government_attitude";
    case FactorCategory::tax_structure: return "tax_structure";
    case FactorCategory::climate_ecology: return "climate_ecology";
    case FactorCategory::other: return "other";
  }
  return "other";
}

/// Accepts snake_case ids and display names ("Climate & Ecology").
inline std::optional<FactorCategory> parse_category(std::string_view s) {
  const std::string n = detail::normalize_token(s);
  for (int i = 0; i <= static_cast<int>(FactorCategory::other); ++i) {
    auto c = static_cast<FactorCategory>(i);
    if (n == to_string(c)) return c;
  }
  return std::nullopt;
}

inline std::string_view to_string(FactorKind k) { return k == FactorKind::hard ? "hard" : "soft"; }

inline std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::sum: return "sum";
    case Aggregation::mean: return "mean";
    case Aggregation::weighted_mean: return "weighted_mean";
    case Aggregation::none: return "none";
  }
  return "none";
}

inline std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::higher_is_better: return "higher_is_better";
    case Direction::lower_is_better: return "lower_is_better";
    case Direction::neutral: return "neutral";
  }
  return "neutral";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  const std::string n = detail::normalize_token(s);
  if (n == "higher_is_better" || n == "higher") return Direction::higher_is_better;
  if (n == "lower_is_better" || n == "lower") return Direction::lower_is_better;
  if (n == "neutral" || n.empty()) return Direction::neutral;
  return std::nullopt;
}

/// Text form of a factor's aggregation rule, e.g. "weighted_mean(households)".
inline std::string aggregation_text(const FactorDefinition& f) {
  std::string s(to_string(f.aggregation));
  if (f.aggregation == Aggregation::weighted_mean) s += "(" + f.weight_factor + ")";
  return s;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Severity { error, warning };

struct ValidationIssue {
  Severity severity = Severity::error;
  std::string rule;     ///< stable rule name, e.g. "unresolved parent"
  std::string subject;  ///< offending site/factor id
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  std::size_t error_count() const {
    return static_cast<std::size_t>(std::count_if(issues.begin(), issues.end(), [](const auto& i) {
      return i.severity == Severity::error;
    }));
  }
  bool ok() const { return error_count() == 0; }
  bool empty() const { return issues.empty(); }

  void error(std::string rule, std::string subject, std::string message) {
    issues.push_back({Severity::error, std::move(rule), std::move(subject), std::move(message)});
  }
  void warning(std::string rule, std::string subject, std::string message) {
    issues.push_back({Severity::warning, std::move(rule), std::move(subject), std::move(message)});
  }

  std::string summary() const {
    std::string out;
    for (const auto& i : issues) {
      out += i.severity == Severity::error ? "error: " : "warning: ";
      out += i.rule + " [" + i.subject + "] " + i.message + "\n";
    }
    return out;
  }
};

/// The five-level German hierarchy, used when no level list is supplied.
inline std::vector<AdminLevel> default_levels() {
  return {{0, "nation"}, {1, "state"}, {2, "county"}, {3, "district"}, {4, "municipality"}};
}

inline bool valid_lon_lat(const LonLat& p) {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180 && p.lon <= 180 &&
         p.lat >= -90 && p.lat <= 90;
}

namespace detail {

inline double cross(const LonLat& o, const LonLat& a, const LonLat& b) {
  return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

inline bool on_segment(const LonLat& p, const LonLat& q, const LonLat& r) {
  return std::min(p.lon, r.lon) <= q.lon && q.lon <= std::max(p.lon, r.lon) &&
         std::min(p.lat, r.lat) <= q.lat && q.lat <= std::max(p.lat, r.lat);
}

inline bool segments_intersect(const LonLat& p1, const LonLat& p2, const LonLat& p3,
                               const LonLat& p4) {
  const double d1 = cross(p3, p4, p1), d2 = cross(p3, p4, p2);
  const double d3 = cross(p1, p2, p3), d4 = cross(p1, p2, p4);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(p3, p1, p4)) return true;
  if (d2 == 0 && on_segment(p3, p2, p4)) return true;
  if (d3 == 0 && on_segment(p1, p3, p2)) return true;
  if (d4 == 0 && on_segment(p1, p4, p2)) return true;
  return false;
}

}  // namespace detail

/// Returns an empty string for a valid closed simple ring, else the defect.
inline std::string ring_defect(const Ring& ring) {
  if (ring.size() < 4) return "ring has fewer than 4 positions";
  if (ring.front() != ring.back()) return "ring is not closed";
  for (const auto& p : ring)
    if (!valid_lon_lat(p)) return "coordinate outside WGS84 range";
  const std::size_t n = ring.size() - 1;  // edges
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (detail::segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]))
        return "ring self-intersects";
    }
  }
  return {};
}

inline std::string geometry_defect(const Geometry& g) {
  if (g.polygons.empty()) return "geometry has no polygons";
  for (const auto& poly : g.polygons) {
    if (poly.rings.empty()) return "polygon has no rings";
    for (const auto& r : poly.rings)
      if (auto d = ring_defect(r); !d.empty()) return d;
  }
  return {};
}

/// Checks every cross-reference and structural invariant of a dataset.
/// Violations are reported, never thrown.
inline ValidationReport validate_snapshot(const std::vector<AdminLevel>& levels,
                                          const std::vector<Site>& sites,
                                          const std::vector<FactorDefinition>& factors,
                                          const std::vector<FactorValue>& values,
                                          const std::map<std::string, Geometry>& geometries = {}) {
  ValidationReport report;

  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i].ordinal != static_cast<int>(i))
      report.error("noncontiguous levels", levels[i].name,
                   "level ordinals must be contiguous from 0");
  const int max_level = static_cast<int>(levels.size()) - 1;

  std::unordered_map<std::string, const Site*> by_id;
  for (const auto& s : sites) {
    if (!by_id.emplace(s.id, &s).second)
      report.error("duplicate site id", s.id, "site id appears more than once");
  }

  for (const auto& s : sites) {
    if (s.level < 0 || s.level > max_level)
      report.error("unknown level", s.id, "level ordinal " + std::to_string(s.level));
    if (!s.parent_id) {
      if (s.level != 0) report.error("missing parent", s.id, "non-root site without parent");
      continue;
    }
    if (s.level == 0) report.error("root has parent", s.id, "level-0 site has a parent");
    auto it = by_id.find(*s.parent_id);
    if (it == by_id.end()) {
      report.error("unresolved parent", s.id, "parent '" + *s.parent_id + "' does not exist");
      continue;
    }
    if (it->second->level + 1 != s.level)
      report.error("level mismatch", s.id, "parent level must be exactly one above");
  }

  // Cycle check: walk each chain at most |sites| steps.
  for (const auto& s : sites) {
    const Site* cur = &s;
    std::size_t steps = 0;
    while (cur->parent_id && steps <= sites.size()) {
      auto it = by_id.find(*cur->parent_id);
      if (it == by_id.end()) break;
      cur = it->second;
      ++steps;
    }
    if (steps > sites.size()) report.error("cycle", s.id, "parent chain does not terminate");
  }

  std::unordered_map<std::string, const FactorDefinition*> factor_by_id;
  for (const auto& f : factors)
    if (!factor_by_id.emplace(f.id, &f).second)
      report.error("duplicate factor id", f.id, "factor id appears more than once");

  for (const auto& f : factors) {
    if (f.kind == FactorKind::soft && f.aggregation != Aggregation::none)
      report.error("soft factor aggregated", f.id, "soft factors must use aggregation none");
    if (f.aggregation == Aggregation::weighted_mean) {
      auto it = factor_by_id.find(f.weight_factor);
      if (it == factor_by_id.end())
        report.error("unresolved weight factor", f.id,
                     "weight factor '" + f.weight_factor + "' does not exist");
      else if (it->second->aggregation != Aggregation::sum)
        report.error("weight factor not summed", f.id,
                     "weight factor '" + f.weight_factor + "' must aggregate by sum");
    }
  }

  struct Key {
    std::string site, factor;
    TimePoint t;
    auto operator<=>(const Key&) const = default;
  };
  std::set<Key> seen;
  for (const auto& v : values) {
    if (!by_id.count(v.site_id))
      report.error("unresolved site", v.site_id, "observation references unknown site");
    if (!factor_by_id.count(v.factor_id))
      report.error("unresolved factor", v.factor_id, "observation references unknown factor");
    if (!std::isfinite(v.value))
      report.error("non-finite value", v.site_id, "value for '" + v.factor_id + "' is not finite");
    if (!seen.insert(Key{v.site_id, v.factor_id, v.t}).second)
      report.error("duplicate observation", v.site_id,
                   "duplicate (" + v.factor_id + ", " + v.t.str() + ")");
  }

  for (const auto& [id, g] : geometries) {
    if (!by_id.count(id))
      report.warning("unresolved geometry", id, "geometry for unknown site");
    if (auto d = geometry_defect(g); !d.empty()) report.error("invalid geometry", id, d);
  }

  return report;
}

/// Overload with the default level list (nation .. municipality).
inline ValidationReport validate_snapshot(const std::vector<Site>& sites,
                                          const std::vector<FactorDefinition>& factors,
                                          const std::vector<FactorValue>& values) {
  return validate_snapshot(default_levels(), sites, factors, values);
}

// ---------------------------------------------------------------------------
// Bundle: the raw, not yet indexed content of a dataset
// ---------------------------------------------------------------------------

struct Bundle {
  int format_version = 1;
  std::string source;
  std::vector<AdminLevel> levels = default_levels();
  TimePoint default_time{};
  std::vector<Site> sites;
  std::vector<FactorDefinition> factors;
  std::vector<FactorValue> values;
  std::map<std::string, Geometry> geometries;
  std::vector<std::string> warnings;
};

}  // namespace sitesel
