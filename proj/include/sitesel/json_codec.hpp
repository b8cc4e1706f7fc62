#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "sitesel/ingestion.hpp"
#include "sitesel/presentation.hpp"
#include "sitesel/query.hpp"
#include "sitesel/snapshot.hpp"

// Wire encoding of engine results and request objects. Field order is
// fixed (ordered_json) so response bodies are byte-stable.

namespace sitesel::json {

using Json = nlohmann::ordered_json;

inline Json number_or_null(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json encode(const AggregatedValue& a) {
  return Json{{"value", number_or_null(a.value)}, {"coverage", a.coverage}, {"partial", a.partial()}};
}

inline Json encode(const AdminLevel& l) { return Json{{"ordinal", l.ordinal}, {"name", l.name}}; }

inline Json encode_site(const Snapshot& snap, const Site& s) {
  const auto idx = snap.site_index(s.id);
  Json j{{"id", s.id},
         {"name", s.name},
         {"level", s.level},
         {"level_name", snap.levels().at(static_cast<std::size_t>(s.level)).name},
         {"parent_id", s.parent_id ? Json(*s.parent_id) : Json(nullptr)}};
  if (!s.short_name.empty()) j["short_name"] = s.short_name;
  j["child_count"] = snap.children_of(idx).size();
  j["has_geometry"] = snap.geometry(idx) != nullptr;
  return j;
}

inline Json encode_sites(const Snapshot& snap, const std::vector<const Site*>& sites) {
  Json arr = Json::array();
  for (const Site* s : sites) arr.push_back(encode_site(snap, *s));
  return arr;
}

inline Json encode(const FactorDefinition& f) {
  Json j{{"id", f.id},
         {"name", f.name},
         {"category", to_string(f.category)},
         {"unit", f.unit},
         {"kind", to_string(f.kind)},
         {"aggregation", to_string(f.aggregation)}};
  if (f.aggregation == Aggregation::weighted_mean) j["weight_factor"] = f.weight_factor;
  j["direction"] = to_string(f.direction);
  return j;
}

inline Json encode(const Observation& o) { return Json{{"t", o.t.str()}, {"value", o.value}}; }

inline Json encode(const Geometry& g) { return geometry_to_geojson(g); }

inline Json encode(const std::vector<SiteMatch>& matches) {
  Json arr = Json::array();
  for (const auto& m : matches) {
    Json values = Json::object();
    for (const auto& v : m.values) values[v.factor_id] = encode(v.value);
    arr.push_back(Json{{"rank", m.rank}, {"site_id", m.site_id}, {"name", m.site_name},
                       {"values", std::move(values)}});
  }
  return arr;
}

inline Json encode(const std::vector<TimeInterval>& intervals) {
  Json arr = Json::array();
  for (const auto& i : intervals) arr.push_back(Json{{"from", i.first.str()}, {"to", i.last.str()}});
  return arr;
}

inline Json encode(const std::vector<FactorReading>& readings) {
  Json arr = Json::array();
  for (const auto& r : readings) {
    Json j{{"factor_id", r.factor_id}};
    j.update(encode(r.value));
    j["t"] = r.at ? Json(r.at->str()) : Json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr;
}

inline Json encode(const SiteComparison& c) {
  Json matrix = Json::array();
  for (std::size_t i = 0; i < c.site_ids.size(); ++i) {
    Json cells = Json::object();
    for (std::size_t j = 0; j < c.factor_ids.size(); ++j) cells[c.factor_ids[j]] = encode(c.cells[i][j]);
    matrix.push_back(Json{{"site_id", c.site_ids[i]}, {"values", std::move(cells)}});
  }
  Json rankings = Json::object();
  for (std::size_t j = 0; j < c.factor_ids.size(); ++j) rankings[c.factor_ids[j]] = c.rankings[j];
  return Json{{"sites", c.site_ids},
              {"factors", c.factor_ids},
              {"matrix", std::move(matrix)},
              {"rankings", std::move(rankings)},
              {"warnings", c.warnings}};
}

inline Json encode(const ChecklistCriterion& c) {
  return Json{{"factor", c.factor_id},
              {"weight", c.weight},
              {"plus", c.plus_threshold},
              {"minus", c.minus_threshold},
              {"direction", to_string(c.direction)}};
}

inline Json encode(const ChecklistTable& t) {
  Json criteria = Json::array();
  for (const auto& c : t.criteria) criteria.push_back(encode(c));
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json cells = Json::array();
    for (std::size_t j = 0; j < r.cells.size(); ++j)
      cells.push_back(Json{{"factor", t.criteria[j].factor_id},
                           {"rating", std::string(1, rating_symbol(r.cells[j].rating))},
                           {"value", number_or_null(r.cells[j].value)},
                           {"missing", r.cells[j].missing}});
    rows.push_back(Json{{"rank", r.rank}, {"site_id", r.site_id}, {"total", r.total},
                        {"ratings", std::move(cells)}});
  }
  return Json{{"criteria", std::move(criteria)}, {"rows", std::move(rows)}};
}

inline Json encode(const ChildStatistics& s) {
  return Json{{"n", s.n},
              {"mean", number_or_null(s.mean)},
              {"min", number_or_null(s.min)},
              {"max", number_or_null(s.max)},
              {"stddev", number_or_null(s.stddev)}};
}

inline Json encode(const DataTable& t) {
  Json cols = Json::array();
  for (const auto& c : t.columns) cols.push_back(Json{{"factor_id", c.factor_id}, {"name", c.name}, {"unit", c.unit}});
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json cells = Json::array();
    for (const auto& c : r.cells) cells.push_back(encode(c));
    rows.push_back(Json{{"site_id", r.site_id}, {"name", r.name}, {"cells", std::move(cells)}});
  }
  return Json{{"columns", std::move(cols)}, {"rows", std::move(rows)}};
}

inline Json encode(const InsightCharts& c) {
  Json pie = Json::array();
  for (const auto& s : c.pie)
    pie.push_back(Json{{"site_id", s.site_id}, {"value", s.value}, {"proportion", s.proportion}});
  Json bars = Json::array();
  for (const auto& b : c.bars)
    bars.push_back(Json{{"site_id", b.site_id}, {"factor_id", b.factor_id}, {"value", b.value},
                        {"coverage", b.coverage}});
  Json scales = Json::array();
  for (const auto& s : c.scales)
    scales.push_back(Json{{"factor_id", s.factor_id}, {"unit", s.unit}, {"min", s.min}, {"max", s.max}});
  Json missing_bars = Json::array();
  for (const auto& m : c.missing_bars)
    missing_bars.push_back(Json{{"site_id", m.site_id}, {"factor_id", m.factor_id}});
  return Json{{"primary_factor", c.primary_factor}, {"pie", std::move(pie)},
              {"missing", c.missing},               {"bars", std::move(bars)},
              {"scales", std::move(scales)},        {"missing_bars", std::move(missing_bars)}};
}

inline Json encode(const ChoroplethLayer& layer) {
  Json entries = Json::array();
  for (const auto& e : layer.entries) {
    Json j{{"site_id", e.site_id}, {"name", e.name}};
    j.update(encode(e.value));
    j["class"] = e.class_index;
    j["has_geometry"] = e.geometry.has_value();
    entries.push_back(std::move(j));
  }
  return Json{{"parent_id", layer.parent_id},
              {"factor_id", layer.factor_id},
              {"unit", layer.unit},
              {"t", layer.t.str()},
              {"scheme", to_string(layer.breaks.scheme)},
              {"k", layer.breaks.k},
              {"breaks", layer.breaks.breaks},
              {"legend", layer.legend},
              {"entries", std::move(entries)}};
}

inline Json encode(const SeriesView& v) {
  Json lines = Json::array();
  for (const auto& l : v.lines) {
    Json pts = Json::array();
    for (const auto& p : l.points) pts.push_back(encode(p));
    lines.push_back(Json{{"site_id", l.site_id}, {"name", l.name}, {"highlighted", l.highlighted},
                         {"points", std::move(pts)}});
  }
  return Json{{"factor_id", v.factor_id},
              {"unit", v.unit},
              {"reference", number_or_null(v.reference)},
              {"highlight", v.highlight ? Json(*v.highlight) : Json(nullptr)},
              {"lines", std::move(lines)}};
}

// ---------------------------------------------------------------------------
// Request decoding
// ---------------------------------------------------------------------------

inline Error bad_request(const std::string& message) {
  return Error(ErrorCode::bad_request, message);
}

inline TimePoint decode_time(const nlohmann::json& j) {
  if (!j.is_string()) throw bad_request("time must be a \"YYYY-MM\" string");
  auto t = parse_time_point(j.get<std::string>());
  if (!t) throw bad_request("invalid time '" + j.get<std::string>() + "'");
  return *t;
}

inline std::string decode_string(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string())
    throw bad_request(std::string("missing string field '") + field + "'");
  return j[field].get<std::string>();
}

inline std::vector<std::string> decode_string_list(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array())
    throw bad_request(std::string("missing array field '") + field + "'");
  std::vector<std::string> out;
  for (const auto& e : j[field]) {
    if (!e.is_string()) throw bad_request(std::string("'") + field + "' must hold strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline double decode_number(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number())
    throw bad_request(std::string("missing numeric field '") + field + "'");
  return j[field].get<double>();
}

/// Either the mini-grammar string or {factor, op, value} / {factor,
/// op: "between", low, high}.
inline Predicate decode_predicate(const nlohmann::json& j) {
  if (j.is_string()) return parse_predicate(j.get<std::string>());
  if (!j.is_object()) throw Error(ErrorCode::bad_predicate, "predicate must be a string or object");
  Predicate p;
  if (j.contains("factor")) {
    if (!j["factor"].is_string()) throw Error(ErrorCode::bad_predicate, "predicate factor must be a string");
    p.factor_id = j["factor"].get<std::string>();
  }
  if (!j.contains("op") || !j["op"].is_string())
    throw Error(ErrorCode::bad_predicate, "predicate needs an 'op'");
  auto op = parse_compare_op(j["op"].get<std::string>());
  if (!op) throw Error(ErrorCode::bad_predicate, "unknown predicate op");
  p.condition.op = *op;
  auto num = [&](const char* f) {
    if (!j.contains(f) || !j[f].is_number())
      throw Error(ErrorCode::bad_predicate, std::string("predicate needs numeric '") + f + "'");
    return j[f].get<double>();
  };
  if (*op == CompareOp::between) {
    p.condition.low = num("low");
    p.condition.high = num("high");
  } else {
    p.condition.low = num("value");
  }
  p.condition.validate();
  return p;
}

inline WhereQuery decode_where(const nlohmann::json& j, TimePoint default_time) {
  if (!j.is_object()) throw bad_request("request body must be a JSON object");
  WhereQuery q;
  q.level = decode_string(j, "level");
  if (j.contains("scope") && !j["scope"].is_null()) {
    if (!j["scope"].is_string()) throw bad_request("scope must be a string");
    q.scope = j["scope"].get<std::string>();
  }
  q.t = j.contains("t") ? decode_time(j["t"]) : default_time;
  if (j.contains("predicates")) {
    if (!j["predicates"].is_array()) throw bad_request("predicates must be an array");
    for (const auto& p : j["predicates"]) {
      auto pred = decode_predicate(p);
      if (pred.factor_id.empty()) throw Error(ErrorCode::bad_predicate, "predicate needs a factor");
      q.predicates.push_back(std::move(pred));
    }
  }
  if (j.contains("rank_by")) {
    if (!j["rank_by"].is_array()) throw bad_request("rank_by must be an array");
    for (const auto& r : j["rank_by"]) {
      RankKey key;
      std::string order = "desc";
      if (r.is_array() && !r.empty() && r[0].is_string()) {
        key.factor_id = r[0].get<std::string>();
        if (r.size() > 1 && r[1].is_string()) order = r[1].get<std::string>();
      } else if (r.is_object()) {
        key.factor_id = decode_string(r, "factor");
        if (r.contains("order") && r["order"].is_string()) order = r["order"].get<std::string>();
      } else {
        throw bad_request("rank_by entries are [factor, asc|desc] or {factor, order}");
      }
      if (order != "asc" && order != "desc") throw bad_request("rank order must be asc or desc");
      key.descending = order == "desc";
      q.rank_by.push_back(std::move(key));
    }
  }
  if (j.contains("limit") && !j["limit"].is_null()) {
    if (!j["limit"].is_number_unsigned()) throw bad_request("limit must be a non-negative integer");
    q.limit = j["limit"].get<std::size_t>();
  }
  return q;
}

inline ChecklistCriterion decode_criterion(const nlohmann::json& j) {
  if (!j.is_object()) throw bad_request("criterion must be an object");
  ChecklistCriterion c;
  c.factor_id = decode_string(j, "factor");
  c.weight = j.contains("weight") ? decode_number(j, "weight") : 1.0;
  c.plus_threshold = decode_number(j, "plus");
  c.minus_threshold = decode_number(j, "minus");
  if (j.contains("direction")) {
    auto d = parse_direction(j["direction"].is_string() ? j["direction"].get<std::string>() : "");
    if (!d) throw bad_request("unknown criterion direction");
    c.direction = *d;
  }
  return c;
}

inline std::vector<ChecklistCriterion> decode_criteria(const nlohmann::json& j) {
  if (!j.is_array()) throw bad_request("criteria must be an array");
  std::vector<ChecklistCriterion> out;
  for (const auto& c : j) out.push_back(decode_criterion(c));
  return out;
}

}  // namespace sitesel::json
