#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sitesel/hierarchy.hpp"
#include "sitesel/number_format.hpp"
#include "sitesel/snapshot.hpp"

namespace sitesel {

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

enum class CompareOp { lt, le, eq, ge, gt, between };

inline std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::lt: return "lt";
    case CompareOp::le: return "le";
    case CompareOp::eq: return "eq";
    case CompareOp::ge: return "ge";
    case CompareOp::gt: return "gt";
    case CompareOp::between: return "between";
  }
  return "eq";
}

inline std::optional<CompareOp> parse_compare_op(std::string_view s) {
  if (s == "lt" || s == "<") return CompareOp::lt;
  if (s == "le" || s == "<=") return CompareOp::le;
  if (s == "eq" || s == "=" || s == "==") return CompareOp::eq;
  if (s == "ge" || s == ">=") return CompareOp::ge;
  if (s == "gt" || s == ">") return CompareOp::gt;
  if (s == "between") return CompareOp::between;
  return std::nullopt;
}

/// A numeric test against one or two bounds. between is inclusive.
struct Condition {
  CompareOp op = CompareOp::eq;
  double low = 0;   ///< the bound for single-bound operators
  double high = 0;  ///< only for between

  bool test(double v) const {
    switch (op) {
      case CompareOp::lt: return v < low;
      case CompareOp::le: return v <= low;
      case CompareOp::eq: return v == low;
      case CompareOp::ge: return v >= low;
      case CompareOp::gt: return v > low;
      case CompareOp::between: return low <= v && v <= high;
    }
    return false;
  }

  void validate() const {
    if (!std::isfinite(low) || (op == CompareOp::between && !std::isfinite(high)))
      throw Error(ErrorCode::bad_predicate, "predicate bound is not finite");
    if (op == CompareOp::between && low > high)
      throw Error(ErrorCode::bad_predicate, "between requires low <= high");
  }
};

struct Predicate {
  std::string factor_id;
  Condition condition;
};

/// Mini-grammar: "[factor] op number" with op in < <= = == >= >, or
/// "[factor] between a b". The factor may be omitted (e.g. "<7").
inline Predicate parse_predicate(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::bad_predicate, "bad predicate '" + std::string(text) + "': " + why);
  };
  const std::string_view s = trim(text);
  Predicate p;

  auto number = [&](std::string_view tok) {
    auto v = parse_number(tok);
    if (!v) throw bad("expected a number, got '" + std::string(tok) + "'");
    return *v;
  };

  // "between" form
  std::size_t bpos = std::string_view::npos;
  for (std::size_t i = 0; i + 7 <= s.size(); ++i) {
    if (s.substr(i, 7) == "between" && (i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]))) &&
        (i + 7 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 7])))) {
      bpos = i;
      break;
    }
  }
  if (bpos != std::string_view::npos) {
    p.factor_id = std::string(trim(s.substr(0, bpos)));
    std::string_view rest = trim(s.substr(bpos + 7));
    const auto sp = rest.find_first_of(" \t");
    if (sp == std::string_view::npos) throw bad("between needs two bounds");
    p.condition.op = CompareOp::between;
    p.condition.low = number(trim(rest.substr(0, sp)));
    p.condition.high = number(trim(rest.substr(sp)));
    p.condition.validate();
    return p;
  }

  const auto opos = s.find_first_of("<>=");
  if (opos == std::string_view::npos) throw bad("missing operator");
  std::size_t oend = opos + 1;
  if (oend < s.size() && s[oend] == '=') ++oend;
  auto op = parse_compare_op(s.substr(opos, oend - opos));
  if (!op) throw bad("unknown operator");
  p.factor_id = std::string(trim(s.substr(0, opos)));
  p.condition.op = *op;
  p.condition.low = number(trim(s.substr(oend)));
  p.condition.validate();
  return p;
}

// ---------------------------------------------------------------------------
// when + where -> what
// ---------------------------------------------------------------------------

enum class LookupMode { exact, latest_at_or_before };

struct FactorReading {
  std::string factor_id;
  AggregatedValue value;
  std::optional<TimePoint> at;  ///< time the value refers to; none when absent
};

inline std::vector<FactorReading> lookup_what(const Snapshot& snap, std::string_view site_id,
                                              const std::vector<std::string>& factor_ids,
                                              TimePoint t, LookupMode mode = LookupMode::exact) {
  const auto site = snap.site_index(site_id);
  std::vector<Snapshot::Index> factors;
  for (const auto& f : factor_ids) factors.push_back(snap.factor_index(f));

  std::vector<FactorReading> out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    FactorReading r{factor_ids[i], {}, std::nullopt};
    std::optional<TimePoint> at = t;
    if (mode == LookupMode::latest_at_or_before)
      at = latest_time_at_or_before(snap, site, factors[i], t);
    if (at) {
      r.value = aggregate_at(snap, site, factors[i], *at);
      if (r.value.value) r.at = at;
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// when + what -> where
// ---------------------------------------------------------------------------

struct RankKey {
  std::string factor_id;
  bool descending = true;
};

struct WhereQuery {
  std::string level;  ///< level name
  std::optional<std::string> scope;
  TimePoint t;
  std::vector<Predicate> predicates;  ///< conjunctive
  std::vector<RankKey> rank_by;
  std::optional<std::size_t> limit;
};

struct EvaluatedValue {
  std::string factor_id;
  AggregatedValue value;
};

struct SiteMatch {
  std::string site_id;
  std::string site_name;
  std::vector<EvaluatedValue> values;  ///< predicate factors, then rank factors
  std::size_t rank = 0;                ///< 1-based

  const AggregatedValue* find(std::string_view factor_id) const {
    for (const auto& v : values)
      if (v.factor_id == factor_id) return &v.value;
    return nullptr;
  }
};

namespace detail {

/// Orders two optional values for ranking; absent values sort last.
/// Returns <0, 0, >0.
inline int compare_rank_values(const std::optional<double>& a, const std::optional<double>& b,
                               bool descending) {
  if (!a && !b) return 0;
  if (!a) return 1;
  if (!b) return -1;
  if (*a == *b) return 0;
  const bool a_first = descending ? *a > *b : *a < *b;
  return a_first ? -1 : 1;
}

}  // namespace detail

/// Sites at the query level within scope that satisfy every predicate,
/// ordered by rank_by then site id. An absent value fails its predicate.
inline std::vector<SiteMatch> search_where(const Snapshot& snap, const WhereQuery& q) {
  std::vector<std::string> needed;
  std::vector<Snapshot::Index> needed_idx;
  auto need = [&](const std::string& f) {
    const auto idx = snap.factor_index(f);
    if (std::find(needed.begin(), needed.end(), f) == needed.end()) {
      needed.push_back(f);
      needed_idx.push_back(idx);
    }
  };
  for (const auto& p : q.predicates) {
    p.condition.validate();
    need(p.factor_id);
  }
  for (const auto& r : q.rank_by) need(r.factor_id);

  std::optional<std::string_view> scope;
  if (q.scope) scope = *q.scope;
  const auto candidates = level_members(snap, q.level, scope);

  std::vector<SiteMatch> out;
  for (const Site* s : candidates) {
    const auto si = snap.site_index(s->id);
    SiteMatch m{s->id, s->name, {}, 0};
    for (std::size_t i = 0; i < needed.size(); ++i)
      m.values.push_back({needed[i], aggregate_at(snap, si, needed_idx[i], q.t)});
    const bool keep = std::all_of(q.predicates.begin(), q.predicates.end(), [&](const Predicate& p) {
      const auto* v = m.find(p.factor_id);
      return v->value && p.condition.test(*v->value);
    });
    if (keep) out.push_back(std::move(m));
  }

  std::sort(out.begin(), out.end(), [&](const SiteMatch& a, const SiteMatch& b) {
    for (const auto& r : q.rank_by) {
      const int c = detail::compare_rank_values(a.find(r.factor_id)->value,
                                                b.find(r.factor_id)->value, r.descending);
      if (c != 0) return c < 0;
    }
    return a.site_id < b.site_id;
  });
  if (q.limit && out.size() > *q.limit) out.resize(*q.limit);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = i + 1;
  return out;
}

// ---------------------------------------------------------------------------
// where + what -> when
// ---------------------------------------------------------------------------

struct TimeInterval {
  TimePoint first;
  TimePoint last;
  bool operator==(const TimeInterval&) const = default;
  std::string str() const { return first.str() + ".." + last.str(); }
};

/// Maximal runs of adjacent stored observations that satisfy the condition,
/// as closed intervals. Gaps between observations are not interpolated.
inline std::vector<TimeInterval> search_when(const Snapshot& snap, std::string_view site_id,
                                             std::string_view factor_id, const Condition& cond) {
  cond.validate();
  const auto series = snap.series(snap.site_index(site_id), snap.factor_index(factor_id));
  std::vector<TimeInterval> out;
  bool open = false;
  for (const auto& o : series) {
    if (cond.test(o.value)) {
      if (open) out.back().last = o.t;
      else out.push_back({o.t, o.t});
      open = true;
    } else {
      open = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct SiteComparison {
  std::vector<std::string> site_ids;
  std::vector<std::string> factor_ids;
  /// cells[i][j] = value of factor j at site i
  std::vector<std::vector<AggregatedValue>> cells;
  /// rankings[j] = site ids ordered best first for factor j; absent excluded
  std::vector<std::vector<std::string>> rankings;
  std::vector<std::string> warnings;
};

/// Ranking direction for a factor: lower_is_better ascends, else descends.
inline bool ranks_descending(const FactorDefinition& f) {
  return f.direction != Direction::lower_is_better;
}

inline SiteComparison compare_sites(const Snapshot& snap, const std::vector<std::string>& site_ids,
                                    const std::vector<std::string>& factor_ids, TimePoint t) {
  if (site_ids.size() < 2) throw precondition("compare_sites needs at least two sites");
  SiteComparison out{site_ids, factor_ids, {}, {}, {}};
  std::vector<Snapshot::Index> sites, factors;
  for (const auto& s : site_ids) sites.push_back(snap.site_index(s));
  for (const auto& f : factor_ids) factors.push_back(snap.factor_index(f));

  for (std::size_t i = 1; i < sites.size(); ++i)
    if (snap.site_at(sites[i]).level != snap.site_at(sites[0]).level) {
      out.warnings.push_back("sites span more than one level");
      break;
    }

  for (auto s : sites) {
    auto& row = out.cells.emplace_back();
    for (auto f : factors) row.push_back(aggregate_at(snap, s, f, t));
  }

  for (std::size_t j = 0; j < factors.size(); ++j) {
    const bool desc = ranks_descending(snap.factor_at(factors[j]));
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (out.cells[i][j].value) order.push_back(i);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const int c = detail::compare_rank_values(out.cells[a][j].value, out.cells[b][j].value, desc);
      if (c != 0) return c < 0;
      return site_ids[a] < site_ids[b];
    });
    auto& ranking = out.rankings.emplace_back();
    for (auto i : order)
      if (ranking.empty() || std::find(ranking.begin(), ranking.end(), site_ids[i]) == ranking.end())
        ranking.push_back(site_ids[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checklist scoring
// ---------------------------------------------------------------------------

enum class Rating { minus = -1, neutral = 0, plus = 1 };

inline char rating_symbol(Rating r) {
  switch (r) {
    case Rating::plus: return '+';
    case Rating::neutral: return 'o';
    case Rating::minus: return '-';
  }
  return '-';
}

struct ChecklistCriterion {
  std::string factor_id;
  double weight = 1;
  double plus_threshold = 0;
  double minus_threshold = 0;
  Direction direction = Direction::higher_is_better;

  /// For higher_is_better: v >= plus -> '+', v >= minus -> 'o', else '-'.
  /// Mirrored for lower_is_better.
  Rating rate(double v) const {
    if (direction == Direction::lower_is_better) {
      if (v <= plus_threshold) return Rating::plus;
      if (v <= minus_threshold) return Rating::neutral;
      return Rating::minus;
    }
    if (v >= plus_threshold) return Rating::plus;
    if (v >= minus_threshold) return Rating::neutral;
    return Rating::minus;
  }

  void validate() const {
    if (!(weight > 0) || !std::isfinite(weight))
      throw precondition("criterion '" + factor_id + "': weight must be positive");
    if (!std::isfinite(plus_threshold) || !std::isfinite(minus_threshold))
      throw precondition("criterion '" + factor_id + "': thresholds must be finite");
    switch (direction) {
      case Direction::higher_is_better:
        if (plus_threshold < minus_threshold)
          throw precondition("criterion '" + factor_id + "': plus threshold below minus threshold");
        break;
      case Direction::lower_is_better:
        if (plus_threshold > minus_threshold)
          throw precondition("criterion '" + factor_id + "': plus threshold above minus threshold");
        break;
      case Direction::neutral:
        throw precondition("criterion '" + factor_id + "': direction must not be neutral");
    }
  }
};

struct ChecklistCell {
  Rating rating = Rating::minus;
  std::optional<double> value;
  bool missing = false;  ///< no value at t; rated '-'
};

struct ChecklistRow {
  std::string site_id;
  std::vector<ChecklistCell> cells;  ///< one per criterion, in criteria order
  double total = 0;
  std::size_t rank = 0;
};

struct ChecklistTable {
  std::vector<ChecklistCriterion> criteria;
  std::vector<ChecklistRow> rows;  ///< ordered by rank (total desc, then id)
};

inline ChecklistTable checklist_score(const Snapshot& snap, const std::vector<std::string>& site_ids,
                                      const std::vector<ChecklistCriterion>& criteria, TimePoint t) {
  if (criteria.empty()) throw precondition("checklist needs at least one criterion");
  std::vector<Snapshot::Index> factors;
  for (const auto& c : criteria) {
    factors.push_back(snap.factor_index(c.factor_id));
    c.validate();
  }
  ChecklistTable out{criteria, {}};
  for (const auto& id : site_ids) {
    const auto s = snap.site_index(id);
    ChecklistRow row{id, {}, 0, 0};
    for (std::size_t j = 0; j < criteria.size(); ++j) {
      ChecklistCell cell;
      cell.value = aggregate_at(snap, s, factors[j], t).value;
      if (cell.value) cell.rating = criteria[j].rate(*cell.value);
      else cell.missing = true;
      row.total += criteria[j].weight * static_cast<int>(cell.rating);
      row.cells.push_back(cell);
    }
    out.rows.push_back(std::move(row));
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const ChecklistRow& a, const ChecklistRow& b) {
    if (a.total != b.total) return a.total > b.total;
    return a.site_id < b.site_id;
  });
  for (std::size_t i = 0; i < out.rows.size(); ++i) out.rows[i].rank = i + 1;
  return out;
}

}  // namespace sitesel
