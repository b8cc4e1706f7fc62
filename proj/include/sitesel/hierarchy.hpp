#pragma once

#include <algorithm>
#include <optional>
#include <string_view>
#include <vector>

#include "sitesel/snapshot.hpp"

namespace sitesel {

/// A factor value at a site, stored or rolled up from the site's children.
/// coverage is the fraction of leaf descendants that contributed data.
struct AggregatedValue {
  std::optional<double> value;
  double coverage = 0;

  bool partial() const { return coverage < 1.0; }
  bool operator==(const AggregatedValue&) const = default;
};

// ---------------------------------------------------------------------------
// Navigation
// ---------------------------------------------------------------------------

/// Child sites ordered by name, then id. Leaves yield an empty list.
inline std::vector<const Site*> children(const Snapshot& snap, std::string_view site_id) {
  std::vector<const Site*> out;
  for (auto c : snap.children_of(snap.site_index(site_id))) out.push_back(&snap.site_at(c));
  return out;
}

/// The parent site, or nullptr for a root.
inline const Site* parent(const Snapshot& snap, std::string_view site_id) {
  auto p = snap.parent_of(snap.site_index(site_id));
  return p ? &snap.site_at(*p) : nullptr;
}

/// Site itself first, root last.
inline std::vector<const Site*> path_to_root(const Snapshot& snap, std::string_view site_id) {
  std::vector<const Site*> out;
  std::optional<Snapshot::Index> cur = snap.site_index(site_id);
  while (cur) {
    out.push_back(&snap.site_at(*cur));
    cur = snap.parent_of(*cur);
  }
  return out;
}

/// All sites at `level` below `scope` (or everywhere), ordered by name, then id.
inline std::vector<const Site*> level_members(const Snapshot& snap, int level,
                                              std::optional<std::string_view> scope = {}) {
  if (level < 0 || level >= static_cast<int>(snap.levels().size()))
    throw Error(ErrorCode::unknown_level, "unknown level ordinal " + std::to_string(level));
  std::vector<const Site*> out;
  if (!scope) {
    for (const auto& s : snap.sites())
      if (s.level == level) out.push_back(&s);
  } else {
    const auto root = snap.site_index(*scope);
    std::vector<Snapshot::Index> stack;
    for (auto c : snap.children_of(root)) stack.push_back(c);
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      const Site& s = snap.site_at(i);
      if (s.level == level) {
        out.push_back(&s);
        continue;
      }
      for (auto c : snap.children_of(i)) stack.push_back(c);
    }
  }
  std::sort(out.begin(), out.end(), [](const Site* a, const Site* b) {
    if (a->name != b->name) return a->name < b->name;
    return a->id < b->id;
  });
  return out;
}

inline std::vector<const Site*> level_members(const Snapshot& snap, std::string_view level_name,
                                              std::optional<std::string_view> scope = {}) {
  return level_members(snap, snap.level_ordinal(level_name), scope);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Index-based aggregation. A stored row always wins; otherwise children
/// are combined per the factor's rule, recursively.
inline AggregatedValue aggregate_at(const Snapshot& snap, Snapshot::Index site,
                                    Snapshot::Index factor, TimePoint t) {
  if (auto v = snap.stored_value(site, factor, t)) return {*v, 1.0};
  const auto kids = snap.children_of(site);
  const FactorDefinition& def = snap.factor_at(factor);
  if (kids.empty() || def.aggregation == Aggregation::none) return {};

  const double leaves = static_cast<double>(snap.leaf_count(site));
  double covered = 0;
  std::size_t contributors = 0;

  switch (def.aggregation) {
    case Aggregation::sum:
    case Aggregation::mean: {
      double total = 0;
      for (auto c : kids) {
        const auto a = aggregate_at(snap, c, factor, t);
        if (!a.value) continue;
        total += *a.value;
        covered += a.coverage * static_cast<double>(snap.leaf_count(c));
        ++contributors;
      }
      if (contributors == 0) return {};
      if (def.aggregation == Aggregation::mean) total /= static_cast<double>(contributors);
      return {total, covered / leaves};
    }
    case Aggregation::weighted_mean: {
      const auto weight = snap.factor_index(def.weight_factor);
      double num = 0, den = 0;
      for (auto c : kids) {
        const auto a = aggregate_at(snap, c, factor, t);
        if (!a.value) continue;
        const auto w = aggregate_at(snap, c, weight, t);
        if (!w.value) continue;
        num += *a.value * *w.value;
        den += *w.value;
        covered += a.coverage * static_cast<double>(snap.leaf_count(c));
        ++contributors;
      }
      // Zero total weight leaves the mean undefined.
      if (contributors == 0 || den == 0) return {};
      return {num / den, covered / leaves};
    }
    case Aggregation::none:
      break;
  }
  return {};
}

inline AggregatedValue aggregate_value(const Snapshot& snap, std::string_view site_id,
                                       std::string_view factor_id, TimePoint t) {
  return aggregate_at(snap, snap.site_index(site_id), snap.factor_index(factor_id), t);
}

/// Greatest stored time <= t anywhere in the site's subtree (the site itself
/// included), i.e. the latest time an aggregate could draw on.
inline std::optional<TimePoint> latest_time_at_or_before(const Snapshot& snap, Snapshot::Index site,
                                                         Snapshot::Index factor, TimePoint t) {
  std::optional<TimePoint> best;
  std::vector<Snapshot::Index> stack{site};
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    const auto s = snap.series(i, factor);
    auto it = std::upper_bound(s.begin(), s.end(), t,
                               [](TimePoint tp, const Observation& o) { return tp < o.t; });
    if (it != s.begin()) {
      const TimePoint cand = std::prev(it)->t;
      if (!best || *best < cand) best = cand;
    }
    for (auto c : snap.children_of(i)) stack.push_back(c);
  }
  return best;
}

}  // namespace sitesel
