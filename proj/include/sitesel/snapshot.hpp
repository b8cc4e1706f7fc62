#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sitesel/domain.hpp"
#include "sitesel/error.hpp"

namespace sitesel {

struct Observation {
  TimePoint t;
  double value = 0;
  bool operator==(const Observation&) const = default;
};

struct Provenance {
  std::string source;
  std::string stamp;      ///< content hash; identical bytes give identical stamps
  std::string loaded_at;  ///< wall-clock load time, informational only
};

/// FNV-1a 64-bit, used for content stamps.
class ContentHash {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
    // field separator so ("ab","c") != ("a","bc")
    h_ ^= 0xff;
    h_ *= 0x100000001b3ULL;
  }
  std::string hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h_ >> (4 * i)) & 0xf];
    return out;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// Thrown when a dataset fails validation; carries every violation.
class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationReport report)
      : Error(ErrorCode::validation_failed, "dataset failed validation:\n" + report.summary()),
        report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Immutable, fully indexed dataset. Construct through build(); share via
/// shared_ptr<const Snapshot>. All accessors are safe for concurrent readers.
class Snapshot {
 public:
  using Index = std::size_t;

  static std::shared_ptr<const Snapshot> build(Bundle bundle, Provenance provenance) {
    auto report = validate_snapshot(bundle.levels, bundle.sites, bundle.factors, bundle.values,
                                    bundle.geometries);
    if (!report.ok()) throw ValidationError(std::move(report));
    return std::shared_ptr<const Snapshot>(new Snapshot(std::move(bundle), std::move(provenance)));
  }

  // --- metadata ---

  const Provenance& provenance() const { return provenance_; }
  const std::vector<AdminLevel>& levels() const { return bundle_.levels; }
  TimePoint default_time() const { return bundle_.default_time; }
  const std::vector<std::string>& warnings() const { return bundle_.warnings; }
  int format_version() const { return bundle_.format_version; }

  std::optional<int> level_by_name(std::string_view name) const {
    for (const auto& l : bundle_.levels)
      if (l.name == name) return l.ordinal;
    return std::nullopt;
  }

  int level_ordinal(std::string_view name) const {
    if (auto o = level_by_name(name)) return *o;
    throw Error(ErrorCode::unknown_level, "unknown level '" + std::string(name) + "'");
  }

  // --- sites ---

  /// Sites ordered by id.
  const std::vector<Site>& sites() const { return bundle_.sites; }
  std::size_t site_count() const { return bundle_.sites.size(); }

  const Site* find_site(std::string_view id) const {
    auto it = site_index_.find(std::string(id));
    return it == site_index_.end() ? nullptr : &bundle_.sites[it->second];
  }

  Index site_index(std::string_view id) const {
    auto it = site_index_.find(std::string(id));
    if (it == site_index_.end()) throw unknown_site(id);
    return it->second;
  }

  const Site& site(std::string_view id) const { return bundle_.sites[site_index(id)]; }
  const Site& site_at(Index i) const { return bundle_.sites[i]; }

  /// Resolves an id, then a short name, then a unique exact name.
  const Site& resolve_site(std::string_view ref) const {
    if (const Site* s = find_site(ref)) return *s;
    const Site* hit = nullptr;
    for (const auto& s : bundle_.sites)
      if (!s.short_name.empty() && s.short_name == ref) {
        if (hit) throw Error(ErrorCode::unknown_site, "ambiguous site '" + std::string(ref) + "'");
        hit = &s;
      }
    if (hit) return *hit;
    for (const auto& s : bundle_.sites)
      if (s.name == ref) {
        if (hit) throw Error(ErrorCode::unknown_site, "ambiguous site '" + std::string(ref) + "'");
        hit = &s;
      }
    if (hit) return *hit;
    throw unknown_site(ref);
  }

  /// Children ordered by name, then id.
  std::span<const Index> children_of(Index i) const { return children_[i]; }
  std::optional<Index> parent_of(Index i) const { return parent_[i]; }
  std::span<const Index> roots() const { return roots_; }
  std::size_t leaf_count(Index i) const { return leaf_count_[i]; }
  bool is_leaf(Index i) const { return children_[i].empty(); }

  // --- factors ---

  /// Factors in catalog order.
  const std::vector<FactorDefinition>& factors() const { return bundle_.factors; }

  const FactorDefinition* find_factor(std::string_view id) const {
    auto it = factor_index_.find(std::string(id));
    return it == factor_index_.end() ? nullptr : &bundle_.factors[it->second];
  }

  Index factor_index(std::string_view id) const {
    auto it = factor_index_.find(std::string(id));
    if (it == factor_index_.end()) throw unknown_factor(id);
    return it->second;
  }

  const FactorDefinition& factor(std::string_view id) const {
    return bundle_.factors[factor_index(id)];
  }
  const FactorDefinition& factor_at(Index i) const { return bundle_.factors[i]; }

  // --- values ---

  std::size_t value_count() const { return bundle_.values.size(); }

  /// Stored observations, time-ordered. Empty when none.
  std::span<const Observation> series(Index site, Index factor) const {
    auto it = series_.find(key(site, factor));
    if (it == series_.end()) return {};
    return it->second;
  }

  std::optional<double> stored_value(Index site, Index factor, TimePoint t) const {
    auto s = series(site, factor);
    auto it = std::lower_bound(s.begin(), s.end(), t,
                               [](const Observation& o, TimePoint tp) { return o.t < tp; });
    if (it == s.end() || it->t != t) return std::nullopt;
    return it->value;
  }

  const Geometry* geometry(Index site) const {
    const auto& ref = bundle_.sites[site].geometry_ref;
    if (!ref) return nullptr;
    auto it = bundle_.geometries.find(*ref);
    return it == bundle_.geometries.end() ? nullptr : &it->second;
  }

  /// The underlying bundle, canonically ordered; used for export.
  const Bundle& bundle() const { return bundle_; }

 private:
  Snapshot(Bundle bundle, Provenance provenance)
      : bundle_(std::move(bundle)), provenance_(std::move(provenance)) {
    auto& sites = bundle_.sites;
    std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) { return a.id < b.id; });
    for (auto& s : sites)
      if (!s.geometry_ref && bundle_.geometries.count(s.id)) s.geometry_ref = s.id;
    for (Index i = 0; i < sites.size(); ++i) site_index_.emplace(sites[i].id, i);
    for (Index i = 0; i < bundle_.factors.size(); ++i)
      factor_index_.emplace(bundle_.factors[i].id, i);

    children_.resize(sites.size());
    parent_.resize(sites.size());
    for (Index i = 0; i < sites.size(); ++i) {
      if (sites[i].parent_id) {
        Index p = site_index_.at(*sites[i].parent_id);
        parent_[i] = p;
        children_[p].push_back(i);
      } else {
        roots_.push_back(i);
      }
    }
    auto by_name = [&](Index a, Index b) {
      if (sites[a].name != sites[b].name) return sites[a].name < sites[b].name;
      return sites[a].id < sites[b].id;
    };
    for (auto& c : children_) std::sort(c.begin(), c.end(), by_name);
    std::sort(roots_.begin(), roots_.end(), by_name);

    // Leaf counts: deepest levels first.
    leaf_count_.assign(sites.size(), 0);
    std::vector<Index> order(sites.size());
    for (Index i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return sites[a].level > sites[b].level; });
    for (Index i : order) {
      if (children_[i].empty()) leaf_count_[i] = 1;
      if (parent_[i]) leaf_count_[*parent_[i]] += leaf_count_[i];
    }

    auto& values = bundle_.values;
    std::sort(values.begin(), values.end(), [](const FactorValue& a, const FactorValue& b) {
      if (a.site_id != b.site_id) return a.site_id < b.site_id;
      if (a.factor_id != b.factor_id) return a.factor_id < b.factor_id;
      return a.t < b.t;
    });
    for (const auto& v : values)
      series_[key(site_index_.at(v.site_id), factor_index_.at(v.factor_id))].push_back(
          {v.t, v.value});
  }

  std::uint64_t key(Index site, Index factor) const {
    return static_cast<std::uint64_t>(site) * (bundle_.factors.size() + 1) + factor;
  }

  Bundle bundle_;
  Provenance provenance_;
  std::unordered_map<std::string, Index> site_index_;
  std::unordered_map<std::string, Index> factor_index_;
  std::vector<std::vector<Index>> children_;
  std::vector<std::optional<Index>> parent_;
  std::vector<Index> roots_;
  std::vector<std::size_t> leaf_count_;
  std::unordered_map<std::uint64_t, std::vector<Observation>> series_;
};

using SnapshotPtr = std::shared_ptr<const Snapshot>;

}  // namespace sitesel
