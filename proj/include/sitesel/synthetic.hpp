#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sitesel/domain.hpp"
#include "sitesel/error.hpp"

namespace sitesel {

struct SyntheticSpec {
  std::vector<std::size_t> level_counts{1, 2, 4};  ///< sites per level, root level first
  std::size_t factors = 2;
  std::size_t timepoints = 3;
  std::uint64_t seed = 0;
  double missing_rate = 0;  ///< probability that a leaf observation is dropped
};

namespace detail {

class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

inline std::string synthetic_site_id(std::size_t level, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "L%zu-%05zu", level, index);
  return buf;
}

inline Geometry box(double x0, double y0, double x1, double y1) {
  return Geometry{{Polygon{{Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}}}}, false};
}

}  // namespace detail

/// Deterministic synthetic dataset. Sites at level L+1 are spread over the
/// sites at level L in contiguous, near-equal blocks. Factor 0 is a summed
/// count; further factors cycle through mean, weighted_mean(factor 0), sum
/// and none. Summed factors are stored at every level, leaf-first, so that
/// each parent equals the sum of its children's stored values.
inline Bundle generate_synthetic(const SyntheticSpec& spec) {
  if (spec.level_counts.empty() || spec.factors == 0 || spec.timepoints == 0)
    throw precondition("synthetic counts must be >= 1");
  for (auto c : spec.level_counts)
    if (c == 0) throw precondition("synthetic level counts must be >= 1");

  detail::SplitRng rng(spec.seed);
  Bundle b;
  b.source = "synthetic(seed=" + std::to_string(spec.seed) + ")";
  b.levels.clear();
  const auto defaults = default_levels();
  for (std::size_t l = 0; l < spec.level_counts.size(); ++l)
    b.levels.push_back({static_cast<int>(l), l < defaults.size() ? defaults[l].name
                                                                 : "level" + std::to_string(l)});
  b.default_time = TimePoint{2000, 1};

  // Hierarchy with nested boxes.
  struct Node {
    std::size_t level;
    std::size_t parent;  // index into previous level
    double x0, y0, x1, y1;
  };
  std::vector<std::vector<Node>> nodes(spec.level_counts.size());
  std::vector<std::vector<std::vector<std::size_t>>> kids(spec.level_counts.size());
  for (std::size_t l = 0; l < spec.level_counts.size(); ++l) {
    const std::size_t n = spec.level_counts[l];
    kids[l].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t p = 0;
      if (l > 0) {
        p = i * spec.level_counts[l - 1] / n;
        kids[l - 1][p].push_back(i);
      }
      nodes[l].push_back({l, p, 0, 0, 0, 0});
    }
  }
  for (std::size_t i = 0; i < nodes[0].size(); ++i) {
    const double w = 20.0 / static_cast<double>(nodes[0].size());
    nodes[0][i].x0 = w * static_cast<double>(i);
    nodes[0][i].x1 = w * static_cast<double>(i + 1);
    nodes[0][i].y0 = 40;
    nodes[0][i].y1 = 60;
  }
  for (std::size_t l = 0; l + 1 < nodes.size(); ++l) {
    for (std::size_t p = 0; p < nodes[l].size(); ++p) {
      const auto& par = nodes[l][p];
      const auto& ks = kids[l][p];
      for (std::size_t j = 0; j < ks.size(); ++j) {
        auto& c = nodes[l + 1][ks[j]];
        const double f0 = static_cast<double>(j) / static_cast<double>(ks.size());
        const double f1 = static_cast<double>(j + 1) / static_cast<double>(ks.size());
        if (l % 2 == 0) {
          c.x0 = par.x0 + (par.x1 - par.x0) * f0;
          c.x1 = par.x0 + (par.x1 - par.x0) * f1;
          c.y0 = par.y0;
          c.y1 = par.y1;
        } else {
          c.y0 = par.y0 + (par.y1 - par.y0) * f0;
          c.y1 = par.y0 + (par.y1 - par.y0) * f1;
          c.x0 = par.x0;
          c.x1 = par.x1;
        }
      }
    }
  }
  for (std::size_t l = 0; l < nodes.size(); ++l)
    for (std::size_t i = 0; i < nodes[l].size(); ++i) {
      Site s;
      s.id = detail::synthetic_site_id(l, i);
      s.name = "Site " + std::to_string(l) + "." + std::to_string(i);
      s.level = static_cast<int>(l);
      if (l > 0) s.parent_id = detail::synthetic_site_id(l - 1, nodes[l][i].parent);
      b.sites.push_back(s);
      const auto& n = nodes[l][i];
      b.geometries.emplace(s.id, detail::box(n.x0, n.y0, n.x1, n.y1));
    }

  // Factor catalog.
  for (std::size_t f = 0; f < spec.factors; ++f) {
    FactorDefinition d;
    d.id = "f" + std::to_string(f);
    d.name = "Factor " + std::to_string(f);
    d.category = static_cast<FactorCategory>(f % 10);
    d.unit = f == 0 ? "count" : "units";
    d.kind = FactorKind::hard;
    d.direction = static_cast<Direction>(f % 3);
    if (f == 0) {
      d.aggregation = Aggregation::sum;
    } else {
      switch (f % 4) {
        case 1: d.aggregation = Aggregation::mean; break;
        case 2:
          d.aggregation = Aggregation::weighted_mean;
          d.weight_factor = "f0";
          break;
        case 3: d.aggregation = Aggregation::sum; break;
        default: d.aggregation = Aggregation::none; break;
      }
    }
    b.factors.push_back(std::move(d));
  }

  // Observations, leaf-first.
  const std::size_t leaf_level = nodes.size() - 1;
  for (std::size_t f = 0; f < spec.factors; ++f) {
    const auto& def = b.factors[f];
    for (std::size_t ti = 0; ti < spec.timepoints; ++ti) {
      const TimePoint t = TimePoint::from_ordinal(b.default_time.ordinal() + static_cast<int>(ti));
      // stored[l][i] = value, if present
      std::vector<std::vector<std::optional<double>>> stored(nodes.size());
      for (std::size_t l = nodes.size(); l-- > 0;) {
        stored[l].resize(nodes[l].size());
        for (std::size_t i = 0; i < nodes[l].size(); ++i) {
          const bool leaf = l == leaf_level || kids[l][i].empty();
          std::optional<double> v;
          if (leaf) {
            const bool drop = spec.missing_rate > 0 && rng.unit() < spec.missing_rate;
            double raw;
            if (def.aggregation == Aggregation::sum) raw = static_cast<double>(rng.below(10001));
            else raw = static_cast<double>(rng.below(100001)) / 100.0;
            if (!drop) v = raw;
          } else if (def.aggregation == Aggregation::sum) {
            double total = 0;
            bool any = false;
            for (auto c : kids[l][i])
              if (stored[l + 1][c]) {
                total += *stored[l + 1][c];
                any = true;
              }
            if (any) v = total;
          }
          stored[l][i] = v;
          if (v)
            b.values.push_back({detail::synthetic_site_id(l, i), def.id, t, *v});
        }
      }
    }
  }
  return b;
}

}  // namespace sitesel
