#include "catch_amalgamated.hpp"

#include <cmath>
#include <limits>

#include "sitesel/domain.hpp"
#include "sitesel/number_format.hpp"
#include "sitesel/snapshot.hpp"
#include "sitesel/synthetic.hpp"
#include "sitesel/time_point.hpp"

using namespace sitesel;

namespace {

Site site(std::string id, int level, std::optional<std::string> parent = {}) {
  Site s;
  s.id = id;
  s.name = "Name " + id;
  s.level = level;
  s.parent_id = std::move(parent);
  return s;
}

FactorDefinition factor(std::string id, Aggregation agg = Aggregation::sum, FactorKind kind = FactorKind::hard) {
  FactorDefinition f;
  f.id = std::move(id);
  f.name = f.id;
  f.aggregation = agg;
  f.kind = kind;
  return f;
}

std::vector<Site> chain() {
  return {site("DE", 0), site("05", 1, "DE"), site("05754", 2, "05")};
}

std::size_t count_rule(const ValidationReport& r, std::string_view rule) {
  std::size_t n = 0;
  for (const auto& i : r.issues)
    if (i.rule == rule) ++n;
  return n;
}

ValidationReport validate(const std::vector<AdminLevel>& levels, const std::vector<Site>& sites,
                          const std::vector<FactorDefinition>& factors, const std::vector<FactorValue>& values = {},
                          const std::map<std::string, Geometry>& geometries = {}) {
  return validate_snapshot(levels, sites, factors, values, geometries);
}

}  // namespace

TEST_CASE("time points parse year and year-month forms") {
  auto a = parse_time_point("2016");
  REQUIRE(a);
  CHECK(*a == TimePoint{2016, 1});
  CHECK(parse_time_point("2016-06") == TimePoint{2016, 6});
  CHECK(TimePoint{2016, 6}.str() == "2016-06");

  TimeParseError why{};
  CHECK_FALSE(parse_time_point("2016-13", &why));
  CHECK(why == TimeParseError::invalid_month);
  CHECK_FALSE(parse_time_point("2016-00", &why));
  CHECK(why == TimeParseError::invalid_month);
  CHECK_FALSE(parse_time_point("16-01", &why));
  CHECK(why == TimeParseError::malformed);
  CHECK_FALSE(parse_time_point("2016-6", &why));
  CHECK_FALSE(parse_time_point("", &why));
  CHECK_FALSE(parse_time_point("2016-06x", &why));
}

TEST_CASE("time points order chronologically and round-trip through ordinals") {
  CHECK(TimePoint{2015, 12} < TimePoint{2016, 1});
  CHECK(TimePoint{2016, 2} > TimePoint{2016, 1});
  for (int o = 2000 * 12; o < 2003 * 12; ++o) CHECK(TimePoint::from_ordinal(o).ordinal() == o);
  CHECK(TimePoint::from_ordinal(TimePoint{2016, 12}.ordinal() + 1) == TimePoint{2017, 1});
}

TEST_CASE("numbers format to the shortest round-trip text and parse locale-free") {
  CHECK(format_number(416679) == "416679");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5) == "-2.5");
  CHECK(parse_number("6.9") == 6.9);
  CHECK(parse_number("-1e3") == -1000);
  CHECK_FALSE(parse_number("6,9"));
  CHECK_FALSE(parse_number("1 000"));
  CHECK_FALSE(parse_number("nan"));
  CHECK_FALSE(parse_number("inf"));
  CHECK_FALSE(parse_number(""));
  for (double x : {0.1, 1.0 / 3.0, 12345.678, 1e-300, 6.02e23})
    CHECK(*parse_number(format_number(x)) == x);
}

TEST_CASE("a well-formed chain validates with an empty report") {
  auto r = validate(default_levels(), chain(), {factor("population")},
                             {{"05754", "population", {2016, 1}, 353944}});
  CHECK(r.ok());
  CHECK(r.empty());
}

TEST_CASE("a site whose parent is missing yields exactly one unresolved-parent error") {
  auto sites = chain();
  sites.push_back(site("X", 2, "nope"));
  auto r = validate(default_levels(), sites, {});
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].rule == "unresolved parent");
  CHECK(r.issues[0].subject == "X");
  CHECK(r.error_count() == 1);
}

TEST_CASE("two sites sharing an id yield exactly one duplicate-id error") {
  auto sites = chain();
  sites.push_back(site("05754", 2, "05"));
  auto r = validate(default_levels(), sites, {});
  REQUIRE(r.issues.size() == 1);
  CHECK(r.issues[0].rule == "duplicate site id");
}

TEST_CASE("hierarchy rules: level mismatch, root parent, missing parent, unknown level, cycles") {
  SECTION("child level must be parent level + 1") {
    auto sites = chain();
    sites.push_back(site("skip", 3, "05"));
    CHECK(count_rule(validate(default_levels(), sites, {}), "level mismatch") == 1);
  }
  SECTION("level-0 sites have no parent") {
    std::vector<Site> sites{site("DE", 0), site("AT", 0, "DE")};
    CHECK(count_rule(validate(default_levels(), sites, {}), "root has parent") == 1);
  }
  SECTION("non-root sites need a parent") {
    std::vector<Site> sites{site("DE", 0), site("05", 1)};
    CHECK(count_rule(validate(default_levels(), sites, {}), "missing parent") == 1);
  }
  SECTION("levels outside the declared set") {
    std::vector<Site> sites{site("DE", 0), site("05", 9, "DE")};
    CHECK(count_rule(validate(default_levels(), sites, {}), "unknown level") == 1);
  }
  SECTION("cycles are reported") {
    std::vector<Site> sites{site("A", 1, "B"), site("B", 1, "A")};
    auto r = validate(default_levels(), sites, {});
    CHECK_FALSE(r.ok());
    CHECK(count_rule(r, "cycle") >= 1);
  }
  SECTION("levels must be contiguous from 0") {
    std::vector<AdminLevel> levels{{0, "nation"}, {2, "county"}};
    CHECK(count_rule(validate(levels, {site("DE", 0)}, {}), "noncontiguous levels") == 1);
  }
}

TEST_CASE("factor catalog rules") {
  SECTION("soft factors are never aggregated") {
    auto f = factor("image", Aggregation::mean, FactorKind::soft);
    CHECK(count_rule(validate(default_levels(), chain(), {f}), "soft factor aggregated") == 1);
  }
  SECTION("weighted mean needs a known, summed weight factor") {
    auto w = factor("income", Aggregation::weighted_mean);
    w.weight_factor = "households";
    CHECK(count_rule(validate(default_levels(), chain(), {w}), "unresolved weight factor") == 1);
    auto hh = factor("households", Aggregation::mean);
    CHECK(count_rule(validate(default_levels(), chain(), {w, hh}), "weight factor not summed") == 1);
    hh.aggregation = Aggregation::sum;
    CHECK(validate(default_levels(), chain(), {w, hh}).ok());
  }
  SECTION("duplicate factor ids") {
    CHECK(count_rule(validate(default_levels(), chain(), {factor("a"), factor("a")}),
                     "duplicate factor id") == 1);
  }
}

TEST_CASE("observation rules") {
  const std::vector<FactorDefinition> fs{factor("population")};
  SECTION("unknown site or factor") {
    auto r = validate(default_levels(), chain(), fs,
                               {{"nowhere", "population", {2016, 1}, 1}, {"DE", "nothing", {2016, 1}, 1}});
    CHECK(count_rule(r, "unresolved site") == 1);
    CHECK(count_rule(r, "unresolved factor") == 1);
  }
  SECTION("non-finite values") {
    auto r = validate(default_levels(), chain(), fs,
                               {{"DE", "population", {2016, 1}, std::numeric_limits<double>::quiet_NaN()},
                                {"05", "population", {2016, 1}, std::numeric_limits<double>::infinity()}});
    CHECK(count_rule(r, "non-finite value") == 2);
  }
  SECTION("at most one value per site, factor and time") {
    auto r = validate(default_levels(), chain(), fs,
                               {{"DE", "population", {2016, 1}, 1}, {"DE", "population", {2016, 1}, 2}});
    CHECK(count_rule(r, "duplicate observation") == 1);
  }
}

TEST_CASE("geometry defects") {
  const Ring square{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0, 0}};
  CHECK(ring_defect(square).empty());
  CHECK_FALSE(ring_defect(Ring{{0, 0}, {1, 0}, {1, 1}, {0, 1}}).empty());            // not closed
  CHECK_FALSE(ring_defect(Ring{{0, 0}, {1, 0}, {0, 0}}).empty());                    // too short
  CHECK_FALSE(ring_defect(Ring{{0, 0}, {1, 1}, {1, 0}, {0, 1}, {0, 0}}).empty());    // bow tie
  CHECK_FALSE(ring_defect(Ring{{0, 0}, {200, 0}, {200, 1}, {0, 1}, {0, 0}}).empty()); // out of range

  std::map<std::string, Geometry> geoms{{"DE", Geometry{{Polygon{{square}}}, false}},
                                        {"ghost", Geometry{{Polygon{{square}}}, false}}};
  auto r = validate(default_levels(), chain(), {}, {}, geoms);
  CHECK(r.ok());
  CHECK(count_rule(r, "unresolved geometry") == 1);

  geoms["05"] = Geometry{{Polygon{{Ring{{0, 0}, {1, 1}, {1, 0}, {0, 1}, {0, 0}}}}}, false};
  CHECK(count_rule(validate(default_levels(), chain(), {}, {}, geoms), "invalid geometry") == 1);
}

TEST_CASE("Snapshot::build rejects invalid bundles with the full report") {
  Bundle b;
  b.levels = default_levels();
  b.sites = chain();
  b.sites.push_back(site("X", 2, "nope"));
  try {
    Snapshot::build(b, {});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.code() == ErrorCode::validation_failed);
    CHECK(e.report().error_count() == 1);
  }
}

TEST_CASE("site references resolve by id, short name, then unique name") {
  Bundle b;
  b.levels = default_levels();
  b.sites = chain();
  b.sites[1].short_name = "NRW";
  b.sites[1].name = "Nordrhein-Westfalen";
  auto snap = Snapshot::build(b, {});
  CHECK(snap->resolve_site("05").id == "05");
  CHECK(snap->resolve_site("NRW").id == "05");
  CHECK(snap->resolve_site("Nordrhein-Westfalen").id == "05");
  CHECK_THROWS_MATCHES(snap->resolve_site("Bavaria"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::unknown_site;
                       }));
}

TEST_CASE("generated hierarchies satisfy the structural invariants", "[property]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.level_counts = {1, 3 + seed % 4, 7 + seed % 11, 20 + seed};
    spec.factors = 5;
    spec.missing_rate = 0.2;
    auto b = generate_synthetic(spec);
    REQUIRE(validate(b.levels, b.sites, b.factors, b.values, b.geometries).empty());
    auto snap = Snapshot::build(b, {});
    for (std::size_t i = 0; i < snap->site_count(); ++i) {
      // Every parent chain reaches level 0 in exactly `level` steps.
      std::size_t steps = 0;
      std::optional<Snapshot::Index> cur = i;
      while (snap->parent_of(*cur)) {
        CHECK(snap->site_at(*snap->parent_of(*cur)).level + 1 == snap->site_at(*cur).level);
        cur = snap->parent_of(*cur);
        ++steps;
      }
      CHECK(steps == static_cast<std::size_t>(snap->site_at(i).level));
      CHECK(snap->site_at(*cur).level == 0);
    }
  }
}
