#include "catch_amalgamated.hpp"

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sitesel/ingestion.hpp"
#include "sitesel/query.hpp"
#include "sitesel/synthetic.hpp"

using namespace sitesel;
using testing_support::kT0;

namespace {

ErrorCode error_code(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::io_error;
}

std::vector<std::string> match_ids(const std::vector<SiteMatch>& ms) {
  std::vector<std::string> out;
  for (const auto& m : ms) out.push_back(m.site_id);
  return out;
}

std::vector<std::string> row_ids(const ChecklistTable& t) {
  std::vector<std::string> out;
  for (const auto& r : t.rows) out.push_back(r.site_id);
  return out;
}

std::vector<ChecklistCriterion> table2_criteria() {
  std::vector<ChecklistCriterion> out;
  for (const char* f : {"resources", "income_structure", "consumer_structure", "infrastructure", "taxes"})
    out.push_back({f, 1, 2, 1, Direction::higher_is_better});
  return out;
}

SyntheticSpec random_spec(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SyntheticSpec spec;
  spec.seed = seed;
  spec.level_counts = {1, 1 + rng() % 5, 3 + rng() % 20, 10 + rng() % 60};
  spec.factors = 1 + rng() % 10;
  spec.timepoints = 1 + rng() % 24;
  spec.missing_rate = static_cast<double>(rng() % 40) / 100.0;
  return spec;
}

WhereQuery random_query(const Bundle& b, std::mt19937_64& rng) {
  WhereQuery q;
  q.level = b.levels[1 + rng() % (b.levels.size() - 1)].name;
  q.t = TimePoint::from_ordinal(b.default_time.ordinal() + static_cast<int>(rng() % 3));
  if (rng() % 2) q.scope = "L0-00000";
  if (rng() % 3 == 0) q.scope = "L1-00000";
  const auto& fs = b.factors;
  const std::size_t np = rng() % 3;
  for (std::size_t i = 0; i < np; ++i) {
    const auto& f = fs[rng() % fs.size()];
    Predicate p{f.id, {}};
    p.condition.op = static_cast<CompareOp>(rng() % 6);
    const double scale = f.aggregation == Aggregation::sum ? 20000 : 1000;
    p.condition.low = std::floor(static_cast<double>(rng() % 1000) / 1000.0 * scale);
    p.condition.high = p.condition.low + std::floor(static_cast<double>(rng() % 1000) / 1000.0 * scale);
    q.predicates.push_back(p);
  }
  const std::size_t nr = rng() % 3;
  for (std::size_t i = 0; i < nr; ++i) q.rank_by.push_back({fs[rng() % fs.size()].id, rng() % 2 == 0});
  if (rng() % 4 == 0) q.limit = 1 + rng() % 5;
  return q;
}

}  // namespace

TEST_CASE("predicate mini-grammar") {
  auto p = parse_predicate("population > 10000");
  CHECK(p.factor_id == "population");
  CHECK(p.condition.op == CompareOp::gt);
  CHECK(p.condition.low == 10000);
  CHECK(parse_predicate("supermarket_count<=0").condition.op == CompareOp::le);
  auto b = parse_predicate("income_per_household between 100 200");
  CHECK(b.condition.op == CompareOp::between);
  CHECK(b.condition.high == 200);
  auto bare = parse_predicate("< 7");
  CHECK(bare.factor_id.empty());
  CHECK(bare.condition.low == 7);
  for (const char* bad : {"population >", "population ~ 3", "population between 5 1", "population > nan",
                          "", "population > 1,5"}) {
    CAPTURE(bad);
    CHECK(error_code([&] { parse_predicate(bad); }) == ErrorCode::bad_predicate);
  }
}

TEST_CASE("conditions use inclusive between") {
  Condition c{CompareOp::between, 1, 2};
  CHECK(c.test(1));
  CHECK(c.test(2));
  CHECK_FALSE(c.test(2.0000001));
  CHECK(Condition{CompareOp::eq, 6.9, 0}.test(6.9));
}

TEST_CASE("what: factor values of a site at a time") {
  auto snap = testing_support::case_study();
  auto r = lookup_what(*snap, "05754", {"income_per_household"}, kT0, LookupMode::exact);
  REQUIRE(r.size() == 1);
  CHECK(r[0].value.value == 18102);
  CHECK(r[0].at == kT0);

  CHECK(lookup_what(*snap, "05978", {"population"}, kT0, LookupMode::exact)[0].value.value == 416679);

  SECTION("exact mode misses other times") {
    auto miss = lookup_what(*snap, "05978", {"population"}, TimePoint{2016, 6}, LookupMode::exact);
    CHECK_FALSE(miss[0].value.value);
    CHECK_FALSE(miss[0].at);
  }
  SECTION("latest mode falls back to the newest earlier time") {
    auto hit = lookup_what(*snap, "05978", {"population"}, TimePoint{2016, 6}, LookupMode::latest_at_or_before);
    CHECK(hit[0].value.value == 416679);
    CHECK(hit[0].at == kT0);
    auto none = lookup_what(*snap, "05978", {"population"}, TimePoint{2015, 6}, LookupMode::latest_at_or_before);
    CHECK_FALSE(none[0].value.value);
  }
  SECTION("latest mode aggregates inner sites") {
    auto hc = lookup_what(*snap, "05754008", {"population"}, TimePoint{2017, 3}, LookupMode::latest_at_or_before);
    CHECK(hc[0].value.value == 15969);
  }
  SECTION("unknown ids") {
    CHECK(error_code([&] { lookup_what(*snap, "x", {"population"}, kT0, LookupMode::exact); }) ==
          ErrorCode::unknown_site);
    CHECK(error_code([&] { lookup_what(*snap, "05", {"x"}, kT0, LookupMode::exact); }) ==
          ErrorCode::unknown_factor);
  }
}

TEST_CASE("where: counties of NRW ranked by population") {
  auto snap = testing_support::case_study();
  WhereQuery q{"county", "05", kT0, {}, {{"population", true}}, {}};
  auto ms = search_where(*snap, q);
  CHECK(match_ids(ms) == std::vector<std::string>{"05978", "05754", "05974", "05558"});
  CHECK(ms[0].find("population")->value == 416679);
  CHECK(ms[0].rank == 1);
  CHECK(ms[3].rank == 4);

  q.rank_by[0].descending = false;
  CHECK(match_ids(search_where(*snap, q)).front() == "05558");
  q.limit = 2;
  CHECK(search_where(*snap, q).size() == 2);
}

TEST_CASE("where: district screening under Guetersloh") {
  auto snap = testing_support::case_study();
  WhereQuery q{"district", "05754", kT0,
               {parse_predicate("population > 10000"), parse_predicate("income_per_household > 50000"),
                parse_predicate("supermarket_count <= 0")},
               {},
               {}};
  auto ms = search_where(*snap, q);
  REQUIRE(match_ids(ms) == std::vector<std::string>{"05754008"});
  CHECK(ms[0].find("population")->value == 15969);
  CHECK(ms[0].find("income_per_household")->value == 53310);
  CHECK(ms[0].find("supermarket_count")->value == 0);

  SECTION("absent values fail a predicate") {
    // Rheda-Wiedenbrueck and Verl have no income value.
    q.predicates = {parse_predicate("income_per_household >= 0")};
    CHECK(match_ids(search_where(*snap, q)) == std::vector<std::string>{"05754008"});
  }
  SECTION("nothing matches an extreme threshold") {
    q.predicates = {parse_predicate("population > 1e9")};
    CHECK(search_where(*snap, q).empty());
  }
  SECTION("errors") {
    q.level = "planet";
    CHECK(error_code([&] { search_where(*snap, q); }) == ErrorCode::unknown_level);
    q.level = "district";
    q.predicates = {parse_predicate("nothing > 1")};
    CHECK(error_code([&] { search_where(*snap, q); }) == ErrorCode::unknown_factor);
    q.predicates = {Predicate{"population", Condition{CompareOp::between, 5, 1}}};
    CHECK(error_code([&] { search_where(*snap, q); }) == ErrorCode::bad_predicate);
  }
}

TEST_CASE("when: intervals where Hamburg's unemployment rate is below 7") {
  auto snap = testing_support::case_study();
  auto iv = search_when(*snap, "02", "unemployment_rate", Condition{CompareOp::lt, 7, 0});
  REQUIRE(iv.size() == 1);
  CHECK(iv[0].first == TimePoint{2016, 6});
  CHECK(iv[0].last == TimePoint{2016, 6});
  CHECK(iv[0].str() == "2016-06..2016-06");

  auto all = search_when(*snap, "02", "unemployment_rate", Condition{CompareOp::lt, 100, 0});
  REQUIRE(all.size() == 1);
  CHECK(all[0].first == TimePoint{2016, 5});
  CHECK(all[0].last == TimePoint{2016, 7});

  CHECK(search_when(*snap, "05", "unemployment_rate", Condition{CompareOp::lt, 100, 0}).empty());
  CHECK(search_when(*snap, "02", "unemployment_rate", Condition{CompareOp::gt, 100, 0}).empty());
  auto split = search_when(*snap, "02", "unemployment_rate", Condition{CompareOp::gt, 7, 0});
  CHECK(split.size() == 2);
}

TEST_CASE("compare: Unna and Guetersloh") {
  auto snap = testing_support::case_study();
  auto c = compare_sites(*snap, {"05978", "05754"}, {"population", "income_per_household"}, kT0);
  CHECK(c.cells[0][0].value == 416679);
  CHECK(c.cells[1][1].value == 18102);
  CHECK(c.rankings[0] == std::vector<std::string>{"05978", "05754"});
  CHECK(c.rankings[1] == std::vector<std::string>{"05754", "05978"});
  CHECK(c.warnings.empty());

  SECTION("lower is better ranks ascending") {
    auto d = compare_sites(*snap, {"05754028", "05754044", "05754008"}, {"supermarket_count"}, kT0);
    CHECK(d.rankings[0] == std::vector<std::string>{"05754008", "05754044", "05754028"});
  }
  SECTION("absent values are left out of the ranking") {
    auto d = compare_sites(*snap, {"05558", "05754"}, {"income_per_household"}, kT0);
    CHECK(d.rankings[0] == std::vector<std::string>{"05754"});
    CHECK_FALSE(d.cells[0][0].value);
  }
  SECTION("mixed levels warn") {
    CHECK(compare_sites(*snap, {"05", "05754"}, {"population"}, kT0).warnings.size() == 1);
  }
  SECTION("one site is not a comparison") {
    CHECK(error_code([&] { compare_sites(*snap, {"05754"}, {"population"}, kT0); }) ==
          ErrorCode::precondition_failed);
  }
}

TEST_CASE("checklist: Table 2 locations") {
  auto snap = testing_support::table2();
  auto t = checklist_score(*snap, {"L1", "L2", "L3"}, table2_criteria(), kT0);
  REQUIRE(row_ids(t) == std::vector<std::string>{"L3", "L1", "L2"});
  CHECK(t.rows[0].total == 3);
  CHECK(t.rows[1].total == 2);
  CHECK(t.rows[2].total == 1);
  std::string l1;
  for (const auto& c : t.rows[1].cells) l1 += rating_symbol(c.rating);
  CHECK(l1 == "++-+o");

  SECTION("criteria are validated") {
    auto bad = table2_criteria();
    bad[0].weight = 0;
    CHECK(error_code([&] { checklist_score(*snap, {"L1"}, bad, kT0); }) == ErrorCode::precondition_failed);
    bad = table2_criteria();
    bad[0].plus_threshold = 0;
    CHECK(error_code([&] { checklist_score(*snap, {"L1"}, bad, kT0); }) == ErrorCode::precondition_failed);
    CHECK(error_code([&] { checklist_score(*snap, {"L1"}, {}, kT0); }) == ErrorCode::precondition_failed);
  }
  SECTION("missing values rate minus and are flagged") {
    auto m = checklist_score(*snap, {"L1"}, table2_criteria(), TimePoint{1999, 1});
    CHECK(m.rows[0].total == -5);
    for (const auto& c : m.rows[0].cells) CHECK(c.missing);
  }
  SECTION("lower is better mirrors the thresholds") {
    ChecklistCriterion c{"x", 1, 1, 5, Direction::lower_is_better};
    CHECK(c.rate(0) == Rating::plus);
    CHECK(c.rate(3) == Rating::neutral);
    CHECK(c.rate(6) == Rating::minus);
  }
  SECTION("scaling every weight scales totals and keeps the ranking", "[property]") {
    for (double k : {0.5, 2.0, 10.0, 1e6}) {
      auto scaled = table2_criteria();
      for (auto& c : scaled) c.weight *= k;
      auto s = checklist_score(*snap, {"L1", "L2", "L3"}, scaled, kT0);
      CHECK(row_ids(s) == row_ids(t));
      for (std::size_t i = 0; i < s.rows.size(); ++i) CHECK(s.rows[i].total == Catch::Approx(k * t.rows[i].total));
    }
  }
}

TEST_CASE("where agrees with the brute-force oracle", "[property]") {
  std::mt19937_64 rng(12345);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto b = generate_synthetic(random_spec(seed));
    auto snap = snapshot_from_bundle(b);
    for (int qi = 0; qi < 5; ++qi) {
      auto q = random_query(b, rng);
      CAPTURE(seed, qi, q.level, q.predicates.size(), q.rank_by.size());
      CHECK(match_ids(search_where(*snap, q)) == oracle::search_where(b, q));
    }
  }
}

TEST_CASE("when agrees with the brute-force oracle", "[property]") {
  std::mt19937_64 rng(99);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto spec = random_spec(seed);
    spec.timepoints = 24;
    auto b = generate_synthetic(spec);
    auto snap = snapshot_from_bundle(b);
    for (int qi = 0; qi < 10; ++qi) {
      const auto& s = b.sites[rng() % b.sites.size()];
      const auto& f = b.factors[rng() % b.factors.size()];
      Condition c{static_cast<CompareOp>(rng() % 6), static_cast<double>(rng() % 1000), 0};
      c.high = c.low + static_cast<double>(rng() % 1000);
      auto got = search_when(*snap, s.id, f.id, c);
      auto want = oracle::search_when(b, s.id, f.id, c);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].first == want[i].first);
        CHECK(got[i].last == want[i].second);
      }
      // Intervals are disjoint, ordered and separated by at least one failing point.
      for (std::size_t i = 1; i < got.size(); ++i) CHECK(got[i - 1].last < got[i].first);
    }
  }
}

TEST_CASE("where properties: monotone predicates, stable ranking, agreement with compare", "[property]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto spec = random_spec(seed);
    spec.factors = std::max<std::size_t>(spec.factors, 2);
    auto b = generate_synthetic(spec);
    auto snap = snapshot_from_bundle(b);
    const std::string lvl = b.levels.back().name;

    // Adding a predicate never adds matches.
    WhereQuery loose{lvl, {}, b.default_time, {parse_predicate("f0 >= 2000")}, {}, {}};
    WhereQuery tight = loose;
    tight.predicates.push_back(parse_predicate("f1 <= 500"));
    auto l = match_ids(search_where(*snap, loose));
    auto t = match_ids(search_where(*snap, tight));
    std::sort(l.begin(), l.end());
    std::sort(t.begin(), t.end());
    CHECK(std::includes(l.begin(), l.end(), t.begin(), t.end()));

    // The input order of the bundle does not change the result.
    Bundle shuffled = b;
    std::mt19937_64 rng(seed);
    std::shuffle(shuffled.sites.begin(), shuffled.sites.end(), rng);
    std::shuffle(shuffled.values.begin(), shuffled.values.end(), rng);
    auto snap2 = snapshot_from_bundle(shuffled);
    WhereQuery ranked{lvl, {}, b.default_time, {}, {{"f0", true}, {"f1", false}}, {}};
    CHECK(match_ids(search_where(*snap, ranked)) == match_ids(search_where(*snap2, ranked)));

    // Ranking by one factor matches compare_sites over the same sites.
    WhereQuery single{lvl, "L1-00000", b.default_time, {parse_predicate("f0 >= 0")}, {{"f0", true}}, {}};
    auto ms = match_ids(search_where(*snap, single));
    if (ms.size() >= 2) CHECK(compare_sites(*snap, ms, {"f0"}, b.default_time).rankings[0] == ms);
  }
}
