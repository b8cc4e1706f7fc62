#include "catch_amalgamated.hpp"

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "sitesel/cli.hpp"

using testing_support::fixture_dir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = sitesel::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("validate") {
  auto ok = run({"validate", fixture_dir("case_study").string()});
  CHECK(ok.code == 0);
  CHECK_THAT(ok.out, Catch::Matchers::ContainsSubstring("13 sites"));

  auto bad = run({"validate", fixture_dir("broken_bundle").string()});
  CHECK(bad.code == 2);
  CHECK_THAT(bad.err, Catch::Matchers::ContainsSubstring("unresolved parent"));
  CHECK_THAT(bad.err, Catch::Matchers::ContainsSubstring("05754"));

  CHECK(run({"validate", "/nonexistent"}).code == 2);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run({}).code == 1);
  CHECK(run({"where", fixture_dir("case_study").string()}).code == 1);  // --level missing
  CHECK(run({"validate", fixture_dir("case_study").string(), "--bogus"}).code == 1);
  CHECK(run({"choropleth", fixture_dir("case_study").string(), "--parent", "05", "--factor", "population", "--k",
             "12", "--out", "x.svg"})
            .code == 1);
}

TEST_CASE("where prints ranked rows") {
  auto r = run({"where", fixture_dir("case_study").string(), "--level", "county", "--scope", "NRW", "--t", "2016",
                "--rank-by", "population:desc", "--format", "csv"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK(header == "site,population");
  CHECK(first == "Unna,416679");

  auto screening = run({"where", fixture_dir("case_study").string(), "--level", "district", "--scope", "05754",
                        "--predicate", "population > 10000", "--predicate", "income_per_household > 50000",
                        "--predicate", "supermarket_count <= 0", "--format", "json"});
  REQUIRE(screening.code == 0);
  auto j = nlohmann::json::parse(screening.out)["matches"];
  REQUIRE(j.size() == 1);
  CHECK(j[0]["site_id"] == "05754008");

  CHECK(run({"where", fixture_dir("case_study").string(), "--level", "county", "--predicate", "x ~ 1"}).code == 2);
}

TEST_CASE("when prints intervals") {
  auto r = run({"when", fixture_dir("case_study").string(), "--site", "HH", "--factor", "unemployment_rate",
                "--predicate", "< 7"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "2016-06..2016-06\n");
}

TEST_CASE("what prints values") {
  auto r = run({"what", fixture_dir("case_study").string(), "--site", "05754", "--factors",
                "income_per_household", "--format", "json"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j[0]["value"] == 18102);
  CHECK(run({"what", fixture_dir("case_study").string(), "--site", "nowhere", "--factors", "population"}).code == 2);
}

TEST_CASE("checklist ranks the Table 2 locations") {
  auto r = run({"checklist", fixture_dir("table2").string(), "--criteria",
                (fixture_dir("table2") / "criteria.json").string(), "--sites", "L1,L2,L3", "--format", "csv"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string header, first;
  std::getline(lines, header);
  std::getline(lines, first);
  CHECK_THAT(first, Catch::Matchers::StartsWith("1,L3"));
  CHECK_THAT(first, Catch::Matchers::EndsWith(",3"));
}

TEST_CASE("choropleth writes an SVG") {
  const auto dir = testing_support::scratch_dir("cli_svg");
  auto r = run({"choropleth", fixture_dir("case_study").string(), "--parent", "NRW", "--factor", "population",
                "--k", "2", "--out", (dir / "map.svg").string()});
  REQUIRE(r.code == 0);
  const auto svg = read(dir / "map.svg");
  CHECK_THAT(svg, Catch::Matchers::ContainsSubstring("<svg"));
  CHECK_THAT(svg, Catch::Matchers::ContainsSubstring("site-05978"));
}

TEST_CASE("synth and export produce loadable, deterministic bundles") {
  const auto dir = testing_support::scratch_dir("cli_synth");
  REQUIRE(run({"synth", "--seed", "3", "--levels", "1,3,9", "--factors", "3", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"synth", "--seed", "3", "--levels", "1,3,9", "--factors", "3", "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"manifest.json", "sites.csv", "factors.csv", "series.csv", "geometries.geojson"})
    CHECK(read(dir / "a" / f) == read(dir / "b" / f));
  CHECK(run({"validate", (dir / "a").string()}).code == 0);

  REQUIRE(run({"export", fixture_dir("case_study").string(), "--out", (dir / "c").string()}).code == 0);
  auto v = run({"validate", (dir / "c").string()});
  CHECK(v.code == 0);
  CHECK_THAT(v.out, Catch::Matchers::ContainsSubstring("13 sites"));
}
