#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sitesel/csv.hpp"
#include "sitesel/domain.hpp"
#include "sitesel/error.hpp"
#include "sitesel/number_format.hpp"
#include "sitesel/snapshot.hpp"

namespace sitesel {

inline constexpr int kBundleFormatVersion = 1;

/// Parsed manifest. Paths are relative to the manifest's directory.
struct BundleManifest {
  int format_version = kBundleFormatVersion;
  std::string source;
  std::vector<AdminLevel> levels;
  std::string sites_path;
  std::string factors_path;
  std::vector<std::string> series_paths;
  std::string geometry_path;  ///< empty = no geometries
  TimePoint default_time{};
};

namespace detail {

inline void require_columns(const csv::Table& table, std::string_view file,
                            std::initializer_list<std::string_view> names) {
  for (auto n : names)
    if (!table.column(n))
      throw parse_error(file, 1, "missing required column '" + std::string(n) + "'");
}

inline void check_width(const csv::Table& table, const csv::Row& row, std::string_view file) {
  if (row.fields.size() != table.header.size())
    throw parse_error(file, row.line,
                      "malformed row: expected " + std::to_string(table.header.size()) +
                          " columns, got " + std::to_string(row.fields.size()));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// Columns: id, name, level, parent_id (+ optional short_name). The level
/// column holds a level name or its ordinal. Empty parent_id marks a root.
inline std::vector<Site> parse_sites_table(const csv::Table& table,
                                           const std::vector<AdminLevel>& levels,
                                           std::string_view file = "sites") {
  detail::require_columns(table, file, {"id", "name", "level", "parent_id"});
  const auto c_id = *table.column("id"), c_name = *table.column("name"),
             c_level = *table.column("level"), c_parent = *table.column("parent_id");
  const auto c_short = table.column("short_name");

  std::vector<Site> sites;
  sites.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    detail::check_width(table, row, file);
    Site s;
    s.id = row.fields[c_id];
    s.name = row.fields[c_name];
    if (s.id.empty()) throw parse_error(file, row.line, "empty site id");
    const auto& level = row.fields[c_level];
    auto it = std::find_if(levels.begin(), levels.end(),
                           [&](const AdminLevel& l) { return l.name == level; });
    if (it != levels.end()) {
      s.level = it->ordinal;
    } else if (auto n = parse_number(level);
               n && *n == std::floor(*n) && *n >= 0 && *n < static_cast<double>(levels.size())) {
      s.level = static_cast<int>(*n);
    } else {
      throw parse_error(file, row.line, "unknown level '" + level + "'");
    }
    if (!row.fields[c_parent].empty()) s.parent_id = row.fields[c_parent];
    if (c_short) s.short_name = row.fields[*c_short];
    sites.push_back(std::move(s));
  }
  return sites;
}

/// Columns: id, name, category, unit, kind, aggregation, direction.
/// aggregation is sum | mean | none | weighted_mean(<weight factor id>).
inline std::vector<FactorDefinition> parse_factor_catalog(const csv::Table& table,
                                                          std::string_view file = "factors") {
  detail::require_columns(table, file,
                          {"id", "name", "category", "unit", "kind", "aggregation", "direction"});
  auto col = [&](std::string_view n) { return *table.column(n); };
  std::vector<FactorDefinition> out;
  for (const auto& row : table.rows) {
    detail::check_width(table, row, file);
    FactorDefinition f;
    f.id = row.fields[col("id")];
    if (f.id.empty()) throw parse_error(file, row.line, "empty factor id");
    f.name = row.fields[col("name")];
    f.unit = row.fields[col("unit")];

    auto cat = parse_category(row.fields[col("category")]);
    if (!cat) throw parse_error(file, row.line, "unknown category '" + row.fields[col("category")] + "'");
    f.category = *cat;

    const auto& kind = row.fields[col("kind")];
    if (kind == "hard") f.kind = FactorKind::hard;
    else if (kind == "soft") f.kind = FactorKind::soft;
    else throw parse_error(file, row.line, "unknown kind '" + kind + "'");

    std::string agg = row.fields[col("aggregation")];
    if (agg == "sum") f.aggregation = Aggregation::sum;
    else if (agg == "mean") f.aggregation = Aggregation::mean;
    else if (agg == "none" || agg.empty()) f.aggregation = Aggregation::none;
    else if (agg.rfind("weighted_mean(", 0) == 0 && agg.back() == ')') {
      f.aggregation = Aggregation::weighted_mean;
      f.weight_factor = agg.substr(14, agg.size() - 15);
      if (f.weight_factor.empty()) throw parse_error(file, row.line, "weighted_mean without weight");
    } else {
      throw parse_error(file, row.line, "unknown aggregation '" + agg + "'");
    }

    auto dir = parse_direction(row.fields[col("direction")]);
    if (!dir) throw parse_error(file, row.line, "unknown direction '" + row.fields[col("direction")] + "'");
    f.direction = *dir;
    out.push_back(std::move(f));
  }
  return out;
}

/// Long format: one observation per row with columns site_id, factor_id,
/// t (YYYY or YYYY-MM), value.
inline std::vector<FactorValue> parse_series_table(const csv::Table& table,
                                                   std::string_view file = "series") {
  detail::require_columns(table, file, {"site_id", "factor_id", "t", "value"});
  const auto c_site = *table.column("site_id"), c_factor = *table.column("factor_id"),
             c_t = *table.column("t"), c_value = *table.column("value");

  struct Key {
    std::string site, factor;
    TimePoint t;
    auto operator<=>(const Key&) const = default;
  };
  std::set<Key> seen;
  std::vector<FactorValue> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    detail::check_width(table, row, file);
    FactorValue v;
    v.site_id = row.fields[c_site];
    v.factor_id = row.fields[c_factor];
    TimeParseError why{};
    auto t = parse_time_point(row.fields[c_t], &why);
    if (!t)
      throw parse_error(file, row.line,
                        why == TimeParseError::invalid_month
                            ? "invalid month '" + row.fields[c_t] + "'"
                            : "unparsable time '" + row.fields[c_t] + "'");
    v.t = *t;
    auto value = parse_number(row.fields[c_value]);
    if (!value)
      throw parse_error(file, row.line, "non-finite or unparsable value '" + row.fields[c_value] + "'");
    v.value = *value;
    if (!seen.insert(Key{v.site_id, v.factor_id, v.t}).second)
      throw parse_error(file, row.line,
                        "duplicate observation (" + v.site_id + ", " + v.factor_id + ", " +
                            v.t.str() + ")");
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometries
// ---------------------------------------------------------------------------

struct GeometryParseResult {
  std::map<std::string, Geometry> geometries;
  std::vector<std::string> warnings;
};

namespace detail {

inline Ring parse_ring(const nlohmann::json& j, std::string_view file) {
  if (!j.is_array()) throw parse_error(file, 0, "ring is not an array");
  Ring ring;
  for (const auto& pos : j) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number())
      throw parse_error(file, 0, "invalid position");
    ring.push_back({pos[0].get<double>(), pos[1].get<double>()});
  }
  return ring;
}

inline Polygon parse_polygon(const nlohmann::json& j, std::string_view file) {
  if (!j.is_array()) throw parse_error(file, 0, "polygon is not an array");
  Polygon p;
  for (const auto& r : j) p.rings.push_back(parse_ring(r, file));
  return p;
}

}  // namespace detail

/// Reads a GeoJSON FeatureCollection whose features carry a "site_id"
/// property. Features naming a site outside known_ids are skipped with a
/// warning (pass an empty set to accept every id).
inline GeometryParseResult parse_geometries(const nlohmann::json& doc,
                                            const std::set<std::string>& known_ids = {},
                                            std::string_view file = "geometries") {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
      !doc.contains("features") || !doc["features"].is_array())
    throw parse_error(file, 0, "expected a GeoJSON FeatureCollection");

  GeometryParseResult out;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    const std::string where = "feature " + std::to_string(index++);
    const auto props = feature.find("properties");
    if (props == feature.end() || !props->is_object() || !props->contains("site_id"))
      throw parse_error(file, 0, where + ": missing site_id property");
    const auto& sid = (*props)["site_id"];
    std::string site_id;
    if (sid.is_string()) site_id = sid.get<std::string>();
    else if (sid.is_number_integer()) site_id = std::to_string(sid.get<long long>());
    else throw parse_error(file, 0, where + ": site_id must be a string");

    const auto geom = feature.find("geometry");
    if (geom == feature.end() || !geom->is_object())
      throw parse_error(file, 0, where + ": missing geometry");
    const std::string type = geom->value("type", "");
    Geometry g;
    if (type == "Polygon") {
      g.polygons.push_back(detail::parse_polygon(geom->at("coordinates"), file));
    } else if (type == "MultiPolygon") {
      g.multi = true;
      for (const auto& p : geom->at("coordinates"))
        g.polygons.push_back(detail::parse_polygon(p, file));
    } else {
      throw parse_error(file, 0, where + ": unsupported geometry type '" + type + "'");
    }

    if (!known_ids.empty() && !known_ids.count(site_id)) {
      out.warnings.push_back("geometry for unknown site '" + site_id + "' ignored");
      continue;
    }
    if (auto d = geometry_defect(g); !d.empty())
      throw parse_error(file, 0, where + " (" + site_id + "): " + d);
    if (!out.geometries.emplace(site_id, std::move(g)).second)
      throw parse_error(file, 0, where + ": duplicate geometry for site '" + site_id + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest and bundle loading
// ---------------------------------------------------------------------------

inline BundleManifest parse_manifest(const nlohmann::json& j, std::string_view file = "manifest") {
  BundleManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kBundleFormatVersion)
      throw parse_error(file, 0, "unsupported format_version " + std::to_string(m.format_version));
    m.source = j.value("source", "");
    int ord = 0;
    for (const auto& l : j.at("levels")) m.levels.push_back({ord++, l.get<std::string>()});
    if (m.levels.empty()) throw parse_error(file, 0, "manifest declares no levels");
    m.sites_path = j.at("sites").get<std::string>();
    m.factors_path = j.at("factors").get<std::string>();
    const auto& series = j.at("series");
    if (series.is_string()) m.series_paths.push_back(series.get<std::string>());
    else
      for (const auto& s : series) m.series_paths.push_back(s.get<std::string>());
    m.geometry_path = j.value("geometries", "");
    TimeParseError why{};
    auto t = parse_time_point(j.at("default_time").get<std::string>(), &why);
    if (!t) throw parse_error(file, 0, "invalid default_time");
    m.default_time = *t;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(file, 0, std::string("invalid manifest: ") + e.what());
  }
  return m;
}

/// Builds a snapshot from an in-memory bundle; the stamp hashes its
/// canonical serialization.
SnapshotPtr snapshot_from_bundle(Bundle bundle);

/// Loads manifest.json (or the manifest file given directly), all referenced
/// tables and geometries, validates, and returns the indexed snapshot.
inline SnapshotPtr load_bundle(const std::filesystem::path& manifest_location) {
  namespace fs = std::filesystem;
  fs::path manifest_path = manifest_location;
  if (fs::is_directory(manifest_path)) manifest_path /= "manifest.json";
  const fs::path dir = manifest_path.parent_path();

  ContentHash hash;
  const std::string manifest_text = detail::read_file(manifest_path);
  hash.update(manifest_text);
  nlohmann::json manifest_json;
  try {
    manifest_json = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw parse_error(manifest_path.string(), 0, e.what());
  }
  const BundleManifest m = parse_manifest(manifest_json, manifest_path.string());

  // Fail fast on any missing file before parsing anything.
  std::vector<std::string> paths = {m.sites_path, m.factors_path};
  paths.insert(paths.end(), m.series_paths.begin(), m.series_paths.end());
  if (!m.geometry_path.empty()) paths.push_back(m.geometry_path);
  for (const auto& p : paths)
    if (!fs::exists(dir / p))
      throw Error(ErrorCode::io_error, "missing bundle file '" + (dir / p).string() + "'");

  Bundle b;
  b.format_version = m.format_version;
  b.source = m.source.empty() ? manifest_path.string() : m.source;
  b.levels = m.levels;
  b.default_time = m.default_time;

  auto load_table = [&](const std::string& rel) {
    const auto path = (dir / rel).string();
    const std::string text = detail::read_file(path);
    hash.update(text);
    return std::pair{csv::parse(text, path), path};
  };

  {
    auto [t, path] = load_table(m.sites_path);
    b.sites = parse_sites_table(t, b.levels, path);
  }
  {
    auto [t, path] = load_table(m.factors_path);
    b.factors = parse_factor_catalog(t, path);
  }
  for (const auto& s : m.series_paths) {
    auto [t, path] = load_table(s);
    auto values = parse_series_table(t, path);
    b.values.insert(b.values.end(), std::make_move_iterator(values.begin()),
                    std::make_move_iterator(values.end()));
  }
  if (!m.geometry_path.empty()) {
    const auto path = (dir / m.geometry_path).string();
    const std::string text = detail::read_file(path);
    hash.update(text);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw parse_error(path, 0, e.what());
    }
    std::set<std::string> ids;
    for (const auto& s : b.sites) ids.insert(s.id);
    auto geo = parse_geometries(doc, ids, path);
    b.geometries = std::move(geo.geometries);
    b.warnings = std::move(geo.warnings);
  }

  return Snapshot::build(std::move(b), Provenance{m.source.empty() ? manifest_path.string() : m.source,
                                                  hash.hex(), detail::utc_now_iso()});
}

// ---------------------------------------------------------------------------
// Serialization (export)
// ---------------------------------------------------------------------------

struct BundleFile {
  std::string name;
  std::string content;
  bool operator==(const BundleFile&) const = default;
};

inline nlohmann::ordered_json geometry_to_geojson(const Geometry& g) {
  auto ring_json = [](const Ring& r) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : r) arr.push_back({p.lon, p.lat});
    return arr;
  };
  auto poly_json = [&](const Polygon& p) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : p.rings) arr.push_back(ring_json(r));
    return arr;
  };
  nlohmann::ordered_json j;
  if (g.multi || g.polygons.size() != 1) {
    j["type"] = "MultiPolygon";
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : g.polygons) arr.push_back(poly_json(p));
    j["coordinates"] = std::move(arr);
  } else {
    j["type"] = "Polygon";
    j["coordinates"] = poly_json(g.polygons.front());
  }
  return j;
}

/// Canonical, deterministic file set for a bundle: manifest.json,
/// sites.csv, factors.csv, series.csv and (if any) geometries.geojson.
inline std::vector<BundleFile> serialize_bundle(const Bundle& b) {
  std::vector<BundleFile> files;

  nlohmann::ordered_json manifest;
  manifest["format_version"] = b.format_version;
  manifest["source"] = b.source;
  auto levels = nlohmann::ordered_json::array();
  for (const auto& l : b.levels) levels.push_back(l.name);
  manifest["levels"] = std::move(levels);
  manifest["default_time"] = b.default_time.str();
  manifest["sites"] = "sites.csv";
  manifest["factors"] = "factors.csv";
  manifest["series"] = nlohmann::ordered_json::array({"series.csv"});
  if (!b.geometries.empty()) manifest["geometries"] = "geometries.geojson";
  files.push_back({"manifest.json", manifest.dump(2) + "\n"});

  auto sites = b.sites;
  std::sort(sites.begin(), sites.end(), [](const Site& a, const Site& x) { return a.id < x.id; });
  std::string text = csv::join_row({"id", "name", "level", "parent_id", "short_name"});
  for (const auto& s : sites)
    text += csv::join_row({s.id, s.name, b.levels.at(static_cast<std::size_t>(s.level)).name,
                           s.parent_id.value_or(""), s.short_name});
  files.push_back({"sites.csv", std::move(text)});

  text = csv::join_row({"id", "name", "category", "unit", "kind", "aggregation", "direction"});
  for (const auto& f : b.factors)
    text += csv::join_row({f.id, f.name, std::string(to_string(f.category)), f.unit,
                           std::string(to_string(f.kind)), aggregation_text(f),
                           std::string(to_string(f.direction))});
  files.push_back({"factors.csv", std::move(text)});

  auto values = b.values;
  std::sort(values.begin(), values.end(), [](const FactorValue& a, const FactorValue& x) {
    if (a.site_id != x.site_id) return a.site_id < x.site_id;
    if (a.factor_id != x.factor_id) return a.factor_id < x.factor_id;
    return a.t < x.t;
  });
  text = csv::join_row({"site_id", "factor_id", "t", "value"});
  for (const auto& v : values)
    text += csv::join_row({v.site_id, v.factor_id, v.t.str(), format_number(v.value)});
  files.push_back({"series.csv", std::move(text)});

  if (!b.geometries.empty()) {
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    auto features = nlohmann::ordered_json::array();
    for (const auto& [id, g] : b.geometries) {
      nlohmann::ordered_json f;
      f["type"] = "Feature";
      f["properties"] = {{"site_id", id}};
      f["geometry"] = geometry_to_geojson(g);
      features.push_back(std::move(f));
    }
    fc["features"] = std::move(features);
    files.push_back({"geometries.geojson", fc.dump() + "\n"});
  }
  return files;
}

inline void write_bundle(const Bundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : serialize_bundle(b)) {
    std::ofstream out(dir / f.name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + (dir / f.name).string() + "'");
    out << f.content;
  }
}

/// Writes a loadable bundle reproducing the snapshot's content.
inline void export_snapshot(const Snapshot& snap, const std::filesystem::path& dir) {
  write_bundle(snap.bundle(), dir);
}

inline SnapshotPtr snapshot_from_bundle(Bundle bundle) {
  ContentHash hash;
  for (const auto& f : serialize_bundle(bundle)) hash.update(f.content);
  std::string source = bundle.source.empty() ? "in-memory" : bundle.source;
  return Snapshot::build(std::move(bundle),
                         Provenance{std::move(source), hash.hex(), detail::utc_now_iso()});
}

}  // namespace sitesel
