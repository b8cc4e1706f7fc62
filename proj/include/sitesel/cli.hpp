#pragma once

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sitesel/hierarchy.hpp"
#include "sitesel/ingestion.hpp"
#include "sitesel/json_codec.hpp"
#include "sitesel/presentation.hpp"
#include "sitesel/query.hpp"
#include "sitesel/service.hpp"
#include "sitesel/synthetic.hpp"

namespace sitesel::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

namespace detail {

inline std::vector<std::string> split_csv_arg(const std::string& s) {
  return service::detail::split_list(s);
}

inline TimePoint time_arg(const Snapshot& snap, const std::string& s) {
  if (s.empty()) return snap.default_time();
  auto t = parse_time_point(s);
  if (!t) throw Error(ErrorCode::bad_request, "invalid time '" + s + "' (expected YYYY or YYYY-MM)");
  return *t;
}

inline std::string cell(const AggregatedValue& a) {
  return a.value ? format_number(*a.value) : std::string();
}

/// Space-padded text table.
inline void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (widths.size() <= i) widths.push_back(0);
      widths[i] = std::max(widths[i], r[i].size());
    }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      line += r[i];
      if (i + 1 < r.size()) line += std::string(widths[i] - r[i].size(), ' ');
    }
    out << line << "\n";
  }
}

inline void emit(std::ostream& out, const std::string& format,
                 const std::vector<std::vector<std::string>>& rows, const json::Json& as_json) {
  if (format == "json") {
    out << as_json.dump(2) << "\n";
  } else if (format == "csv") {
    for (const auto& r : rows) out << csv::join_row(r);
  } else {
    print_table(out, rows);
  }
}

}  // namespace detail

inline constexpr const char* kPredicateHelp =
    "Predicate: \"factor op number\" with op one of < <= = >= >, or "
    "\"factor between low high\" (inclusive). The factor may be omitted for 'when'.";

/// Entry point. Returns 0 on success, 1 on usage errors, 2 on data errors.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Explore geo-referenced location factors over an administrative hierarchy."};
  app.name("sitesel");
  app.require_subcommand(1);
  const std::vector<std::string> formats{"table", "csv", "json"};

  std::string bundle;

  auto* validate = app.add_subcommand("validate", "Load and validate a bundle");
  validate->add_option("bundle", bundle, "Bundle directory or manifest")->required();

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string bind = "127.0.0.1:8080", static_dir;
  serve->add_option("bundle", bundle)->required();
  serve->add_option("--bind", bind, "host:port (port 0 picks a free one)");
  serve->add_option("--static", static_dir, "Directory with UI assets served at /");

  auto* where = app.add_subcommand("where", "Find sites fulfilling predicates (when + what -> where)");
  std::string level, scope, t_arg, format = "table";
  std::vector<std::string> predicates, rank_by;
  std::size_t limit = 0;
  where->add_option("bundle", bundle)->required();
  where->add_option("--level", level, "Level name, e.g. county")->required();
  where->add_option("--scope", scope, "Ancestor site id or name");
  where->add_option("--t", t_arg, "Time point YYYY or YYYY-MM (default: bundle default)");
  where->add_option("--predicate", predicates, kPredicateHelp);
  where->add_option("--rank-by", rank_by, "factor:asc|desc (repeatable)");
  where->add_option("--limit", limit, "Maximum number of matches (0 = all)");
  where->add_option("--format", format)->check(CLI::IsMember(formats));

  auto* when = app.add_subcommand("when", "Time intervals where a predicate holds (where + what -> when)");
  std::string site, factor, predicate;
  when->add_option("bundle", bundle)->required();
  when->add_option("--site", site)->required();
  when->add_option("--factor", factor)->required();
  when->add_option("--predicate", predicate, kPredicateHelp)->required();
  when->add_option("--format", format)->check(CLI::IsMember(formats));

  auto* what = app.add_subcommand("what", "Factor values of a site (when + where -> what)");
  std::string factors_arg, mode = "exact";
  what->add_option("bundle", bundle)->required();
  what->add_option("--site", site)->required();
  what->add_option("--factors", factors_arg, "Comma-separated factor ids")->required();
  what->add_option("--t", t_arg);
  what->add_option("--mode", mode)->check(CLI::IsMember({"exact", "latest"}));
  what->add_option("--format", format)->check(CLI::IsMember(formats));

  auto* checklist = app.add_subcommand("checklist", "Score sites with a weighted +/o/- checklist");
  std::string criteria_path, sites_arg;
  checklist->add_option("bundle", bundle)->required();
  checklist->add_option("--criteria", criteria_path, "JSON array of criteria")->required();
  checklist->add_option("--sites", sites_arg, "Comma-separated site ids or names")->required();
  checklist->add_option("--t", t_arg);
  checklist->add_option("--format", format)->check(CLI::IsMember(formats));

  auto* choropleth = app.add_subcommand("choropleth", "Export a choropleth of a site's children as SVG");
  std::string parent_arg, out_path, scheme_arg = "quantile", size_arg = "800x600";
  int k = kDefaultClassCount;
  choropleth->add_option("bundle", bundle)->required();
  choropleth->add_option("--parent", parent_arg)->required();
  choropleth->add_option("--factor", factor)->required();
  choropleth->add_option("--t", t_arg);
  choropleth->add_option("--scheme", scheme_arg)->check(CLI::IsMember({"quantile", "equal_interval"}));
  choropleth->add_option("--k", k)->check(CLI::Range(2, 9));
  choropleth->add_option("--size", size_arg, "WIDTHxHEIGHT");
  choropleth->add_option("--out", out_path)->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic bundle");
  SyntheticSpec spec;
  std::string levels_arg = "1,2,4";
  synth->add_option("--seed", spec.seed);
  synth->add_option("--levels", levels_arg, "Sites per level, root first");
  synth->add_option("--factors", spec.factors)->check(CLI::PositiveNumber);
  synth->add_option("--timepoints", spec.timepoints)->check(CLI::PositiveNumber);
  synth->add_option("--missing", spec.missing_rate)->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", out_path)->required();

  auto* exporter = app.add_subcommand("export", "Re-serialize a bundle in canonical form");
  exporter->add_option("bundle", bundle)->required();
  exporter->add_option("--out", out_path)->required();

  std::vector<std::string> argv_store{"sitesel"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n" << kPredicateHelp << "\nRun with --help for usage.\n";
    return kUsage;
  }

  try {
    if (*validate) {
      try {
        auto snap = load_bundle(bundle);
        for (const auto& w : snap->warnings()) err << "warning: " << w << "\n";
        out << "ok: " << snap->site_count() << " sites, " << snap->factors().size() << " factors, "
            << snap->value_count() << " values (stamp " << snap->provenance().stamp << ")\n";
        return kOk;
      } catch (const ValidationError& e) {
        err << e.report().summary();
        return kDataError;
      }
    }

    if (*synth) {
      spec.level_counts.clear();
      for (const auto& c : detail::split_csv_arg(levels_arg)) {
        auto v = parse_number(c);
        if (!v || *v < 1 || *v != std::floor(*v)) {
          err << "error: --levels expects positive integers\n";
          return kUsage;
        }
        spec.level_counts.push_back(static_cast<std::size_t>(*v));
      }
      write_bundle(generate_synthetic(spec), out_path);
      out << "wrote " << out_path << "\n";
      return kOk;
    }

    const auto snap = load_bundle(bundle);

    if (*exporter) {
      export_snapshot(*snap, out_path);
      out << "wrote " << out_path << "\n";
      return kOk;
    }

    if (*serve) {
      const auto [host, port] = service::parse_bind_address(bind);
      service::SnapshotStore store(snap, bundle);
      service::Server server(store);
      if (!static_dir.empty() && !server.mount_static(static_dir)) {
        err << "error: cannot serve static directory '" << static_dir << "'\n";
        return kDataError;
      }
      const int bound = server.bind(host, port);
      err << "listening on " << host << ":" << bound << "\n";
      server.run();
      return kOk;
    }

    if (*where) {
      WhereQuery q;
      q.level = level;
      if (!scope.empty()) q.scope = snap->resolve_site(scope).id;
      q.t = detail::time_arg(*snap, t_arg);
      for (const auto& p : predicates) {
        auto pred = parse_predicate(p);
        if (pred.factor_id.empty())
          throw Error(ErrorCode::bad_predicate, "predicate '" + p + "' needs a factor");
        q.predicates.push_back(std::move(pred));
      }
      for (const auto& r : rank_by) {
        RankKey key;
        const auto colon = r.rfind(':');
        key.factor_id = r.substr(0, colon);
        if (colon != std::string::npos) {
          const auto order = r.substr(colon + 1);
          if (order != "asc" && order != "desc") {
            err << "error: --rank-by expects factor:asc or factor:desc\n";
            return kUsage;
          }
          key.descending = order == "desc";
        }
        q.rank_by.push_back(std::move(key));
      }
      if (limit > 0) q.limit = limit;
      const auto matches = search_where(*snap, q);

      std::vector<std::vector<std::string>> rows;
      std::vector<std::string> header{"site"};
      if (!matches.empty())
        for (const auto& v : matches.front().values) header.push_back(v.factor_id);
      else {
        for (const auto& p : q.predicates) header.push_back(p.factor_id);
        for (const auto& r : q.rank_by) header.push_back(r.factor_id);
      }
      if (format == "table") header.insert(header.begin(), {"rank", "id"});
      rows.push_back(header);
      for (const auto& m : matches) {
        std::vector<std::string> row;
        if (format == "table") {
          row.push_back(std::to_string(m.rank));
          row.push_back(m.site_id);
        }
        row.push_back(m.site_name);
        for (const auto& v : m.values) row.push_back(detail::cell(v.value));
        rows.push_back(std::move(row));
      }
      detail::emit(out, format, rows, json::Json{{"t", q.t.str()}, {"matches", json::encode(matches)}});
      return kOk;
    }

    if (*when) {
      const auto& s = snap->resolve_site(site);
      const auto pred = parse_predicate(predicate);
      if (!pred.factor_id.empty() && pred.factor_id != factor)
        throw Error(ErrorCode::bad_predicate, "predicate factor differs from --factor");
      const auto intervals = search_when(*snap, s.id, factor, pred.condition);
      if (format == "json") {
        out << json::encode(intervals).dump(2) << "\n";
      } else if (format == "csv") {
        out << "from,to\n";
        for (const auto& i : intervals) out << i.first.str() << "," << i.last.str() << "\n";
      } else {
        for (const auto& i : intervals) out << i.str() << "\n";
      }
      return kOk;
    }

    if (*what) {
      const auto& s = snap->resolve_site(site);
      const auto t = detail::time_arg(*snap, t_arg);
      const auto readings = lookup_what(*snap, s.id, detail::split_csv_arg(factors_arg), t,
                                        mode == "latest" ? LookupMode::latest_at_or_before
                                                         : LookupMode::exact);
      std::vector<std::vector<std::string>> rows{{"factor", "value", "t", "coverage"}};
      for (const auto& r : readings)
        rows.push_back({r.factor_id, detail::cell(r.value), r.at ? r.at->str() : "",
                        format_number(r.value.coverage)});
      detail::emit(out, format, rows, json::encode(readings));
      return kOk;
    }

    if (*checklist) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(::sitesel::detail::read_file(criteria_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(criteria_path, 0, e.what());
      }
      const auto criteria = json::decode_criteria(doc.is_object() && doc.contains("criteria") ? doc["criteria"] : doc);
      std::vector<std::string> ids;
      for (const auto& ref : detail::split_csv_arg(sites_arg)) ids.push_back(snap->resolve_site(ref).id);
      const auto table = checklist_score(*snap, ids, criteria, detail::time_arg(*snap, t_arg));
      std::vector<std::vector<std::string>> rows;
      std::vector<std::string> header{"rank", "site"};
      for (const auto& c : criteria) header.push_back(c.factor_id);
      header.push_back("total");
      rows.push_back(header);
      for (const auto& r : table.rows) {
        std::vector<std::string> row{std::to_string(r.rank), r.site_id};
        for (const auto& c : r.cells) row.push_back(std::string(1, rating_symbol(c.rating)));
        row.push_back(format_number(r.total));
        rows.push_back(std::move(row));
      }
      detail::emit(out, format, rows, json::encode(table));
      return kOk;
    }

    if (*choropleth) {
      int w = 0, h = 0;
      if (std::sscanf(size_arg.c_str(), "%dx%d", &w, &h) != 2 || w <= 0 || h <= 0) {
        err << "error: --size expects WIDTHxHEIGHT\n";
        return kUsage;
      }
      const auto& parent_site = snap->resolve_site(parent_arg);
      const auto layer = build_choropleth(*snap, parent_site.id, factor, detail::time_arg(*snap, t_arg),
                                          *parse_class_scheme(scheme_arg), k);
      const auto svg = render_choropleth_svg(layer, w, h);
      std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
      if (!f) throw Error(ErrorCode::io_error, "cannot write '" + out_path + "'");
      f << svg;
      for (const auto& e : layer.entries)
        if (!e.geometry) err << "warning: no geometry for site '" << e.site_id << "'\n";
      out << "wrote " << out_path << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace sitesel::cli
