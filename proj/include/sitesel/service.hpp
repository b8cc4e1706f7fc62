#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

// httplib listens with a backlog of 5 unless told otherwise; bursts of
// concurrent clients then see dropped connections.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif
#include "httplib.h"
#include "json.hpp"

#include "sitesel/hierarchy.hpp"
#include "sitesel/ingestion.hpp"
#include "sitesel/json_codec.hpp"
#include "sitesel/presentation.hpp"
#include "sitesel/query.hpp"
#include "sitesel/snapshot.hpp"

namespace sitesel::service {

using json::Json;

/// Holds the live snapshot. Readers take a reference-counted copy of the
/// pointer and keep it for the whole request; reload swaps the pointer
/// only after the replacement loaded and validated.
class SnapshotStore {
 public:
  explicit SnapshotStore(SnapshotPtr initial, std::filesystem::path source_path = {})
      : current_(std::move(initial)), source_path_(std::move(source_path)) {}

  SnapshotPtr current() const {
    std::lock_guard lock(ptr_mutex_);
    return current_;
  }

  struct ReloadOutcome {
    bool ok = false;
    std::string previous_stamp;
    std::string stamp;  ///< live stamp after the call
    std::optional<Error> error;
  };

  /// Concurrent reloads are serialized; the last successful one wins.
  ReloadOutcome reload(const std::filesystem::path& path) {
    std::lock_guard reload_lock(reload_mutex_);
    ReloadOutcome out;
    out.previous_stamp = current()->provenance().stamp;
    try {
      auto next = load_bundle(path.empty() ? source_path_ : path);
      {
        std::lock_guard lock(ptr_mutex_);
        current_ = std::move(next);
      }
      if (!path.empty()) source_path_ = path;
      out.ok = true;
    } catch (const Error& e) {
      out.error = e;
    }
    out.stamp = current()->provenance().stamp;
    return out;
  }

  /// Publishes an already built snapshot.
  void replace(SnapshotPtr next) {
    std::lock_guard reload_lock(reload_mutex_);
    std::lock_guard lock(ptr_mutex_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex ptr_mutex_;
  std::mutex reload_mutex_;
  SnapshotPtr current_;
  std::filesystem::path source_path_;
};

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::unknown_site:
    case ErrorCode::unknown_factor:
    case ErrorCode::unknown_level: return 404;
    case ErrorCode::bad_request:
    case ErrorCode::bad_predicate:
    case ErrorCode::parse_error: return 400;
    case ErrorCode::precondition_failed:
    case ErrorCode::validation_failed:
    case ErrorCode::io_error: return 422;
  }
  return 500;
}

namespace detail {

inline std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const auto j = path.find('/', i);
    const auto end = j == std::string_view::npos ? path.size() : j;
    if (end > i) out.emplace_back(path.substr(i, end - i));
    i = end;
  }
  return out;
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= s.size()) {
    const auto j = s.find(',', i);
    const auto end = j == std::string_view::npos ? s.size() : j;
    if (end > i) out.emplace_back(s.substr(i, end - i));
    if (j == std::string_view::npos) break;
    i = j + 1;
  }
  return out;
}

}  // namespace detail

/// Route table over one snapshot per request. Pure except for reload.
class Api {
 public:
  explicit Api(SnapshotStore& store) : store_(store) {}

  ApiResponse handle(const ApiRequest& req) const {
    const SnapshotPtr snap = store_.current();
    const std::string& stamp = snap->provenance().stamp;
    try {
      return dispatch(*snap, req);
    } catch (const Error& e) {
      return error_response(http_status(e.code()), std::string(to_string(e.code())), e.what(), stamp);
    } catch (const nlohmann::json::exception& e) {
      return error_response(400, "bad_request", e.what(), stamp);
    }
  }

 private:
  static ApiResponse error_response(int status, const std::string& code, const std::string& message,
                                    const std::string& stamp) {
    Json body{{"snapshot", stamp}, {"error", Json{{"code", code}, {"message", message}}}};
    return {status, body.dump(), "application/json"};
  }

  static ApiResponse ok(const Snapshot& snap, Json data) {
    Json body{{"snapshot", snap.provenance().stamp}, {"data", std::move(data)}};
    return {200, body.dump(), "application/json"};
  }

  static const std::string* param(const ApiRequest& req, const char* name) {
    auto it = req.query.find(name);
    return it == req.query.end() || it->second.empty() ? nullptr : &it->second;
  }

  static const std::string& required(const ApiRequest& req, const char* name) {
    if (const auto* p = param(req, name)) return *p;
    throw json::bad_request(std::string("missing query parameter '") + name + "'");
  }

  static TimePoint time_param(const Snapshot& snap, const ApiRequest& req, const char* name) {
    const auto* p = param(req, name);
    if (!p) return snap.default_time();
    auto t = parse_time_point(*p);
    if (!t) throw json::bad_request("invalid time '" + *p + "'");
    return *t;
  }

  static nlohmann::json body_json(const ApiRequest& req) {
    try {
      auto j = nlohmann::json::parse(req.body);
      if (!j.is_object()) throw json::bad_request("request body must be a JSON object");
      return j;
    } catch (const nlohmann::json::parse_error& e) {
      throw json::bad_request(std::string("malformed JSON body: ") + e.what());
    }
  }

  static TimePoint body_time(const Snapshot& snap, const nlohmann::json& j) {
    return j.contains("t") ? json::decode_time(j["t"]) : snap.default_time();
  }

  static std::string resolve(const Snapshot& snap, const std::string& ref) {
    return snap.resolve_site(ref).id;
  }

  static std::vector<std::string> resolve_all(const Snapshot& snap, const std::vector<std::string>& refs) {
    std::vector<std::string> out;
    for (const auto& r : refs) out.push_back(resolve(snap, r));
    return out;
  }

  static ApiResponse method_not_allowed(const Snapshot& snap) {
    return error_response(405, "method_not_allowed", "method not allowed", snap.provenance().stamp);
  }

  ApiResponse dispatch(const Snapshot& snap, const ApiRequest& req) const {
    const auto parts = detail::split_path(req.path);
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    auto not_found = [&] {
      return error_response(404, "not_found", "no route for " + req.path, snap.provenance().stamp);
    };
    if (parts.size() < 2 || parts[0] != "api") return not_found();
    const std::string& head = parts[1];

    if (head == "health" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      const auto& p = snap.provenance();
      return ok(snap, Json{{"status", "ok"},
                           {"source", p.source},
                           {"stamp", p.stamp},
                           {"loaded_at", p.loaded_at},
                           {"levels", snap.levels().size()},
                           {"sites", snap.site_count()},
                           {"factors", snap.factors().size()},
                           {"values", snap.value_count()},
                           {"warnings", snap.warnings()}});
    }
    if (head == "levels" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      Json arr = Json::array();
      for (const auto& l : snap.levels()) arr.push_back(json::encode(l));
      return ok(snap, std::move(arr));
    }
    if (head == "factors" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      Json arr = Json::array();
      for (const auto& f : snap.factors()) arr.push_back(json::encode(f));
      return ok(snap, std::move(arr));
    }
    if (head == "sites") {
      if (!get) return method_not_allowed(snap);
      return sites_route(snap, req, parts);
    }
    if (head == "geometries" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      const auto parent_id = resolve(snap, required(req, "parent"));
      Json fc{{"type", "FeatureCollection"}, {"snapshot", snap.provenance().stamp}};
      Json features = Json::array();
      for (const Site* c : children(snap, parent_id)) {
        const Geometry* g = snap.geometry(snap.site_index(c->id));
        if (!g) continue;
        features.push_back(Json{{"type", "Feature"},
                                {"properties", Json{{"site_id", c->id}, {"name", c->name}}},
                                {"geometry", json::encode(*g)}});
      }
      fc["features"] = std::move(features);
      return {200, fc.dump(), "application/geo+json"};
    }
    if (head == "series" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      const auto sites = resolve_all(snap, detail::split_list(required(req, "site")));
      TimeRange range;
      if (param(req, "from")) range.from = time_param(snap, req, "from");
      if (param(req, "to")) range.to = time_param(snap, req, "to");
      std::optional<double> reference;
      if (const auto* r = param(req, "reference")) {
        reference = parse_number(*r);
        if (!reference) throw json::bad_request("reference must be a number");
      }
      std::optional<std::string> highlight;
      if (const auto* h = param(req, "highlight")) highlight = resolve(snap, *h);
      return ok(snap, json::encode(build_series_view(snap, sites, required(req, "factor"), range,
                                                     reference, highlight)));
    }
    if (head == "what" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      const auto site = resolve(snap, required(req, "site"));
      const auto factors = detail::split_list(required(req, "factors"));
      LookupMode mode = LookupMode::exact;
      if (const auto* m = param(req, "mode")) {
        if (*m == "latest" || *m == "latest_at_or_before") mode = LookupMode::latest_at_or_before;
        else if (*m != "exact") throw json::bad_request("mode must be exact or latest_at_or_before");
      }
      const TimePoint t = time_param(snap, req, "t");
      return ok(snap, Json{{"site_id", site},
                           {"t", t.str()},
                           {"values", json::encode(lookup_what(snap, site, factors, t, mode))}});
    }
    if (head == "choropleth" && parts.size() == 2) {
      if (!get) return method_not_allowed(snap);
      const auto parent_id = resolve(snap, required(req, "parent"));
      const auto& factor = required(req, "factor");
      ClassScheme scheme = ClassScheme::quantile;
      if (const auto* s = param(req, "scheme")) {
        auto parsed = parse_class_scheme(*s);
        if (!parsed) throw json::bad_request("scheme must be quantile or equal_interval");
        scheme = *parsed;
      }
      int k = kDefaultClassCount;
      if (const auto* kk = param(req, "k")) {
        auto v = parse_number(*kk);
        if (!v || *v != std::floor(*v)) throw json::bad_request("k must be an integer");
        k = static_cast<int>(*v);
      }
      const TimePoint t = time_param(snap, req, "t");
      Json data = json::encode(build_choropleth(snap, parent_id, factor, t, scheme, k));
      data["statistics"] = json::encode(child_statistics(snap, parent_id, factor, t));
      return ok(snap, std::move(data));
    }
    if (head == "query" && parts.size() == 3 && (parts[2] == "where" || parts[2] == "when")) {
      if (!post) return method_not_allowed(snap);
      const auto body = body_json(req);
      if (parts[2] == "where") {
        auto q = json::decode_where(body, snap.default_time());
        if (q.scope) q.scope = resolve(snap, *q.scope);
        return ok(snap, Json{{"t", q.t.str()}, {"matches", json::encode(search_where(snap, q))}});
      }
      const auto site = resolve(snap, json::decode_string(body, "site"));
      const auto factor = json::decode_string(body, "factor");
      if (!body.contains("predicate")) throw json::bad_request("missing field 'predicate'");
      const auto pred = json::decode_predicate(body["predicate"]);
      return ok(snap, Json{{"site_id", site},
                           {"factor_id", factor},
                           {"intervals", json::encode(search_when(snap, site, factor, pred.condition))}});
    }
    if (head == "compare" && parts.size() == 2) {
      if (!post) return method_not_allowed(snap);
      const auto body = body_json(req);
      const auto sites = resolve_all(snap, json::decode_string_list(body, "sites"));
      const auto factors = json::decode_string_list(body, "factors");
      return ok(snap, json::encode(compare_sites(snap, sites, factors, body_time(snap, body))));
    }
    if (head == "checklist" && parts.size() == 2) {
      if (!post) return method_not_allowed(snap);
      const auto body = body_json(req);
      const auto sites = resolve_all(snap, json::decode_string_list(body, "sites"));
      if (!body.contains("criteria")) throw json::bad_request("missing field 'criteria'");
      const auto criteria = json::decode_criteria(body["criteria"]);
      return ok(snap, json::encode(checklist_score(snap, sites, criteria, body_time(snap, body))));
    }
    if (head == "insights" && parts.size() == 2) {
      if (!post) return method_not_allowed(snap);
      const auto body = body_json(req);
      const auto sites = resolve_all(snap, json::decode_string_list(body, "sites"));
      const auto factors = json::decode_string_list(body, "factors");
      const TimePoint t = body_time(snap, body);
      Json data = json::encode(build_insights(snap, sites, factors, t));
      data["table"] = json::encode(data_table(snap, sites, factors, t));
      return ok(snap, std::move(data));
    }
    if (head == "admin" && parts.size() == 3 && parts[2] == "reload") {
      if (!post) return method_not_allowed(snap);
      std::string path;
      if (!req.body.empty()) {
        const auto body = body_json(req);
        if (body.contains("path")) path = json::decode_string(body, "path");
      }
      const auto outcome = store_.reload(path);
      if (!outcome.ok) {
        const auto& e = *outcome.error;
        Json b{{"snapshot", outcome.stamp},
               {"error", Json{{"code", to_string(e.code())}, {"message", e.what()}}}};
        return {http_status(e.code()), b.dump(), "application/json"};
      }
      Json b{{"snapshot", outcome.stamp},
             {"data", Json{{"reloaded", true}, {"previous", outcome.previous_stamp}, {"stamp", outcome.stamp}}}};
      return {200, b.dump(), "application/json"};
    }
    return not_found();
  }

  ApiResponse sites_route(const Snapshot& snap, const ApiRequest& req,
                          const std::vector<std::string>& parts) const {
    if (parts.size() == 2) {
      const auto* level = param(req, "level");
      const auto* parent_ref = param(req, "parent");
      std::vector<const Site*> list;
      if (level) {
        std::optional<std::string> scope;
        if (parent_ref) scope = resolve(snap, *parent_ref);
        std::optional<std::string_view> sv;
        if (scope) sv = *scope;
        list = level_members(snap, *level, sv);
      } else if (parent_ref) {
        list = children(snap, resolve(snap, *parent_ref));
      } else {
        for (const auto& s : snap.sites()) list.push_back(&s);
      }
      return ok(snap, json::encode_sites(snap, list));
    }
    const auto id = resolve(snap, parts[2]);
    if (parts.size() == 3) return ok(snap, json::encode_site(snap, snap.site(id)));
    if (parts.size() == 4) {
      if (parts[3] == "children") return ok(snap, json::encode_sites(snap, children(snap, id)));
      if (parts[3] == "parent") {
        const Site* p = parent(snap, id);
        return ok(snap, p ? json::encode_site(snap, *p) : Json(nullptr));
      }
      if (parts[3] == "path") return ok(snap, json::encode_sites(snap, path_to_root(snap, id)));
    }
    return error_response(404, "not_found", "no route for " + req.path, snap.provenance().stamp);
  }

  SnapshotStore& store_;
};

/// HTTP/1.1 front end for Api. Optionally serves static UI assets at "/".
class Server {
 public:
  explicit Server(SnapshotStore& store, std::size_t threads = 64) : api_(store) {
    server_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      ApiRequest r;
      r.method = req.method;
      r.path = req.path;
      for (const auto& [k, v] : req.params) r.query[k] = v;
      r.body = req.body;
      const auto out = api_.handle(r);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    server_.Get(R"(/api/.*)", handler);
    server_.Post(R"(/api/.*)", handler);
  }

  ~Server() { stop(); }
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  bool mount_static(const std::string& dir) { return server_.set_mount_point("/", dir); }

  /// Binds host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
    return port_;
  }

  /// Blocks until stop().
  void run() { server_.listen_after_bind(); }

  void start_background() {
    thread_ = std::thread([this] { run(); });
    server_.wait_until_ready();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  Api api_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

/// Splits "host:port" (port required).
inline std::pair<std::string, int> parse_bind_address(std::string_view addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string_view::npos) throw json::bad_request("bind address must be host:port");
  auto port = parse_number(addr.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535 || *port != std::floor(*port))
    throw json::bad_request("invalid port in bind address");
  std::string host(addr.substr(0, colon));
  if (host.empty()) host = "0.0.0.0";
  return {host, static_cast<int>(*port)};
}

}  // namespace sitesel::service
