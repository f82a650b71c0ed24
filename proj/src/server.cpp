#include "keyhole/server.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include "keyhole/error.hpp"

namespace keyhole::server {

using codec::Json;

namespace {

constexpr const char* kJson = "application/json";

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Version: return 409;
    case ErrorCode::Corruption: return 422;
    default: return 400;
  }
}

void send_error(httplib::Response& res, const std::string& session, const Error& e) {
  gateway::Message m{gateway::MessageKind::Error, session, 0,
                     Json{{"code", std::string(to_string(e.code()))}, {"message", e.what()}}};
  res.status = http_status(e.code());
  res.set_content(gateway::to_wire(m), kJson);
}

// Raised for a session id the gateway does not hold; maps to 404.
struct UnknownSession : Error {
  explicit UnknownSession(const std::string& id) : Error(ErrorCode::Validation, "unknown session '" + id + "'") {}
};

Json parse_body(const httplib::Request& req) {
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::Validation, "request body must be a JSON object");
  return j;
}

std::string query_param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) throw Error(ErrorCode::Validation, std::string("missing query parameter '") + key + "'");
  return req.get_param_value(key);
}

std::uint64_t number_param(const httplib::Request& req, const char* key, std::uint64_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isdigit(c); }) ||
      text.size() > 18)
    throw Error(ErrorCode::Validation, std::string("query parameter '") + key + "' must be a non-negative integer");
  return std::stoull(text);
}

}  // namespace

struct Server::Impl {
  gateway::Gateway& gw;
  ServerOptions options;
  httplib::Server http;
  std::thread thread;
  int port = -1;

  Impl(gateway::Gateway& g, ServerOptions o) : gw(g), options(std::move(o)) { routes(); }

  // Runs a handler, mapping library errors onto HTTP statuses.
  template <class F>
  void guarded(httplib::Response& res, const std::string& session, F&& f) {
    try {
      f();
    } catch (const UnknownSession& e) {
      send_error(res, session, e);
      res.status = 404;
    } catch (const Error& e) {
      send_error(res, session, e);
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(gateway::to_wire({gateway::MessageKind::Error, session, 0,
                                        Json{{"code", "internal"}, {"message", e.what()}}}),
                      kJson);
    }
  }

  void require_session(const std::string& id) {
    if (!gw.has_session(id)) throw UnknownSession(id);
  }

  void routes() {
    http.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        Json body = parse_body(req);
        gateway::SessionOptions opts;
        if (body.contains("session_id")) opts.session_id = codec::get_string(body, "session_id");
        if (body.contains("view_mode")) {
          auto mode = session::parse_view_mode(codec::get_string(body, "view_mode"));
          if (!mode) throw Error(ErrorCode::Validation, "view_mode must be chat_only, rail or canvas");
          opts.view_mode = mode;
        }
        data::Dataset ds;
        if (body.contains("csv")) {
          ds = data::ingest_csv_text(codec::get_string(body, "csv"));
        } else if (body.contains("csv_path")) {
          if (!options.allow_csv_paths) throw Error(ErrorCode::Validation, "csv_path is disabled on this server");
          std::ifstream in(codec::get_string(body, "csv_path"));
          if (!in) throw Error(ErrorCode::Validation, "cannot open " + codec::get_string(body, "csv_path"));
          ds = data::ingest_csv(in);
        } else {
          throw Error(ErrorCode::Validation, "a session needs 'csv' or 'csv_path'");
        }
        std::string id;
        if (body.contains("snapshot"))
          id = gw.restore_snapshot(codec::get_string(body, "snapshot"), std::move(ds), opts);
        else if (body.contains("provenance"))
          id = gw.restore_provenance(store::read_provenance_text(codec::get_string(body, "provenance")), std::move(ds),
                                     opts);
        else
          id = gw.create_session(std::move(ds), opts);
        res.status = 201;
        res.set_content(Json{{"session_id", id}, {"state_view", gateway::encode(gw.state_view(id))}}.dump(), kJson);
      });
    });

    http.Post("/v1/message", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        auto msg = gateway::decode_message(parse_body(req));
        require_session(msg.session_id);
        auto reply = gw.handle(msg);
        res.set_content(gateway::to_wire(reply.reply), kJson);
      });
    });

    http.Get("/v1/push", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        const auto id = query_param(req, "session_id");
        require_session(id);
        const auto after = number_param(req, "after", 0);
        const auto wait = std::min<std::uint64_t>(number_param(req, "wait_ms", 0),
                                                  static_cast<std::uint64_t>(options.max_push_wait.count()));
        std::string out;
        for (const auto& m : gw.pushes(id, after, std::chrono::milliseconds(wait))) out += gateway::to_wire(m) + "\n";
        res.set_content(out, "application/x-ndjson");
      });
    });

    http.Get("/v1/telemetry", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        const auto id = query_param(req, "session_id");
        require_session(id);
        auto reply = gw.handle({gateway::MessageKind::TelemetryView, id, 0, Json::object()});
        res.set_content(gateway::to_wire(reply.reply), kJson);
      });
    });

    http.Get("/v1/snapshot", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        const auto id = query_param(req, "session_id");
        require_session(id);
        res.set_content(gw.snapshot(id), "text/plain");
      });
    });

    http.Get("/v1/provenance", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, "", [&] {
        const auto id = query_param(req, "session_id");
        require_session(id);
        res.set_content(store::provenance_text(gw.provenance(id)), "text/plain");
      });
    });

    http.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(Json{{"v", std::string(gateway::kProtocolVersion)}, {"sessions", gw.session_ids().size()}}.dump(),
                      kJson);
    });
  }
};

Server::Server(gateway::Gateway& gw, ServerOptions options) : impl_(std::make_unique<Impl>(gw, std::move(options))) {}

Server::~Server() { stop(); }

int Server::bind() {
  if (impl_->port >= 0) return impl_->port;
  const auto& o = impl_->options;
  if (o.port < 0 || o.port > 65535) throw Error(ErrorCode::Validation, "port must be in [0, 65535]");
  int port = o.port == 0 ? impl_->http.bind_to_any_port(o.host)
                         : (impl_->http.bind_to_port(o.host, o.port) ? o.port : -1);
  if (port < 0) throw Error(ErrorCode::Validation, "cannot bind " + o.host + ":" + std::to_string(o.port));
  impl_->port = port;
  return port;
}

void Server::run() {
  bind();
  impl_->http.listen_after_bind();
}

int Server::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  return port;
}

void Server::stop() {
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace keyhole::server
