#include <doctest.h>

#include <httplib.h>

#include "keyhole/server.hpp"
#include "keyhole/store.hpp"

using namespace keyhole;
using codec::Json;

namespace {

const char* kCsv =
    "region,product,revenue,date\n"
    "EU,widget,100,2024-01-05\n"
    "EU,gadget,150,2024-01-20\n"
    "US,widget,200,2024-02-03\n";

Json message(const std::string& kind, const std::string& session, std::uint64_t seq, Json payload) {
  return Json{{"v", "v1"}, {"kind", kind}, {"session_id", session}, {"seq", seq}, {"payload", std::move(payload)}};
}

struct Running {
  gateway::Gateway gw;
  server::Server srv{gw, {"127.0.0.1", 0}};
  int port = srv.start();
  httplib::Client client{"127.0.0.1", port};

  httplib::Result post(const std::string& path, const Json& body) {
    return client.Post(path, body.dump(), "application/json");
  }
};

}  // namespace

TEST_CASE("HTTP session lifecycle") {
  Running s;

  auto created = s.post("/v1/sessions", {{"session_id", "web"}, {"csv", kCsv}, {"view_mode", "rail"}});
  REQUIRE(created);
  CHECK(created->status == 201);
  Json body = Json::parse(created->body);
  CHECK(body["session_id"] == "web");
  CHECK(body["state_view"]["view_mode"] == "rail");

  auto reply = s.post("/v1/message", message("Utterance", "web", 1, {{"text", "filter region = EU"}}));
  REQUIRE(reply);
  CHECK(reply->status == 200);
  Json ack = Json::parse(reply->body);
  CHECK(ack["kind"] == "Ack");
  CHECK(ack["seq"] == 1);
  CHECK(ack["payload"]["status"] == "applied");

  auto pushed = s.client.Get("/v1/push?session_id=web&after=0");
  REQUIRE(pushed);
  CHECK(pushed->status == 200);
  std::vector<Json> lines;
  std::istringstream in(pushed->body);
  for (std::string line; std::getline(in, line);) lines.push_back(Json::parse(line));
  REQUIRE(lines.size() >= 1);
  CHECK(lines[0]["kind"] == "StateView");
  CHECK(lines[0]["payload"]["rail"].size() == 1);

  auto none = s.client.Get("/v1/push?session_id=web&after=" + std::to_string(lines.size()));
  REQUIRE(none);
  CHECK(none->body.empty());

  auto tel = s.client.Get("/v1/telemetry?session_id=web");
  REQUIRE(tel);
  CHECK(Json::parse(tel->body)["payload"]["points"].size() == 2);

  auto snap = s.client.Get("/v1/snapshot?session_id=web");
  REQUIRE(snap);
  CHECK(store::read_snapshot_text(snap->body).state_hash == s.gw.state("web").state_hash);

  auto prov = s.client.Get("/v1/provenance?session_id=web");
  REQUIRE(prov);
  CHECK(store::read_provenance_text(prov->body).log.size() == 1);

  // Restoring from the snapshot under a fresh gateway-side id is refused
  // because the id is part of the hashed state.
  auto dup = s.post("/v1/sessions", {{"csv", kCsv}, {"snapshot", snap->body}});
  REQUIRE(dup);
  CHECK(dup->status == 400);

  auto health = s.client.Get("/v1/health");
  REQUIRE(health);
  CHECK(Json::parse(health->body)["sessions"] == 1);
}

TEST_CASE("HTTP error mapping") {
  Running s;
  s.post("/v1/sessions", {{"session_id", "a"}, {"csv", kCsv}});

  auto bad_json = s.client.Post("/v1/message", "{", "application/json");
  REQUIRE(bad_json);
  CHECK(bad_json->status == 400);
  CHECK(Json::parse(bad_json->body)["kind"] == "Error");

  auto version = s.post("/v1/message", Json{{"v", "v9"}, {"kind", "Utterance"}, {"session_id", "a"}, {"seq", 1}});
  REQUIRE(version);
  CHECK(version->status == 409);
  CHECK(Json::parse(version->body)["payload"]["code"] == "version");

  auto ghost = s.post("/v1/message", message("Utterance", "ghost", 1, {{"text", "summarize"}}));
  REQUIRE(ghost);
  CHECK(ghost->status == 404);

  auto unparseable = s.post("/v1/message", message("Utterance", "a", 2, {{"text", "qqqqqqqqqqqq"}}));
  REQUIRE(unparseable);
  CHECK(unparseable->status == 200);
  CHECK(Json::parse(unparseable->body)["payload"]["code"] == "unparseable");

  auto no_data = s.post("/v1/sessions", Json::object());
  REQUIRE(no_data);
  CHECK(no_data->status == 400);

  auto bad_after = s.client.Get("/v1/push?session_id=a&after=x");
  REQUIRE(bad_after);
  CHECK(bad_after->status == 400);

  auto missing = s.client.Get("/v1/telemetry");
  REQUIRE(missing);
  CHECK(missing->status == 400);
}

TEST_CASE("long poll returns when a push arrives") {
  Running s;
  s.post("/v1/sessions", {{"session_id", "p"}, {"csv", kCsv}});
  std::thread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    s.gw.handle_utterance("p", "filter region = US");
  });
  httplib::Client poller("127.0.0.1", s.port);
  poller.set_read_timeout(10, 0);
  auto res = poller.Get("/v1/push?session_id=p&after=0&wait_ms=5000");
  writer.join();
  REQUIRE(res);
  CHECK(res->body.find("StateView") != std::string::npos);
}
