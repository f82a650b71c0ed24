#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include "keyhole/error.hpp"
#include "keyhole/gateway.hpp"
#include "keyhole/store.hpp"
#include "fixtures.hpp"
#include "session_gen.hpp"

using namespace keyhole;
using namespace keyhole::gateway;
using codec::Json;

namespace {

std::int64_t fixed_clock() { return 1'700'000'000'000; }

struct Fixture {
  Gateway gw{config::Config{}, fixed_clock};
  std::string id;

  explicit Fixture(data::Dataset ds = fixtures::sales(), session::ViewMode mode = session::ViewMode::Canvas) {
    id = gw.create_session(std::move(ds), {std::nullopt, mode});
  }

  Reply say(std::string_view text, UtteranceOptions o = {}) { return gw.handle_utterance(id, text, o); }
  Reply direct(session::DeltaPayload p) {
    session::StateDelta d;
    d.payload = std::move(p);
    return gw.handle_delta(id, d);
  }
};

std::size_t count_kind(const std::vector<Message>& ms, MessageKind k) {
  return static_cast<std::size_t>(std::count_if(ms.begin(), ms.end(), [&](const Message& m) { return m.kind == k; }));
}

session::Card chart(std::string id, double x = 0, double y = 0) {
  session::Card c;
  c.id = std::move(id);
  c.kind = session::CardKind::Chart;
  c.position = {x, y};
  c.size = {200, 150};
  return c;
}

std::string status(const Reply& r) { return r.reply.payload.value("status", ""); }

}  // namespace

TEST_CASE("wire messages round-trip and check the version") {
  Message m{MessageKind::Utterance, "s1", 7, Json{{"text", "filter region = EU"}}};
  const std::string wire = to_wire(m);
  CHECK(wire == R"({"kind":"Utterance","payload":{"text":"filter region = EU"},"seq":7,"session_id":"s1","v":"v1"})");
  Message back = from_wire(wire);
  CHECK(back.kind == m.kind);
  CHECK(back.session_id == "s1");
  CHECK(back.seq == 7);
  CHECK(back.payload == m.payload);

  for (auto k : {MessageKind::Utterance, MessageKind::Delta, MessageKind::SelectionQuestion, MessageKind::StateView,
                 MessageKind::TelemetryView, MessageKind::CardView, MessageKind::Error, MessageKind::Ack})
    CHECK(parse_message_kind(to_string(k)) == k);

  try {
    from_wire(R"({"v":"v2","kind":"Ack","session_id":"s","seq":1,"payload":{}})");
    FAIL("version accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Version);
    CHECK(std::string(e.what()).find("v1") != std::string::npos);
  }
  CHECK_THROWS_AS(from_wire("{"), Error);
  CHECK_THROWS_AS(from_wire(R"({"v":"v1","kind":"Shout","session_id":"s","seq":1})"), Error);
  CHECK_THROWS_AS(from_wire(R"({"v":"v1","kind":"Ack","session_id":"s","seq":-1})"), Error);
}

TEST_CASE("exact filter utterance updates the rail") {
  Fixture f;
  const auto before = f.gw.state(f.id).state_hash;
  auto r = f.say("filter region = EU");
  REQUIRE(r.reply.kind == MessageKind::Ack);
  CHECK(status(r) == "applied");
  CHECK(r.reply.payload["command"] == "filter region = EU");
  CHECK(r.reply.payload["tier"] == "silent");
  CHECK(count_kind(r.pushed, MessageKind::StateView) == 1);
  CHECK(r.pushed.front().kind == MessageKind::StateView);

  const auto& view = r.pushed.front().payload;
  CHECK(view["state_hash"] != before);
  CHECK(view["state_hash"] == f.gw.state(f.id).state_hash);
  REQUIRE(view["rail"].size() == 1);
  CHECK(view["rail"][0]["label"] == "region = EU");
  CHECK(view["rail"][0]["removable"] == true);
  CHECK(view["rail"][0]["origin"] == "chat");
  CHECK(view["overload"].contains("o"));

  const auto log = f.gw.provenance(f.id).log;
  REQUIRE(log.size() == 1);
  CHECK(log[0].delta.origin == session::Origin::Chat);
  CHECK(log[0].delta.annotation == "filter region = EU");
}

TEST_CASE("fuzzy column match is applied as inferred") {
  Fixture f;
  auto r = f.say("filter regoin = EU");
  CHECK(status(r) == "applied");
  CHECK(r.reply.payload["tier"] == "inferred");
  const auto view = f.gw.state_view(f.id);
  REQUIRE(view.rail.size() == 1);
  CHECK(view.rail[0].confidence == doctest::Approx(6.0 / 7.0));
  CHECK(view.rail[0].tier == intent::Tier::Inferred);
}

TEST_CASE("low-confidence utterances never mutate") {
  Fixture f;
  f.say("filter product = widget");
  const auto hash = f.gw.state(f.id).state_hash;
  const auto pushes = f.gw.pushes(f.id, 0).size();

  auto r = f.say("filter xxxxxn = EU");
  CHECK(status(r) == "needs_confirmation");
  CHECK(r.reply.payload["confidence"].get<double>() < 0.6);
  CHECK(r.reply.payload["command"] == "filter region = EU");
  CHECK(r.pushed.empty());
  CHECK(f.gw.state(f.id).state_hash == hash);
  CHECK(f.gw.provenance(f.id).log.size() == 1);
  CHECK(f.gw.pushes(f.id, 0).size() == pushes);

  // Resending the echoed command is the confirmation.
  auto ok = f.say(r.reply.payload["command"].get<std::string>());
  CHECK(status(ok) == "applied");

  auto bad = f.say("qqqqqqqqqqqq");
  CHECK(bad.reply.kind == MessageKind::Error);
  CHECK(bad.reply.payload["code"] == "unparseable");
  CHECK(bad.reply.payload.contains("alternatives"));
  const auto un = f.gw.unapplied(f.id);
  REQUIRE(un.size() == 2);
  CHECK(un[0].outcome == "needs_confirmation");
  CHECK(un[1].outcome == "unparseable");
  CHECK(un[1].text == "qqqqqqqqqqqq");
}

TEST_CASE("one StateView per mutating message") {
  Fixture f;
  std::size_t mutating = 0;
  auto run = [&](const Reply& r) {
    const bool mutated = status(r) == "applied";
    mutating += mutated;
    REQUIRE(count_kind(r.pushed, MessageKind::StateView) == (mutated ? 1u : 0u));
  };
  run(f.say("filter region = EU"));
  run(f.say("show sum revenue by product"));
  run(f.say("break down by product"));
  run(f.say("summarize"));
  run(f.say("zoom in"));
  run(f.say("zoom in"));
  run(f.say("zoom in"));  // clamped at rows
  run(f.say("remove filter 1"));
  run(f.say("remove filter 1"));  // nothing left: error
  run(f.say("compare EU vs US"));
  run(f.direct(session::delta::AddCard{chart("x")}));
  run(f.direct(session::delta::MoveCard{"x", {10, 10}}));
  run(f.direct(session::delta::RemoveCard{"missing"}));
  CHECK(mutating == 9);

  const auto pushes = f.gw.pushes(f.id, 0);
  CHECK(count_kind(pushes, MessageKind::StateView) == mutating);
  for (std::size_t i = 0; i < pushes.size(); ++i) CHECK(pushes[i].seq == i + 1);

  const auto tel = f.gw.telemetry(f.id);
  CHECK(tel.size() == f.gw.provenance(f.id).log.size() + 1);
  for (std::size_t i = 0; i < tel.size(); ++i) CHECK(tel[i].seq == i);
}

TEST_CASE("fresh session telemetry") {
  Fixture f;
  const auto tel = f.gw.telemetry(f.id);
  REQUIRE(tel.size() == 1);
  CHECK(tel[0].seq == 0);
  CHECK(tel[0].report.m == 0);
  CHECK(tel[0].report.o == 0);
  CHECK(tel[0].report.p_error == 0);

  auto r = f.gw.handle({MessageKind::TelemetryView, f.id, 3, Json::object()});
  CHECK(r.reply.kind == MessageKind::TelemetryView);
  CHECK(r.reply.seq == 3);
  CHECK(r.reply.payload["points"].size() == 1);
}

TEST_CASE("eight-item session telemetry matches the published comparison") {
  using namespace session::delta;
  for (auto [mode, expected] : {std::pair{session::ViewMode::ChatOnly, 3.0}, std::pair{session::ViewMode::Rail, 0.0},
                                std::pair{session::ViewMode::Canvas, 0.0}}) {
    Fixture f(fixtures::sales(), mode);
    for (auto u : {"filter region = EU", "filter product != gizmo", "filter revenue between 10 and 500",
                   "filter date between 2024-01-01 and 2024-12-31"})
      REQUIRE(status(f.say(u)) == "applied");
    for (int i = 0; i < 4; ++i) f.direct(AddCard{chart("v" + std::to_string(i), 210.0 * i, 0)});
    session::Card h = chart("h1", 0, 200);
    h.kind = session::CardKind::Hypothesis;
    f.direct(AddCard{h});
    const auto tel = f.gw.telemetry(f.id);
    CHECK(tel.back().report.m == 8);
    CHECK(tel.back().report.o == expected);
    CHECK(tel.size() == 10);
  }
}

TEST_CASE("mise en place through an utterance") {
  Fixture f(fixtures::churn());
  auto r = f.say("analyze churn");
  REQUIRE(status(r) == "applied");
  const auto state = f.gw.state(f.id);
  CHECK(state.cards.size() <= 4);
  CHECK(state.cards.size() >= 1);
  CHECK(state.active_filters.size() <= 3);
  CHECK(count_kind(r.pushed, MessageKind::StateView) == 1);
  CHECK(count_kind(r.pushed, MessageKind::CardView) == state.cards.size());
  for (const auto& rec : f.gw.provenance(f.id).log) CHECK(rec.delta.origin == session::Origin::System);

  // The trend card carries its ghost-layer markers in the view.
  const auto view = f.gw.state_view(f.id);
  bool any_markers = false;
  for (const auto& c : view.cards) {
    if (!c.card.highlight_anomalies) CHECK(c.markers.empty());
    any_markers = any_markers || !c.markers.empty();
  }
  CHECK(any_markers);

  auto none = f.say("analyze zebra");
  CHECK(status(none) == "answered");
  CHECK(none.pushed.empty());
}

TEST_CASE("direct deltas") {
  using namespace session::delta;
  Fixture f;
  f.direct(AddCard{chart("a")});
  const auto before = f.gw.state(f.id).state_hash;
  const auto o_before = f.gw.telemetry(f.id).back().report.o;

  auto add = f.say("filter region = EU");
  REQUIRE(f.gw.state_view(f.id).rail.size() == 1);
  auto rm = f.direct(RemoveFilter{std::size_t{1}});
  CHECK(status(rm) == "applied");
  const auto& view = rm.pushed.front().payload;
  CHECK(view["rail"].empty());
  CHECK(view["state_hash"] == before);

  auto mv = f.direct(MoveCard{"a", {300, 200}});
  CHECK(status(mv) == "applied");
  CHECK(f.gw.telemetry(f.id).back().report.o == o_before);
  CHECK(f.gw.state(f.id).find_card("a")->position == session::Point{300, 200});

  auto zoom = f.direct(SetZoom{"a", 0});
  REQUIRE(count_kind(zoom.pushed, MessageKind::CardView) == 1);
  const auto& cv = zoom.pushed.back().payload;
  CHECK(cv["level"] == 0);
  CHECK(cv["content"].contains("sentence"));

  auto rows = f.direct(SetZoom{"a", 2});
  CHECK(rows.pushed.back().payload["content"]["total_rows"] == 6);

  session::StateDelta chat;
  chat.payload = AddFilter{data::FilterSpec::eq("region", std::string("US"))};
  chat.origin = session::Origin::Chat;
  chat.confidence = 0.9;
  CHECK(f.gw.handle_delta(f.id, chat).reply.kind == MessageKind::Error);

  auto bad = f.direct(AddFilter{data::FilterSpec::eq("nope", 1.0)});
  CHECK(bad.reply.kind == MessageKind::Error);
  CHECK(bad.pushed.empty());
}

TEST_CASE("deictic break-down from an anchor card") {
  Fixture f;
  f.say("show sum revenue by region");
  const auto parent = f.gw.state(f.id).cards.at(0).id;

  auto missing = f.say("break this down by product");
  CHECK(missing.reply.kind == MessageKind::Error);
  CHECK(missing.reply.payload["code"] == "needs-selection");

  auto r = f.say("break this down by product", {{}, parent, std::nullopt});
  REQUIRE(status(r) == "applied");
  const auto state = f.gw.state(f.id);
  REQUIRE(state.cards.size() == 2);
  const auto& child = state.cards[1];
  CHECK(child.parent_links == std::vector<std::string>{parent});
  CHECK(child.query.group_by == std::vector<std::string>{"region", "product"});
  CHECK_FALSE(child.bounds().intersects(state.cards[0].bounds()));
}

TEST_CASE("selection questions") {
  Fixture f(fixtures::churn());
  const auto hash = f.gw.state(f.id).state_hash;
  // Five April rows: all churned.
  std::vector<std::size_t> april{30, 31, 32, 33, 34};
  auto r = f.gw.handle_selection_question(f.id, april, "what do these have in common", hash);
  REQUIRE(r.reply.kind == MessageKind::Ack);
  CHECK(status(r) == "report");
  CHECK(r.reply.payload["stale"] == false);
  CHECK(r.reply.payload["selection_size"] == 5);
  REQUIRE(!r.reply.payload["features"].empty());
  CHECK(r.pushed.empty());

  std::vector<std::size_t> all(60);
  std::iota(all.begin(), all.end(), 0);
  auto everything = f.gw.handle_selection_question(f.id, all, "what do these rows have in common?");
  CHECK(everything.reply.payload["features"].empty());
  CHECK(!everything.reply.payload["explanation"].get<std::string>().empty());

  auto empty = f.gw.handle_selection_question(f.id, {}, "what do these have in common");
  CHECK(empty.reply.payload["code"] == "needs-selection");

  auto range = f.gw.handle_selection_question(f.id, {999}, "what do these have in common");
  CHECK(range.reply.kind == MessageKind::Error);

  f.say("filter region = EU");
  auto stale = f.gw.handle_selection_question(f.id, april, "what do these have in common", hash);
  CHECK(stale.reply.payload["stale"] == true);

  auto wire = f.gw.handle({MessageKind::SelectionQuestion, f.id, 9,
                           Json{{"row_ids", april}, {"text", "what do these have in common"}}});
  CHECK(wire.reply.seq == 9);
  CHECK(status(wire) == "report");
}

TEST_CASE("forgotten filters surface in the state view") {
  using namespace session::delta;
  Fixture f;
  f.say("filter region = EU");
  f.direct(AddCard{chart("a")});
  for (int i = 1; i < 10; ++i) f.direct(MoveCard{"a", {static_cast<double>(i), 0}});
  const auto view = f.gw.state_view(f.id);
  REQUIRE(view.forgotten.size() == 1);
  CHECK(view.forgotten[0].rows_hidden == 3);
  CHECK(encode(view)["forgotten_filters"][0]["label"] == "region = EU");
}

TEST_CASE("value comparison opens a side-by-side card") {
  Fixture f;
  auto r = f.say("compare eu vs us");
  REQUIRE(status(r) == "applied");
  const auto card = f.gw.state(f.id).cards.at(0);
  CHECK(card.query.group_by == std::vector<std::string>{"region"});
  auto cv = f.gw.card_view(f.id, card.id);
  CHECK(cv.payload["content"]["rows"].size() == 2);

  f.direct(session::delta::AddCard{chart("z", 0, 800)});
  auto cards = f.say("compare " + card.id + " vs z");
  REQUIRE(status(cards) == "applied");
  const auto moved = *f.gw.state(f.id).find_card("z");
  CHECK(moved.position.x == card.position.x + card.size.width + 40);
  CHECK(moved.position.y == card.position.y);

  CHECK(f.say("compare mars vs venus").reply.kind == MessageKind::Error);
}

TEST_CASE("card filters follow the rail") {
  Fixture f;
  f.say("show count by region");
  const auto id = f.gw.state(f.id).cards.at(0).id;
  CHECK(f.gw.card_view(f.id, id).payload["content"]["rows"].size() == 3);
  f.say("filter region = EU");
  CHECK(f.gw.card_view(f.id, id).payload["content"]["rows"].size() == 1);
  CHECK_THROWS_AS(f.gw.card_view(f.id, "nope"), Error);
}

TEST_CASE("snapshot round-trip") {
  Fixture f;
  Gateway other{config::Config{}, fixed_clock};
  const auto empty = f.gw.snapshot(f.id);
  CHECK(empty.rfind("keyhole-snapshot v1\n", 0) == 0);
  CHECK(other.restore_snapshot(empty, fixtures::sales()) == f.id);
  CHECK(other.state(f.id).state_hash == f.gw.state(f.id).state_hash);

  std::mt19937_64 rng(77);
  std::uint64_t counter = 0;
  std::size_t applied = 0;
  while (applied < 100) {
    auto d = gen::random_delta(rng, f.gw.state(f.id), counter);
    d.origin = session::Origin::Direct;
    d.confidence = 1.0;
    d.annotation.clear();
    if (status(f.gw.handle_delta(f.id, d)) == "applied") ++applied;
  }
  REQUIRE(f.gw.provenance(f.id).log.size() == 100);
  const auto text = f.gw.snapshot(f.id);
  Gateway third{config::Config{}, fixed_clock};
  third.restore_snapshot(text, fixtures::sales());
  CHECK(third.state(f.id).state_hash == f.gw.state(f.id).state_hash);
  CHECK(session::canonical_text(third.state(f.id)) == session::canonical_text(f.gw.state(f.id)));

  // Restoring the provenance replays to the same state.
  Gateway fourth{config::Config{}, fixed_clock};
  auto prov = store::read_provenance_text(store::provenance_text(f.gw.provenance(f.id)));
  fourth.restore_provenance(prov, fixtures::sales());
  CHECK(fourth.state(f.id).state_hash == f.gw.state(f.id).state_hash);
  CHECK(fourth.telemetry(f.id).size() == 101);

  CHECK_THROWS_AS(third.restore_snapshot(text, fixtures::sales()), Error);  // duplicate id
}

TEST_CASE("damaged session files") {
  Fixture f;
  f.say("filter region = EU");
  f.say("show sum revenue by product");
  const auto snap = f.gw.snapshot(f.id);

  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Parse;  // sentinel: nothing thrown
  };
  CHECK(code_of([&] { store::read_snapshot_text(snap.substr(0, snap.size() / 2)); }) == ErrorCode::Corruption);
  CHECK(code_of([&] { store::read_snapshot_text(""); }) == ErrorCode::Corruption);
  CHECK(code_of([&] { store::read_snapshot_text("keyhole-snapshot v2\n{}\nsha256 x\n"); }) == ErrorCode::Version);
  std::string tampered = snap;
  tampered.replace(tampered.find("EU"), 2, "US");
  CHECK(code_of([&] { store::read_snapshot_text(tampered); }) == ErrorCode::Corruption);

  const auto prov = store::provenance_text(f.gw.provenance(f.id));
  CHECK(code_of([&] { store::read_provenance_text(prov.substr(0, prov.size() - 7)); }) == ErrorCode::Corruption);
  const auto last_record = prov.rfind("\n{", prov.size() - 8);
  CHECK(code_of([&] { store::read_provenance_text(prov.substr(0, last_record + 1)); }) == ErrorCode::Corruption);
  std::string v0 = prov;
  v0.replace(v0.find("v1"), 2, "v0");
  CHECK(code_of([&] { store::read_provenance_text(v0); }) == ErrorCode::Version);

  // A record whose hash was altered is caught on replay at its seq.
  auto file = store::read_provenance_text(prov);
  file.log[1].resulting_hash[0] = file.log[1].resulting_hash[0] == 'a' ? 'b' : 'a';
  Gateway other{config::Config{}, fixed_clock};
  try {
    other.restore_provenance(file, fixtures::sales());
    FAIL("tampering accepted");
  } catch (const CorruptionError& e) {
    CHECK(e.seq() == 2);
  }
}

TEST_CASE("message dispatch") {
  Fixture f;
  auto r = f.gw.handle({MessageKind::Utterance, f.id, 1, Json{{"text", "filter region = EU"}}});
  CHECK(r.reply.seq == 1);
  CHECK(status(r) == "applied");

  Json remove{{"action", "RemoveFilter"}, {"payload", {{"column", "region"}}}};
  auto d = f.gw.handle({MessageKind::Delta, f.id, 2, remove});
  CHECK(status(d) == "applied");
  CHECK(f.gw.state(f.id).active_filters.empty());

  auto sv = f.gw.handle({MessageKind::StateView, f.id, 3, Json::object()});
  CHECK(sv.reply.kind == MessageKind::StateView);
  CHECK(sv.pushed.empty());

  CHECK(f.gw.handle({MessageKind::Ack, f.id, 4, Json::object()}).reply.kind == MessageKind::Error);
  CHECK(f.gw.handle({MessageKind::Utterance, "ghost", 5, Json{{"text", "summarize"}}}).reply.kind ==
        MessageKind::Error);
  CHECK(f.gw.handle({MessageKind::Utterance, f.id, 6, Json::object()}).reply.payload["code"] == "validation");
  CHECK(f.gw.handle({MessageKind::CardView, f.id, 7, Json{{"card_id", "none"}}}).reply.kind == MessageKind::Error);

  auto answer = f.gw.handle({MessageKind::Utterance, f.id, 8, Json{{"text", "summarize"}}});
  CHECK(status(answer) == "answered");
  CHECK(!answer.reply.payload["text"].get<std::string>().empty());
}

TEST_CASE("push channel waits for new messages") {
  Fixture f;
  CHECK(f.gw.pushes(f.id, 0).empty());
  std::thread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    f.say("filter region = EU");
  });
  auto got = f.gw.pushes(f.id, 0, std::chrono::milliseconds(5000));
  writer.join();
  REQUIRE(!got.empty());
  CHECK(got.front().kind == MessageKind::StateView);
  CHECK(f.gw.pushes(f.id, got.back().seq).empty());
}

TEST_CASE("sessions are independent and concurrent") {
  Gateway gw{config::Config{}, fixed_clock};
  const auto a = gw.create_session(fixtures::sales(), {std::string("a"), std::nullopt});
  const auto b = gw.create_session(fixtures::sales());
  CHECK(a == "a");
  CHECK(b != a);
  CHECK_THROWS_AS(gw.create_session(fixtures::sales(), {std::string("a"), std::nullopt}), Error);

  std::vector<std::thread> threads;
  for (const auto& id : {a, b})
    threads.emplace_back([&gw, id] {
      for (int i = 0; i < 20; ++i) gw.handle_utterance(id, i % 2 ? "filter region = EU" : "remove filter region");
    });
  for (auto& t : threads) t.join();
  CHECK(gw.provenance(a).log.size() == 20);
  CHECK(gw.provenance(b).log.size() == 20);
  CHECK(gw.session_ids().size() == 2);
}

TEST_CASE("configuration file") {
  auto c = config::parse_config_text("{}");
  CHECK(c.calculus.lambda == 0.5);
  CHECK(c.tiers.silent == 0.9);
  CHECK(c.harness.costs.table[cost::OperationKind::CompareViews].chat == 15.2);

  c = config::parse_config_text(R"({
    "calculus": {"lambda": 0.7},
    "tiers": {"silent": 0.95, "inferred": 0.5},
    "costs": {"DrillDown": {"chat": 9.0}},
    "agent": {"wm_capacity": 5},
    "simulation": {"trials": 10, "seed": 7},
    "gateway": {"view_mode": "rail", "viewport": [0, 0, 800, 600]}
  })");
  CHECK(c.calculus.lambda == 0.7);
  CHECK(c.tiers.inferred == 0.5);
  CHECK(c.harness.costs.table[cost::OperationKind::DrillDown].chat == 9.0);
  CHECK(c.harness.costs.table[cost::OperationKind::DrillDown].gui == 0.8);
  CHECK(c.harness.agent.wm_capacity == 5);
  CHECK(c.simulation.seed == 7);
  CHECK(c.gateway.view_mode == session::ViewMode::Rail);
  CHECK(c.gateway.viewport.width == 800);

  // Round-trips through its own encoding.
  auto again = config::parse_config(config::encode(c));
  CHECK(config::encode(again) == config::encode(c));

  CHECK_THROWS_AS(config::parse_config_text(R"({"calculus": {"lamda": 1}})"), Error);
  CHECK_THROWS_AS(config::parse_config_text(R"({"extra": 1})"), Error);
  CHECK_THROWS_AS(config::parse_config_text(R"({"tiers": {"silent": 0.5, "inferred": 0.7}})"), Error);
  CHECK_THROWS_AS(config::parse_config_text(R"({"agent": {"wm_capacity": 0}})"), Error);
  CHECK_THROWS_AS(config::parse_config_text(R"({"costs": {"Lasso": {"chat": 1}}})"), Error);
  CHECK_THROWS_AS(config::parse_config_text("not json"), Error);

  const auto path = std::filesystem::temp_directory_path() / "keyhole-config-test.json";
  std::ofstream(path) << R"({"tiers": {"silent": 0.8, "inferred": 0.55}})";
  CHECK(config::load_config(path).tiers.silent == 0.8);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(config::load_config(path), Error);

  // Tier bounds from config drive the gateway.
  config::Config strict;
  strict.tiers = {0.95, 0.9};
  Gateway gw{strict, fixed_clock};
  const auto id = gw.create_session(fixtures::sales());
  CHECK(gw.handle_utterance(id, "filter regoin = EU").reply.payload["status"] == "needs_confirmation");
}
