// Acceptance run: one PASS/FAIL line per criterion, each checked against
// its own oracle and wall-clock budget. Exit status is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "generators.hpp"
#include "intent_gen.hpp"
#include "keyhole/anomaly.hpp"
#include "keyhole/calculus.hpp"
#include "keyhole/cost.hpp"
#include "keyhole/error.hpp"
#include "keyhole/gateway.hpp"
#include "keyhole/harness.hpp"
#include "keyhole/intent.hpp"
#include "keyhole/session.hpp"
#include "keyhole/store.hpp"
#include "keyhole/zoom.hpp"
#include "oracles.hpp"
#include "session_gen.hpp"

using namespace keyhole;

namespace {

// Collects the first few failure descriptions of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_.size() < 5) failures_.push_back(what);
    ++count_;
  }
  bool ok() const { return count_ == 0; }
  std::string summary() const {
    std::string out;
    for (const auto& f : failures_) out += (out.empty() ? "" : "; ") + f;
    if (count_ > failures_.size()) out += "; " + std::to_string(count_ - failures_.size()) + " more";
    return out;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t count_ = 0;
};

struct Criterion {
  int number;
  std::string title;
  double budget_s;
  std::function<void(Checks&)> body;
};

std::string str(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

std::int64_t fixed_clock() { return 1'700'000'000'000; }

// 1 -------------------------------------------------------------------------

void overload_comparison(Checks& c) {
  const calculus::CapacityModel cap{4, 0, 0};
  struct Row {
    long v;
    double l_internal, o;
  };
  for (Row row : {Row{1, 7, 3}, Row{4, 4, 0}, Row{7, 1, 0}}) {
    auto r = calculus::overload(8, row.v, cap);
    c.expect(r.l_internal == row.l_internal && r.o == row.o,
             "overload(8," + std::to_string(row.v) + ",4) = (" + str(r.l_internal) + "," + str(r.o) + ")");
  }
}

// 2 -------------------------------------------------------------------------

void operation_costs(Checks& c) {
  using cost::Modality;
  using cost::OperationKind;
  struct Cell {
    OperationKind op;
    double chat, gui;
  };
  const Cell published[] = {{OperationKind::SimpleFilter, 5.2, 0.5},
                            {OperationKind::DateRange, 8.5, 1.2},
                            {OperationKind::MultiSelect, 12.3, 2.1},
                            {OperationKind::DrillDown, 7.8, 0.8},
                            {OperationKind::CompareViews, 15.2, 1.5}};
  for (const auto& cell : published) {
    c.expect(cost::op_time(cell.op, Modality::Chat) == cell.chat, std::string(cost::to_string(cell.op)) + " chat");
    c.expect(cost::op_time(cell.op, Modality::Gui) == cell.gui, std::string(cost::to_string(cell.op)) + " gui");
  }
  const double chat = cost::session_cost(cost::uniform_mix(Modality::Chat, 10));
  const double gui = cost::session_cost(cost::uniform_mix(Modality::Gui, 10));
  c.expect(cost::uniform_mix(Modality::Chat, 10).size() == 50, "mix size");
  c.expect(chat == 490.0, "chat total " + str(chat));
  c.expect(gui == 61.0, "gui total " + str(gui));
}

// 3 -------------------------------------------------------------------------

void calculus_properties(Checks& c) {
  using namespace calculus;
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<long> count(0, 60);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const long m = count(rng), v = count(rng);
    const CapacityModel cap{0.5 + unit(rng) * 9.5, unit(rng) * 3, unit(rng) * 3};
    const auto r = overload(m, v, cap);
    const std::string at = " at m=" + std::to_string(m) + " v=" + std::to_string(v);

    // Clamping: O = max(0, m - v - C) exactly.
    const double expect_o = std::max(0.0, static_cast<double>(m - v) - cap.effective());
    c.expect(r.o == expect_o, "clamp" + at);
    c.expect(r.o >= 0, "negative O" + at);
    // Monotone: up in m, down in v and in capacity.
    c.expect(overload(m + 1, v, cap).o >= r.o, "m monotone" + at);
    c.expect(overload(m, v + 1, cap).o <= r.o, "v monotone" + at);
    CapacityModel more = cap;
    more.chunking_aid += unit(rng) * 2;
    c.expect(overload(m, v, more).o <= r.o, "capacity monotone" + at);

    // Unit weights with 0/1 visibility collapse to the base model.
    std::vector<Item> items;
    long visible = 0;
    for (long k = 0; k < m; ++k) {
      const bool vis = rng() & 1;
      visible += vis;
      items.push_back({"i" + std::to_string(k), ItemKind::Filter, 1.0, vis ? 1.0 : 0.0, ""});
    }
    c.expect(extended_overload(items, cap) == overload(m, visible, cap).o, "degeneracy" + at);

    // Error probability lies in [0, 1), rises with O and with lambda, p(0) = 0.
    const double o = unit(rng) * 20;
    const CalculusParams p{1, 0.05 + unit(rng) * 1.95, 3};
    const double pe = error_probability(o, p);
    c.expect(pe >= 0 && pe <= 1, "p bounds");
    if (p.lambda * o < 30) c.expect(pe < 1, "p < 1");
    c.expect(error_probability(0, p) == 0.0, "p(0)");
    if (p.lambda * (o + 0.5) < 30) c.expect(error_probability(o + 0.5, p) > pe, "p monotone in O");
    if (o > 0 && p.lambda * 1.5 * o < 30)
      c.expect(error_probability(o, CalculusParams{1, p.lambda * 1.5, 3}) > pe, "p monotone in lambda");
    c.expect(std::fabs(pe - (1 - std::exp(-p.lambda * o))) <= 1e-12, "p formula");
  }
}

// 4 -------------------------------------------------------------------------

void query_oracle(Checks& c) {
  std::mt19937_64 rng(4004);
  for (int i = 0; i < 200; ++i) {
    const data::Dataset ds = gen::random_dataset(rng, 1000, 6);
    for (int j = 0; j < 5; ++j) {
      const data::QuerySpec q = gen::random_query(rng, ds);
      const auto got = data::run_query(ds, q);
      const auto want = oracle::naive_query(ds, q);
      const std::string where = "dataset " + std::to_string(i) + " query " + std::to_string(j);
      if (got.rows.size() != want.size()) {
        c.expect(false, where + " row count");
        continue;
      }
      for (std::size_t r = 0; r < want.size(); ++r) {
        std::vector<data::Value> key(got.rows[r].begin(), got.rows[r].end() - 1);
        c.expect(key == want[r].key, where + " key");
        const auto& g = got.rows[r].back();
        const auto& w = want[r].measure;
        if (q.aggregate == data::Aggregate::Mean && !data::is_missing(w) && !data::is_missing(g)) {
          const double a = std::get<double>(g), b = std::get<double>(w);
          c.expect(std::fabs(a - b) <= 1e-9 * std::fabs(b), where + " mean");
        } else {
          c.expect(g == w, where + " measure");
        }
      }
    }
  }
}

// 5 -------------------------------------------------------------------------

void anomaly_oracle(Checks& c) {
  std::mt19937_64 rng(5005);
  std::normal_distribution<double> noise(0, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> xs(3 + rng() % 200);
    for (auto& x : xs) x = std::round(noise(rng) * 1000) / 10;
    if (i % 4 == 0) xs[rng() % xs.size()] += 50 * ((rng() & 1) ? 1 : -1);
    const double threshold = 0.5 + static_cast<double>(rng() % 30) / 10.0;
    std::vector<std::size_t> got;
    for (const auto& m : data::detect_anomalies(xs, threshold)) got.push_back(m.index);
    c.expect(got == oracle::brute_anomalies(xs, threshold), "series " + std::to_string(i));
  }
}

// 6 -------------------------------------------------------------------------

void zoom_consistency(Checks& c) {
  std::mt19937_64 rng(6006);
  int fixtures_run = 0;
  while (fixtures_run < 100) {
    const data::Dataset ds = gen::random_dataset(rng, 300, 5);
    data::QuerySpec q = gen::random_query(rng, ds);
    if (q.group_by.empty()) continue;
    ++fixtures_run;
    const std::string where = "fixture " + std::to_string(fixtures_run);

    const auto rows = std::get<data::RowsView>(data::zoom_view(ds, q, 2));
    const auto agg = std::get<data::AggregateView>(data::zoom_view(ds, q, 1));
    // Level 1 recomputed by the oracle from nothing but the level-2 rows.
    data::QuerySpec unfiltered = q;
    unfiltered.filters.clear();
    const auto want = oracle::naive_query(rows.rows, unfiltered);
    bool same = want.size() == agg.table.rows.size();
    for (std::size_t r = 0; same && r < want.size(); ++r) {
      std::vector<data::Value> key(agg.table.rows[r].begin(), agg.table.rows[r].end() - 1);
      same = key == want[r].key && agg.table.rows[r].back() == want[r].measure;
    }
    c.expect(same, where + " level 1");
    c.expect(agg.table.rows == data::run_query(ds, q).rows, where + " level 1 vs direct query");

    // Level 0 direction from the least-squares slope of the level-1 series.
    std::vector<double> ys;
    double scale = 0;
    for (const auto& w : want)
      if (auto y = oracle::as_number(w.measure)) {
        ys.push_back(*y);
        scale = std::max(scale, std::fabs(*y));
      }
    const double slope = ys.size() < 2 ? 0 : oracle::normal_equation_slope(ys);
    const auto expect = std::fabs(slope) <= 1e-9 * scale ? data::Direction::Flat
                        : slope > 0                       ? data::Direction::Rising
                                                          : data::Direction::Falling;
    const auto summary = std::get<data::SummaryView>(data::zoom_view(ds, q, 0));
    c.expect(summary.direction == expect, where + " direction");
  }
}

// 7 -------------------------------------------------------------------------

void grammar(Checks& c) {
  const std::vector<std::string> schema{"region", "net revenue", "by", "count", "a=b", "Zoom", "x\"y", "this"};
  std::mt19937_64 rng(7007);
  for (int i = 0; i < 5000; ++i) {
    const auto cmd = gen::random_command(rng, schema);
    const auto text = intent::format(cmd);
    try {
      const auto back = intent::parse(text, schema);
      c.expect(back == cmd && back.confidence == 1.0, "round trip '" + text + "'");
    } catch (const std::exception& e) {
      c.expect(false, "round trip '" + text + "': " + e.what());
    }
  }

  static const char* bits[] = {"filter", "show",   "by",  "break",  "down", "this",   "=",    "!=",
                               ",",      "\"",     "between", "and", "remove", "0",  "vs",     "?",
                               "what",   "do",     "have", "in",   "common", "region", "zoom", "these"};
  const std::vector<std::string> sales{"region", "product", "revenue", "date"};
  for (int i = 0; i < 10000; ++i) {
    std::string text;
    if (i % 2) {
      for (std::size_t n = rng() % 60; n > 0; --n) text.push_back(static_cast<char>(rng() & 0xff));
    } else {
      for (std::size_t n = rng() % 10; n > 0; --n) text += std::string(bits[rng() % std::size(bits)]) + " ";
    }
    try {
      const auto cmd = intent::parse(text, sales);
      c.expect(cmd.confidence > 0 && cmd.confidence <= 1, "confidence out of range");
    } catch (const intent::UnparseableError&) {
    } catch (const std::exception& e) {
      c.expect(false, std::string("fuzz threw ") + e.what());
    }
  }

  const auto deictic = intent::parse("break this down by product", sales);
  c.expect(deictic.verb == intent::Verb::Breakdown && deictic.deictic_slots.size() == 1, "deictic slot");
}

// 8 -------------------------------------------------------------------------

void provenance_replay(Checks& c) {
  std::mt19937_64 rng(8008);
  session::Session s("acc", gen::session_schema(), fixed_clock);
  std::uint64_t counter = 0;
  while (s.log().size() < 10000) {
    try {
      s.apply(gen::random_delta(rng, s.state(), counter));
    } catch (const Error&) {
    }
  }
  c.expect(session::replay(s.log(), s.initial()).state_hash == s.state().state_hash, "replayed hash");

  // Persist and read back before tampering, as an auditor would.
  auto file = store::read_provenance_text(store::provenance_text(store::export_session(s)));
  auto tampered = file.log;
  for (std::size_t victim : {std::size_t{1}, std::size_t{4321}, std::size_t{9999}}) {
    auto log = tampered;
    log[victim].delta.payload = session::delta::AddFilter{data::FilterSpec::eq("region", std::string("ZZ"))};
    try {
      session::replay(log, file.initial);
      c.expect(false, "tamper at index " + std::to_string(victim) + " undetected");
    } catch (const CorruptionError& e) {
      c.expect(e.seq() == log[victim].seq, "tamper reported at seq " + std::to_string(e.seq()) + ", expected " +
                                               std::to_string(log[victim].seq));
    }
  }
}

// 9 -------------------------------------------------------------------------

session::Session planted(const data::FilterSpec& f, std::size_t unrelated) {
  using namespace session;
  Session s("f", gen::session_schema(), fixed_clock);
  s.apply({delta::AddFilter{f}, Origin::Chat, 1.0, "filter " + f.column});
  Card main;
  main.id = "main";
  s.apply({delta::AddCard{main}, Origin::Direct, 1.0, {}});
  while (s.log().size() < 1 + unrelated)
    s.apply({delta::MoveCard{"main", {static_cast<double>(s.log().size()), 0}}, Origin::Direct, 1.0, {}});
  return s;
}

void forgotten_filter(Checks& c) {
  const auto ds = fixtures::sales();
  const auto eu = data::FilterSpec::eq("region", std::string("EU"));
  const auto s = planted(eu, 10);
  const auto flagged = session::detect_forgotten_filters(s.state(), s.log(), ds, 10);
  c.expect(flagged.size() == 1 && flagged[0].filter == eu && flagged[0].rows_hidden == 3, "affecting filter flagged");

  const auto everyone = data::FilterSpec::in("region", {std::string("EU"), std::string("US"), std::string("APAC")});
  const auto h = planted(everyone, 10);
  c.expect(session::detect_forgotten_filters(h.state(), h.log(), ds, 10).empty(), "non-affecting filter not flagged");
}

// 10 ------------------------------------------------------------------------

void simulation(Checks& c) {
  using namespace harness;
  const auto a = run_paradigm(Paradigm::UiComparison, 500, 42);
  const auto b = run_paradigm(Paradigm::UiComparison, 500, 42);
  const auto text_a = format_summary(a) + export_metrics(a.records);
  c.expect(text_a == format_summary(b) + export_metrics(b.records), "runs differ");
  c.expect(format_summary(a).find("not an empirical test") != std::string::npos, "header disclaimer");

  const double chat = a.condition("chat_only").consistency_errors.mean;
  const double rail = a.condition("chat_state_rail").consistency_errors.mean;
  const double hybrid = a.condition("hybrid").consistency_errors.mean;
  c.expect(chat > rail && rail >= hybrid, "order " + str(chat) + " / " + str(rail) + " / " + str(hybrid));

  const auto task = eight_item_script();
  const AgentModel agent;
  const std::pair<ConditionName, double> expected[] = {
      {ConditionName::ChatOnly, 3}, {ConditionName::ChatStateRail, 0}, {ConditionName::Hybrid, 0}};
  for (auto [name, o] : expected) {
    const double got = simulate_trial(task, make_condition(name), agent, 42).mean_overload;
    c.expect(got == o, std::string(to_string(name)) + " mean O " + str(got));
  }
}

// 11 ------------------------------------------------------------------------

void deictic_efficiency(Checks& c) {
  using namespace harness;
  const auto a = run_paradigm(Paradigm::DeicticEfficiency, 500, 42);
  const auto b = run_paradigm(Paradigm::DeicticEfficiency, 500, 42);
  const double ratio = a.condition("describe").total_time.mean / a.condition("point").total_time.mean;
  c.expect(ratio > 1.0, "ratio " + str(ratio));
  c.expect(export_metrics(a.records) == export_metrics(b.records), "not deterministic");
}

// 12 ------------------------------------------------------------------------

void gateway_checks(Checks& c) {
  using namespace gateway;
  Gateway gw{config::Config{}, fixed_clock};
  const auto id = gw.create_session(fixtures::sales());
  auto status = [](const Reply& r) { return r.reply.payload.value("status", std::string()); };
  auto state_views = [](const Reply& r) {
    return std::count_if(r.pushed.begin(), r.pushed.end(), [](const Message& m) { return m.kind == MessageKind::StateView; });
  };

  gw.handle_utterance(id, "filter product = widget");
  const auto hash = gw.state(id).state_hash;
  const auto log_size = gw.provenance(id).log.size();
  const auto push_count = gw.pushes(id, 0).size();
  for (const char* text :
       {"filter xxxxxn = EU", "filter pxxxxxx = gizmo", "filter xxxxxxxx = 3", "show xxxxxxx by xxxxxn"}) {
    const auto r = gw.handle_utterance(id, text);
    c.expect(status(r) == "needs_confirmation", std::string("'") + text + "' was not held for confirmation");
    c.expect(r.pushed.empty() && gw.state(id).state_hash == hash && gw.provenance(id).log.size() == log_size &&
                 gw.pushes(id, 0).size() == push_count,
             std::string("'") + text + "' mutated state");
  }

  // Mutating and non-mutating messages interleaved.
  std::size_t mutating = 0;
  auto track = [&](const Reply& r) {
    const bool mutated = status(r) == "applied";
    mutating += mutated;
    c.expect(state_views(r) == (mutated ? 1 : 0), "StateView count for a " + std::string(mutated ? "" : "non-") +
                                                      "mutating message");
  };
  for (const char* text : {"filter region = EU", "show sum revenue by product", "break down by product", "summarize",
                           "zoom in", "zoom in", "zoom in", "remove filter 1", "compare EU vs US", "remove filter 9"})
    track(gw.handle_utterance(id, text));

  std::mt19937_64 rng(1212);
  std::uint64_t counter = 0;
  std::size_t applied = 0;
  while (applied < 100) {
    auto d = gen::random_delta(rng, gw.state(id), counter);
    d.origin = session::Origin::Direct;
    d.confidence = 1.0;
    d.annotation.clear();
    const auto r = gw.handle_delta(id, d);
    track(r);
    applied += status(r) == "applied";
  }
  const auto pushes = gw.pushes(id, 0);
  const auto total_views = std::count_if(pushes.begin(), pushes.end(),
                                         [](const Message& m) { return m.kind == MessageKind::StateView; });
  c.expect(static_cast<std::size_t>(total_views) == mutating + 1, "push channel StateView total");

  // Snapshot to disk and back.
  const auto path = std::filesystem::temp_directory_path() / ("keyhole-acceptance-" + id + ".snapshot");
  store::save(path, gw.snapshot(id));
  Gateway other{config::Config{}, fixed_clock};
  other.restore_snapshot(store::load(path), fixtures::sales());
  std::filesystem::remove(path);
  c.expect(other.state(id).state_hash == gw.state(id).state_hash, "snapshot hash");
  c.expect(session::canonical_text(other.state(id)) == session::canonical_text(gw.state(id)), "snapshot content");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "interface comparison table: overload for v = 1, 4, 7", 1, overload_comparison},
      {2, "per-operation times and uniform 50-operation totals", 1, operation_costs},
      {3, "calculus property suite, 1,000 cases", 5, calculus_properties},
      {4, "query engine vs row-scan oracle, 200 datasets", 60, query_oracle},
      {5, "anomaly markers vs brute-force z-scores, 100 series", 5, anomaly_oracle},
      {6, "semantic zoom consistency, 100 fixtures", 5, zoom_consistency},
      {7, "grammar round trip, 10,000-case fuzz, deictic slot", 10, grammar},
      {8, "provenance replay over 10,000 deltas, tamper detection", 30, provenance_replay},
      {9, "forgotten-filter detector, planted scenario", 5, forgotten_filter},
      {10, "simulation determinism, condition order, overload per condition", 10, simulation},
      {11, "describe-vs-point time ratio", 5, deictic_efficiency},
      {12, "gateway: held utterances, one StateView per mutation, snapshot", 10, gateway_checks},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.body(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("threw: ") + e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    checks.expect(elapsed < cr.budget_s, "over budget");
    const bool ok = checks.ok();
    failed += !ok;
    std::printf("%s %2d  %-66s %8.3f s / %g s%s%s\n", ok ? "PASS" : "FAIL", cr.number, cr.title.c_str(), elapsed,
                cr.budget_s, ok ? "" : "  ", ok ? "" : checks.summary().c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
