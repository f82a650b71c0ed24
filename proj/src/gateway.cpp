#include "keyhole/gateway.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <condition_variable>

#include "keyhole/error.hpp"
#include "keyhole/workspace.hpp"
#include "keyhole/zoom.hpp"

namespace keyhole::gateway {

using codec::Json;
using session::StateDelta;

namespace {

constexpr std::array<std::string_view, 8> kKindNames{"Utterance", "Delta",   "SelectionQuestion", "StateView",
                                                     "TelemetryView", "CardView", "Error",             "Ack"};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::Validation, what); }

}  // namespace

std::string_view to_string(MessageKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<MessageKind> parse_message_kind(std::string_view text) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == text) return static_cast<MessageKind>(i);
  return std::nullopt;
}

Json encode(const Message& m) {
  return Json{{"v", std::string(kProtocolVersion)},
              {"kind", std::string(to_string(m.kind))},
              {"session_id", m.session_id},
              {"seq", m.seq},
              {"payload", m.payload}};
}

Message decode_message(const Json& j) {
  if (!j.is_object()) invalid("message must be a JSON object");
  const std::string v = codec::get_string(j, "v");
  if (v != kProtocolVersion)
    throw Error(ErrorCode::Version, "protocol version '" + v + "' is not supported; expected " +
                                        std::string(kProtocolVersion));
  Message m;
  auto kind = parse_message_kind(codec::get_string(j, "kind"));
  if (!kind) invalid("unknown message kind '" + codec::get_string(j, "kind") + "'");
  m.kind = *kind;
  m.session_id = codec::get_string(j, "session_id");
  const Json& seq = codec::field(j, "seq");
  if (!seq.is_number_unsigned() && !(seq.is_number_integer() && seq.get<std::int64_t>() >= 0))
    invalid("seq must be a non-negative integer");
  m.seq = seq.get<std::uint64_t>();
  m.payload = j.contains("payload") ? j.at("payload") : Json::object();
  if (!m.payload.is_object()) invalid("payload must be an object");
  return m;
}

std::string to_wire(const Message& m) { return encode(m).dump(); }

Message from_wire(std::string_view text) {
  Json j = Json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) invalid("message is not valid JSON");
  return decode_message(j);
}

Json encode(const calculus::OverloadReport& r) {
  return Json{{"m", r.m},
              {"v", r.v},
              {"l_internal", r.l_internal},
              {"o", r.o},
              {"dimensionality", r.dimensionality},
              {"s", r.s},
              {"o_prime", r.o_prime},
              {"p_error", r.p_error},
              {"basis", r.basis == calculus::ErrorBasis::Overload ? "overload" : "total_overload"}};
}

namespace {

Json encode_marker(const data::AnomalyMarker& m) {
  return Json{{"index", m.index},
              {"bucket_key", m.bucket_key},
              {"score", m.score},
              {"kind", std::string(data::to_string(m.kind))}};
}

Json encode_markers(const std::vector<data::AnomalyMarker>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) out.push_back(encode_marker(m));
  return out;
}

Json encode_rows(const data::Dataset& ds, std::size_t limit) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < std::min(limit, ds.row_count()); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < ds.column_count(); ++c) row.push_back(codec::encode(ds.cell(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Json encode(const StateViewModel& v) {
  Json rail = Json::array();
  for (const auto& t : v.rail)
    rail.push_back({{"kind", t.tag.kind},
                    {"label", t.tag.label},
                    {"filter_index", t.tag.filter_index ? Json(*t.tag.filter_index) : Json(nullptr)},
                    {"removable", t.removable},
                    {"confidence", t.confidence},
                    {"origin", std::string(session::to_string(t.origin))},
                    {"tier", std::string(intent::to_string(t.tier))}});
  Json cards = Json::array();
  for (const auto& c : v.cards) {
    Json card = session::encode(c.card);
    card["markers"] = encode_markers(c.markers);
    cards.push_back(std::move(card));
  }
  Json forgotten = Json::array();
  for (const auto& f : v.forgotten)
    forgotten.push_back({{"filter", codec::encode(f.filter)},
                         {"label", data::describe(f.filter)},
                         {"index", f.index},
                         {"rows_hidden", f.rows_hidden}});
  return Json{{"session_id", v.session_id},
              {"state_hash", v.state_hash},
              {"provenance_seq", v.provenance_seq},
              {"view_mode", std::string(session::to_string(v.view_mode))},
              {"rail", std::move(rail)},
              {"cards", std::move(cards)},
              {"overload", encode(v.overload)},
              {"recommendation", std::string(calculus::to_string(v.recommendation))},
              {"forgotten_filters", std::move(forgotten)}};
}

// ---------------------------------------------------------------------------

struct Gateway::Context {
  Context(session::Session s, data::Dataset ds, session::ViewMode m)
      : session(std::move(s)), dataset(std::move(ds)), mode(m) {
    for (const auto& c : dataset.columns()) columns.push_back(c.name);
  }

  mutable std::mutex mutex;
  mutable std::condition_variable arrived;
  session::Session session;
  data::Dataset dataset;
  std::vector<std::string> columns;
  session::ViewMode mode;
  std::vector<TelemetryPoint> telemetry;
  std::vector<UnappliedUtterance> unapplied;
  std::vector<Message> pushes;
};

calculus::OverloadReport state_overload(const session::SessionState& s, session::ViewMode mode,
                                        const config::Config& cfg) {
  const long m = session::measure_m(s);
  const long v = session::measure_v(s, cfg.gateway.viewport, mode);
  // A linear stream flattens every grouping dimension; views show them.
  const int d = mode == session::ViewMode::ChatOnly ? 1 + static_cast<int>(s.group_by ? s.group_by->size() : 0) : 1;
  return calculus::full_report(m, v, d, cfg.capacity, cfg.calculus, calculus::ErrorBasis::TotalOverload);
}

namespace {

using Context = Gateway::Context;

// Outcome of interpreting a request before anything is applied.
struct Plan {
  std::vector<StateDelta> deltas;
  Json ack = Json::object();
};

Message ack(const std::string& id, std::uint64_t seq, Json payload) {
  return {MessageKind::Ack, id, seq, std::move(payload)};
}

Message error_message(const std::string& id, std::uint64_t seq, const Error& e) {
  Json p{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (auto* u = dynamic_cast<const intent::UnparseableError*>(&e)) {
    Json alts = Json::array();
    for (const auto& a : u->alternatives()) alts.push_back({{"command", intent::format(a)}, {"confidence", a.confidence}});
    p["alternatives"] = std::move(alts);
  }
  if (auto* c = dynamic_cast<const CorruptionError*>(&e)) p["seq"] = c->seq();
  return {MessageKind::Error, id, seq, std::move(p)};
}

Reply error_reply(const std::string& id, std::uint64_t seq, const Error& e) { return {error_message(id, seq, e), {}}; }


data::QuerySpec working_query(const session::SessionState& s, const data::QuerySpec& q) {
  data::QuerySpec out = q;
  auto fs = session::effective_filters(s);
  out.filters.insert(out.filters.begin(), fs.begin(), fs.end());
  return out;
}

std::vector<data::AnomalyMarker> markers_for(const Context& ctx, const session::Card& card,
                                             const config::Config& cfg) {
  if (!card.highlight_anomalies) return {};
  auto table = data::run_query(ctx.dataset, working_query(ctx.session.state(), card.query));
  return data::detect_anomalies(table, cfg.gateway.anomaly_threshold);
}

// The delta that last set a rail entry, searched newest first.
const session::ProvenanceRecord* setter_of(const Context& ctx, const session::RailTag& tag) {
  const auto& state = ctx.session.state();
  const auto& log = ctx.session.log();
  for (auto it = log.rbegin(); it != log.rend(); ++it) {
    const auto& p = it->delta.payload;
    if (tag.kind == "filter") {
      if (auto* a = std::get_if<session::delta::AddFilter>(&p); a && a->filter == state.active_filters[*tag.filter_index])
        return &*it;
    } else if ((tag.kind == "group_by" && std::holds_alternative<session::delta::SetGroupBy>(p)) ||
               (tag.kind == "time_range" && std::holds_alternative<session::delta::SetTimeRange>(p)) ||
               (tag.kind == "cohort" && std::holds_alternative<session::delta::SetCohort>(p)) ||
               (tag.kind == "aggregation" && std::holds_alternative<session::delta::SetAggregation>(p))) {
      return &*it;
    }
  }
  return nullptr;
}

StateViewModel build_view(const Context& ctx, const config::Config& cfg) {
  const auto& s = ctx.session.state();
  StateViewModel v;
  v.session_id = s.session_id;
  v.state_hash = s.state_hash;
  v.provenance_seq = ctx.session.log().empty() ? 0 : ctx.session.log().back().seq;
  v.view_mode = ctx.mode;
  for (auto& tag : session::rail_tags(s)) {
    RailTagView t;
    if (auto* r = setter_of(ctx, tag)) {
      t.confidence = r->delta.confidence;
      t.origin = r->delta.origin;
    }
    t.tier = intent::confidence_tier(t.confidence, cfg.tiers);
    t.tag = std::move(tag);
    v.rail.push_back(std::move(t));
  }
  for (const auto& c : s.cards) v.cards.push_back({c, markers_for(ctx, c, cfg)});
  v.overload = state_overload(s, ctx.mode, cfg);
  v.recommendation = calculus::recommend_modality(v.overload.o_prime, cfg.calculus);
  v.forgotten = session::detect_forgotten_filters(s, ctx.session.log(), ctx.dataset, cfg.gateway.forgotten_lookback);
  return v;
}

Json card_payload(const Context& ctx, const session::Card& card, const config::Config& cfg) {
  Json content;
  auto view = data::zoom_view(ctx.dataset, working_query(ctx.session.state(), card.query), card.zoom_level);
  if (auto* sum = std::get_if<data::SummaryView>(&view)) {
    content = {{"sentence", sum->sentence},
               {"direction", std::string(data::to_string(sum->direction))},
               {"slope", sum->slope},
               {"extremum_key", sum->extremum_key},
               {"extremum_value", codec::encode(sum->extremum_value)}};
  } else if (auto* agg = std::get_if<data::AggregateView>(&view)) {
    Json rows = Json::array();
    for (const auto& row : agg->table.rows) {
      Json r = Json::array();
      for (const auto& v : row) r.push_back(codec::encode(v));
      rows.push_back(std::move(r));
    }
    content = {{"columns", agg->table.columns},
               {"rows", std::move(rows)},
               {"chart",
                {{"kind", std::string(data::to_string(agg->chart.kind))}, {"x", agg->chart.x}, {"y", agg->chart.y}}}};
  } else {
    const auto& rv = std::get<data::RowsView>(view);
    Json cols = Json::array();
    for (const auto& c : rv.rows.columns()) cols.push_back(c.name);
    const std::size_t shown = std::min(kMaxCardRows, rv.rows.row_count());
    content = {{"columns", std::move(cols)},
               {"rows", encode_rows(rv.rows, kMaxCardRows)},
               {"source_rows", std::vector<std::size_t>(rv.source_rows.begin(), rv.source_rows.begin() + shown)},
               {"total_rows", rv.rows.row_count()},
               {"truncated", rv.rows.row_count() > shown}};
  }
  return Json{{"card", session::encode(card)},
              {"level", card.zoom_level},
              {"content", std::move(content)},
              {"markers", encode_markers(markers_for(ctx, card, cfg))}};
}

void push(Context& ctx, MessageKind kind, Json payload) {
  Message m{kind, ctx.session.state().session_id, ctx.pushes.size() + 1, std::move(payload)};
  ctx.pushes.push_back(std::move(m));
}

Json telemetry_json(const std::vector<TelemetryPoint>& points, std::size_t from) {
  Json out = Json::array();
  for (std::size_t i = from; i < points.size(); ++i)
    out.push_back({{"seq", points[i].seq}, {"overload", encode(points[i].report)}});
  return out;
}

// Applies a batch atomically: the whole batch is checked on a scratch copy
// first, so a failing delta leaves neither state nor log changed.
Reply commit(Context& ctx, const config::Config& cfg, std::uint64_t seq, Plan plan) {
  const std::string id = ctx.session.state().session_id;
  if (plan.deltas.empty()) {
    if (!plan.ack.contains("status")) plan.ack["status"] = "unchanged";
    return {ack(id, seq, std::move(plan.ack)), {}};
  }
  {
    session::SessionState scratch = ctx.session.state();
    const auto& schema = ctx.session.schema();
    for (const auto& d : plan.deltas) scratch = session::apply_delta(scratch, d, schema ? &*schema : nullptr);
  }

  const auto before = ctx.session.state();
  const std::size_t first_point = ctx.telemetry.size();
  Json seqs = Json::array();
  for (const auto& d : plan.deltas) {
    const auto& r = ctx.session.apply(d);
    seqs.push_back(r.seq);
    ctx.telemetry.push_back({r.seq, state_overload(ctx.session.state(), ctx.mode, cfg)});
  }

  const std::size_t first_push = ctx.pushes.size();
  push(ctx, MessageKind::StateView, encode(build_view(ctx, cfg)));
  push(ctx, MessageKind::TelemetryView, Json{{"points", telemetry_json(ctx.telemetry, first_point)}});
  for (const auto& card : ctx.session.state().cards) {
    const auto* old = before.find_card(card.id);
    if (!old || old->zoom_level != card.zoom_level) push(ctx, MessageKind::CardView, card_payload(ctx, card, cfg));
  }
  ctx.arrived.notify_all();

  plan.ack["status"] = "applied";
  plan.ack["records"] = std::move(seqs);
  plan.ack["state_hash"] = ctx.session.state().state_hash;
  return {ack(id, seq, std::move(plan.ack)),
          std::vector<Message>(ctx.pushes.begin() + static_cast<std::ptrdiff_t>(first_push), ctx.pushes.end())};
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// First grid slot whose rectangle overlaps no existing card.
session::Point free_slot(const session::SessionState& s) {
  using workspace::kCardGap, workspace::kCardHeight, workspace::kCardWidth;
  for (std::size_t slot = 0;; ++slot) {
    session::Rect r{static_cast<double>(slot % 2) * (kCardWidth + kCardGap),
                    static_cast<double>(slot / 2) * (kCardHeight + kCardGap), kCardWidth, kCardHeight};
    bool taken = std::any_of(s.cards.begin(), s.cards.end(), [&](const session::Card& c) { return c.bounds().intersects(r); });
    if (!taken) return {r.x, r.y};
  }
}

std::string next_card_id(const Context& ctx, std::string_view prefix) {
  std::size_t n = ctx.session.log().size() + 1;
  std::string id;
  do id = std::string(prefix) + std::to_string(n++);
  while (ctx.session.state().find_card(id));
  return id;
}

data::Value literal_value(const data::Dataset& ds, const std::string& column, const std::string& text) {
  const auto& col = ds.column(column);
  auto v = data::coerce(text, col.type);
  if (!v) invalid("'" + text + "' is not a valid " + std::string(data::to_string(col.type)) + " for column '" +
                  column + "'");
  return *v;
}

data::FilterSpec filter_of(const data::Dataset& ds, const intent::Args& a) {
  std::vector<data::Value> vs;
  for (const auto& lit : a.literals) vs.push_back(literal_value(ds, a.column, lit));
  switch (a.op) {
    case data::FilterOp::Eq: return data::FilterSpec::eq(a.column, vs.at(0));
    case data::FilterOp::Neq: return data::FilterSpec::neq(a.column, vs.at(0));
    case data::FilterOp::In: return data::FilterSpec::in(a.column, std::move(vs));
    case data::FilterOp::Range: return data::FilterSpec::range(a.column, vs.at(0), vs.at(1));
  }
  invalid("unsupported filter operator");
}

const session::Card& target_card(const Context& ctx, const std::optional<std::string>& anchor) {
  const auto& s = ctx.session.state();
  if (anchor) {
    if (const auto* c = s.find_card(*anchor)) return *c;
    invalid("no card '" + *anchor + "'");
  }
  for (auto it = s.cards.rbegin(); it != s.cards.rend(); ++it)
    if (it->visible) return *it;
  invalid("there is no card to act on");
}

std::optional<std::string> anchor_of(const intent::IntentCommand& cmd, const UtteranceOptions& opts) {
  if (cmd.binding && cmd.binding->anchor_card) return cmd.binding->anchor_card;
  return opts.anchor_card;
}

Json command_json(const intent::IntentCommand& cmd, const config::Config& cfg) {
  return Json{{"command", intent::format(cmd)},
              {"confidence", cmd.confidence},
              {"tier", std::string(intent::to_string(intent::confidence_tier(cmd, cfg.tiers)))}};
}

Json report_json(const data::SelectionReport& r) {
  Json features = Json::array();
  for (const auto& f : r.features)
    features.push_back({{"column", f.column},
                        {"kind", f.kind == data::FeatureKind::Numeric ? "numeric" : "categorical"},
                        {"score", f.score},
                        {"detail", f.detail}});
  return Json{{"features", std::move(features)},
              {"selection_size", r.selection_size},
              {"complement_size", r.complement_size},
              {"low_support", r.low_support},
              {"explanation", r.explanation}};
}

Plan characterize(const Context& ctx, std::vector<std::size_t> rows, const std::optional<std::string>& selection_hash) {
  if (rows.empty()) throw Error(ErrorCode::NeedsSelection, "the question needs a selection of rows");
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  Plan p;
  p.ack = report_json(data::characterize_selection(ctx.dataset, rows));
  p.ack["status"] = "report";
  p.ack["stale"] = selection_hash.has_value() && *selection_hash != ctx.session.state().state_hash;
  return p;
}

StateDelta chat_delta(session::DeltaPayload payload, const intent::IntentCommand& cmd, std::string_view text) {
  StateDelta d;
  d.payload = std::move(payload);
  d.origin = session::Origin::Chat;
  d.confidence = cmd.confidence;
  d.annotation = std::string(text);
  return d;
}

// A string column holding both values, exact match first, then ignoring case.
std::optional<std::pair<std::string, std::pair<std::string, std::string>>> value_pair_column(
    const data::Dataset& ds, const std::string& a, const std::string& b) {
  for (bool fold : {false, true}) {
    for (const auto& col : ds.columns()) {
      if (col.type != data::ColumnType::String) continue;
      std::optional<std::string> va, vb;
      for (const auto& cell : col.cells) {
        const auto* s = std::get_if<std::string>(&cell);
        if (!s) continue;
        if (!va && (fold ? lower(*s) == lower(a) : *s == a)) va = *s;
        if (!vb && (fold ? lower(*s) == lower(b) : *s == b)) vb = *s;
      }
      if (va && vb) return std::make_pair(col.name, std::make_pair(*va, *vb));
    }
  }
  return std::nullopt;
}

Plan interpret(const Context& ctx, const config::Config& cfg, const intent::IntentCommand& cmd,
               std::string_view text, const UtteranceOptions& opts) {
  using namespace session::delta;
  const auto& s = ctx.session.state();
  const auto& ds = ctx.dataset;
  Plan p;
  p.ack = command_json(cmd, cfg);
  auto add = [&](session::DeltaPayload payload) { p.deltas.push_back(chat_delta(std::move(payload), cmd, text)); };

  switch (cmd.verb) {
    case intent::Verb::Filter:
      add(AddFilter{filter_of(ds, cmd.args)});
      break;

    case intent::Verb::Show: {
      session::Card c;
      c.id = next_card_id(ctx, "c");
      c.kind = session::CardKind::Chart;
      c.position = free_slot(s);
      c.query.aggregate = cmd.args.aggregate;
      c.query.target = cmd.args.measure;
      c.query.group_by = {cmd.args.column};
      if (ds.column(cmd.args.column).type == data::ColumnType::Timestamp) c.query.time_bucket = data::TimeBucket::Month;
      p.ack["card_id"] = c.id;
      add(AddCard{std::move(c)});
      break;
    }

    case intent::Verb::Breakdown: {
      if (!cmd.binding) {
        add(SetGroupBy{{cmd.args.column}});
        break;
      }
      auto anchor = anchor_of(cmd, opts);
      if (!anchor) throw Error(ErrorCode::NeedsSelection, "breaking down 'this' needs an anchor card");
      const auto& parent = target_card(ctx, anchor);
      session::Card c;
      c.id = next_card_id(ctx, "c");
      c.kind = parent.kind == session::CardKind::Table ? session::CardKind::Table : session::CardKind::Chart;
      c.position = free_slot(s);
      c.query = parent.query;
      if (std::find(c.query.group_by.begin(), c.query.group_by.end(), cmd.args.column) == c.query.group_by.end())
        c.query.group_by.push_back(cmd.args.column);
      if (ds.column(cmd.args.column).type == data::ColumnType::Timestamp && !c.query.time_bucket)
        c.query.time_bucket = data::TimeBucket::Month;
      c.parent_links = {parent.id};
      p.ack["card_id"] = c.id;
      add(AddCard{std::move(c)});
      break;
    }

    case intent::Verb::Compare: {
      auto resolve = [&](const std::string& ref) -> std::string {
        for (auto w : {intent::DeicticWord::This, intent::DeicticWord::These, intent::DeicticWord::That})
          if (lower(ref) == intent::to_string(w)) {
            auto anchor = anchor_of(cmd, opts);
            if (!anchor) throw Error(ErrorCode::NeedsSelection, "'" + ref + "' needs an anchor card");
            return *anchor;
          }
        return ref;
      };
      const std::string left = resolve(cmd.args.left), right = resolve(cmd.args.right);
      const auto* lc = s.find_card(left);
      const auto* rc = s.find_card(right);
      if (lc && rc) {
        // Side by side: the right card moves next to the left one.
        add(MoveCard{rc->id, {lc->position.x + lc->size.width + workspace::kCardGap, lc->position.y}});
        break;
      }
      auto found = value_pair_column(ds, left, right);
      if (!found)
        invalid("'" + left + "' and '" + right + "' are neither cards nor values of one column");
      session::Card c;
      c.id = next_card_id(ctx, "c");
      c.kind = session::CardKind::Chart;
      c.position = free_slot(s);
      c.query.filters = {data::FilterSpec::in(found->first, {found->second.first, found->second.second})};
      c.query.group_by = {found->first};
      p.ack["card_id"] = c.id;
      add(AddCard{std::move(c)});
      break;
    }

    case intent::Verb::Zoom: {
      const auto& card = target_card(ctx, anchor_of(cmd, opts));
      const int level = std::clamp(card.zoom_level + (cmd.args.zoom == intent::ZoomDirection::In ? 1 : -1), 0, 2);
      p.ack["card_id"] = card.id;
      if (level != card.zoom_level) add(SetZoom{card.id, level});
      break;
    }

    case intent::Verb::Remove:
      if (cmd.args.remove_index)
        add(RemoveFilter{*cmd.args.remove_index});
      else
        add(RemoveFilter{cmd.args.column});
      break;

    case intent::Verb::Summarize: {
      data::QuerySpec q;
      if (auto anchor = anchor_of(cmd, opts)) {
        q = target_card(ctx, anchor).query;
      } else if (s.group_by) {
        q.group_by = *s.group_by;
      }
      auto view = data::zoom_view(ds, working_query(s, q), 0);
      p.ack["status"] = "answered";
      p.ack["text"] = std::get<data::SummaryView>(view).sentence;
      break;
    }

    case intent::Verb::Analyze: {
      auto plan = workspace::plan_workspace(cmd, ds, next_card_id(ctx, "ws"));
      p.ack["explanation"] = plan.explanation;
      if (plan.empty()) {
        p.ack["status"] = "answered";
        break;
      }
      for (auto& d : plan.deltas) {
        d.annotation = std::string(text);
        p.deltas.push_back(std::move(d));
      }
      break;
    }

    case intent::Verb::Characterize: {
      std::vector<std::size_t> rows = cmd.binding ? cmd.binding->row_ids : opts.selection;
      auto report = characterize(ctx, std::move(rows), opts.selection_hash);
      report.ack.update(command_json(cmd, cfg));
      return report;
    }
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

Gateway::Gateway(config::Config config, session::Clock clock) : config_(std::move(config)), clock_(std::move(clock)) {
  config::validate(config_);
}

Gateway::~Gateway() = default;

std::shared_ptr<Gateway::Context> Gateway::make_context(session::Session s, data::Dataset ds,
                                                        session::ViewMode mode) const {
  auto ctx = std::make_shared<Context>(std::move(s), std::move(ds), mode);
  // Telemetry for the initial state and every record already in the log.
  session::SessionState state = ctx->session.initial();
  ctx->telemetry.push_back({0, state_overload(state, mode, config_)});
  for (const auto& r : ctx->session.log()) {
    state = session::apply_delta(state, r.delta);
    ctx->telemetry.push_back({r.seq, state_overload(state, mode, config_)});
  }
  return ctx;
}

std::shared_ptr<Gateway::Context> Gateway::add(std::shared_ptr<Context> ctx) {
  std::lock_guard lock(mutex_);
  const std::string id = ctx->session.state().session_id;
  if (sessions_.count(id)) invalid("session '" + id + "' already exists");
  sessions_.emplace(id, ctx);
  return ctx;
}

std::string Gateway::create_session(data::Dataset dataset, SessionOptions options) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    if (options.session_id) {
      id = *options.session_id;
      if (id.empty()) invalid("session id is empty");
    } else {
      do id = "s" + std::to_string(next_id_++);
      while (sessions_.count(id));
    }
  }
  session::Session s(id, dataset.schema(), clock_);
  add(make_context(std::move(s), std::move(dataset), options.view_mode.value_or(config_.gateway.view_mode)));
  return id;
}

std::string Gateway::restore_snapshot(std::string_view snapshot, data::Dataset dataset, SessionOptions options) {
  auto state = store::read_snapshot_text(snapshot);
  if (options.session_id && *options.session_id != state.session_id)
    invalid("snapshot belongs to session '" + state.session_id + "'");
  const auto schema = dataset.schema();
  for (const auto& f : session::effective_filters(state)) data::validate_filter(schema, f);
  for (const auto& c : state.cards) data::validate_query(schema, c.query);
  session::Session s(std::move(state), schema, clock_);
  const std::string id = s.state().session_id;
  add(make_context(std::move(s), std::move(dataset), options.view_mode.value_or(config_.gateway.view_mode)));
  return id;
}

std::string Gateway::restore_provenance(const store::ProvenanceFile& file, data::Dataset dataset,
                                        SessionOptions options) {
  if (options.session_id && *options.session_id != file.initial.session_id)
    invalid("provenance belongs to session '" + file.initial.session_id + "'");
  if (file.schema && *file.schema != dataset.schema()) invalid("dataset schema differs from the recorded one");
  session::Session s(file.initial, file.log, dataset.schema(), clock_);
  const std::string id = s.state().session_id;
  add(make_context(std::move(s), std::move(dataset), options.view_mode.value_or(config_.gateway.view_mode)));
  return id;
}

std::shared_ptr<Gateway::Context> Gateway::find(std::string_view id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool Gateway::has_session(std::string_view id) const { return find(id) != nullptr; }

std::vector<std::string> Gateway::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

namespace {

template <class Ptr>
Ptr& require(Ptr& ctx, std::string_view id) {
  if (!ctx) invalid("unknown session '" + std::string(id) + "'");
  return ctx;
}

}  // namespace

Reply Gateway::handle_utterance(const std::string& id, std::string_view text, const UtteranceOptions& opts,
                                std::uint64_t seq) {
  auto ctx = find(id);
  if (!ctx) return error_reply(id, seq, Error(ErrorCode::Validation, "unknown session '" + id + "'"));
  std::lock_guard lock(ctx->mutex);
  try {
    intent::IntentCommand cmd;
    try {
      cmd = intent::parse(text, ctx->columns);
    } catch (const intent::UnparseableError&) {
      ctx->unapplied.push_back({clock_(), std::string(text), "unparseable"});
      throw;
    }
    if (intent::confidence_tier(cmd, config_.tiers) == intent::Tier::NeedsConfirmation) {
      ctx->unapplied.push_back({clock_(), std::string(text), "needs_confirmation"});
      Json p = command_json(cmd, config_);
      p["status"] = "needs_confirmation";
      Json alts = Json::array();
      for (const auto& a : cmd.alternatives) alts.push_back({{"command", intent::format(a)}, {"confidence", a.confidence}});
      p["alternatives"] = std::move(alts);
      return {ack(id, seq, std::move(p)), {}};
    }
    if (!cmd.resolved()) {
      if (cmd.verb == intent::Verb::Characterize && opts.selection.empty())
        throw Error(ErrorCode::NeedsSelection, "the question needs a selection of rows");
      if (cmd.verb != intent::Verb::Compare || !opts.selection.empty() || opts.anchor_card)
        cmd = intent::resolve_deixis(cmd, opts.selection, opts.anchor_card);
    }
    return commit(*ctx, config_, seq, interpret(*ctx, config_, cmd, text, opts));
  } catch (const Error& e) {
    return error_reply(id, seq, e);
  }
}

Reply Gateway::handle_delta(const std::string& id, const StateDelta& delta, std::uint64_t seq) {
  auto ctx = find(id);
  if (!ctx) return error_reply(id, seq, Error(ErrorCode::Validation, "unknown session '" + id + "'"));
  std::lock_guard lock(ctx->mutex);
  try {
    if (delta.origin != session::Origin::Direct) invalid("client deltas must have origin direct");
    Plan p;
    p.deltas.push_back(delta);
    return commit(*ctx, config_, seq, std::move(p));
  } catch (const Error& e) {
    return error_reply(id, seq, e);
  }
}

Reply Gateway::handle_selection_question(const std::string& id, const std::vector<std::size_t>& row_ids,
                                         std::string_view text, std::optional<std::string> selection_hash,
                                         std::uint64_t seq) {
  if (row_ids.empty())
    return error_reply(id, seq, Error(ErrorCode::NeedsSelection, "the question needs a selection of rows"));
  UtteranceOptions opts;
  opts.selection = row_ids;
  opts.selection_hash = std::move(selection_hash);
  return handle_utterance(id, text, opts, seq);
}

Reply Gateway::handle(const Message& req) {
  const auto& id = req.session_id;
  try {
    const Json& p = req.payload;
    auto ids = [&](const char* key) {
      std::vector<std::size_t> out;
      if (!p.contains(key)) return out;
      const Json& a = p.at(key);
      if (!a.is_array()) invalid(std::string("'") + key + "' must be an array of row ids");
      for (const auto& x : a) {
        if (!x.is_number_unsigned()) invalid(std::string("'") + key + "' must hold non-negative integers");
        out.push_back(x.get<std::size_t>());
      }
      return out;
    };
    auto opt_string = [&](const char* key) -> std::optional<std::string> {
      if (!p.contains(key) || p.at(key).is_null()) return std::nullopt;
      return codec::get_string(p, key);
    };

    switch (req.kind) {
      case MessageKind::Utterance: {
        UtteranceOptions o{ids("selection"), opt_string("anchor_card"), opt_string("selection_hash")};
        return handle_utterance(id, codec::get_string(p, "text"), o, req.seq);
      }
      case MessageKind::Delta: {
        Json d = p;
        if (!d.contains("origin")) d["origin"] = "direct";
        if (!d.contains("confidence")) d["confidence"] = 1.0;
        return handle_delta(id, session::decode_delta(d), req.seq);
      }
      case MessageKind::SelectionQuestion:
        return handle_selection_question(id, ids("row_ids"), codec::get_string(p, "text"),
                                         opt_string("selection_hash"), req.seq);
      case MessageKind::StateView: {
        auto ctx = find(id);
        require(ctx, id);
        std::lock_guard lock(ctx->mutex);
        return {{MessageKind::StateView, id, req.seq, encode(build_view(*ctx, config_))}, {}};
      }
      case MessageKind::TelemetryView: {
        auto ctx = find(id);
        require(ctx, id);
        std::lock_guard lock(ctx->mutex);
        Json un = Json::array();
        for (const auto& u : ctx->unapplied)
          un.push_back({{"timestamp_ms", u.timestamp_ms}, {"text", u.text}, {"outcome", u.outcome}});
        return {{MessageKind::TelemetryView, id, req.seq,
                 Json{{"points", telemetry_json(ctx->telemetry, 0)}, {"unapplied", std::move(un)}}},
                {}};
      }
      case MessageKind::CardView: {
        Message m = card_view(id, codec::get_string(p, "card_id"));
        m.seq = req.seq;
        return {std::move(m), {}};
      }
      case MessageKind::Error:
      case MessageKind::Ack:
        invalid(std::string(to_string(req.kind)) + " is not a request kind");
    }
    invalid("unknown message kind");
  } catch (const Error& e) {
    return error_reply(id, req.seq, e);
  }
}

StateViewModel Gateway::state_view(const std::string& id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  return build_view(*ctx, config_);
}

std::vector<TelemetryPoint> Gateway::telemetry(const std::string& id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  return ctx->telemetry;
}

std::vector<UnappliedUtterance> Gateway::unapplied(const std::string& id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  return ctx->unapplied;
}

Message Gateway::card_view(const std::string& id, const std::string& card_id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  const auto* card = ctx->session.state().find_card(card_id);
  if (!card) invalid("no card '" + card_id + "'");
  return {MessageKind::CardView, id, 0, card_payload(*ctx, *card, config_)};
}

session::SessionState Gateway::state(const std::string& id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  return ctx->session.state();
}

std::string Gateway::snapshot(const std::string& id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  return store::snapshot_text(ctx->session.state());
}

store::ProvenanceFile Gateway::provenance(const std::string& id) const {
  auto ctx = find(id);
  require(ctx, id);
  std::lock_guard lock(ctx->mutex);
  return store::export_session(ctx->session);
}

std::vector<Message> Gateway::pushes(const std::string& id, std::uint64_t after, std::chrono::milliseconds wait) const {
  auto ctx = find(id);
  require(ctx, id);
  std::unique_lock lock(ctx->mutex);
  if (wait.count() > 0) ctx->arrived.wait_for(lock, wait, [&] { return ctx->pushes.size() > after; });
  if (after >= ctx->pushes.size()) return {};
  return {ctx->pushes.begin() + static_cast<std::ptrdiff_t>(after), ctx->pushes.end()};
}

}  // namespace keyhole::gateway
