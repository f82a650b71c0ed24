#include "keyhole/session.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "keyhole/error.hpp"

namespace keyhole::session {

using codec::Json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::Validation, what); }

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<E, std::string_view>, N>& table,
                        std::string_view text) {
  for (const auto& [e, name] : table)
    if (name == text) return e;
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [k, name] : table)
    if (k == e) return name;
  return "unknown";
}

constexpr std::array<std::pair<CardKind, std::string_view>, 4> kCardKinds{{
    {CardKind::Chart, "chart"},
    {CardKind::Table, "table"},
    {CardKind::Summary, "summary"},
    {CardKind::Hypothesis, "hypothesis"},
}};
constexpr std::array<std::pair<AggregationLevel, std::string_view>, 3> kLevels{{
    {AggregationLevel::Raw, "raw"},
    {AggregationLevel::Bucketed, "bucketed"},
    {AggregationLevel::Summary, "summary"},
}};
constexpr std::array<std::pair<Origin, std::string_view>, 3> kOrigins{{
    {Origin::Chat, "chat"},
    {Origin::Direct, "direct"},
    {Origin::System, "system"},
}};
constexpr std::array<std::pair<ViewMode, std::string_view>, 3> kModes{{
    {ViewMode::ChatOnly, "chat_only"},
    {ViewMode::Rail, "rail"},
    {ViewMode::Canvas, "canvas"},
}};

}  // namespace

std::string_view to_string(CardKind kind) { return name_of(kCardKinds, kind); }
std::string_view to_string(AggregationLevel level) { return name_of(kLevels, level); }
std::string_view to_string(Origin origin) { return name_of(kOrigins, origin); }
std::string_view to_string(ViewMode mode) { return name_of(kModes, mode); }
std::optional<CardKind> parse_card_kind(std::string_view t) { return lookup(kCardKinds, t); }
std::optional<AggregationLevel> parse_aggregation_level(std::string_view t) { return lookup(kLevels, t); }
std::optional<Origin> parse_origin(std::string_view t) { return lookup(kOrigins, t); }
std::optional<ViewMode> parse_view_mode(std::string_view t) { return lookup(kModes, t); }

bool Rect::intersects(const Rect& o) const {
  return x < o.x + o.width && o.x < x + width && y < o.y + o.height && o.y < y + height;
}

const Card* SessionState::find_card(std::string_view id) const {
  for (const auto& c : cards)
    if (c.id == id) return &c;
  return nullptr;
}

std::string_view action_name(const DeltaPayload& payload) {
  static constexpr std::string_view names[] = {
      "AddFilter", "RemoveFilter", "SetGroupBy", "SetTimeRange", "SetCohort", "SetAggregation",
      "AddCard",   "MoveCard",     "LinkCards",  "SetZoom",      "PinCard",   "RemoveCard"};
  return names[payload.index()];
}

// ---------------------------------------------------------------------------
// Canonical encoding

namespace {

Json encode_filters(const std::vector<data::FilterSpec>& fs) {
  Json out = Json::array();
  for (const auto& f : fs) out.push_back(codec::encode(f));
  return out;
}

std::vector<data::FilterSpec> decode_filters(const Json& j) {
  if (!j.is_array()) invalid("filters must be an array");
  std::vector<data::FilterSpec> out;
  for (const auto& f : j) out.push_back(codec::decode_filter(f));
  return out;
}

std::vector<std::string> decode_strings(const Json& j) {
  if (!j.is_array()) invalid("expected an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) invalid("expected an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

Json encode_pair(double a, double b) { return Json::array({a, b}); }

std::pair<double, double> decode_pair(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    invalid("expected a pair of numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

Json encode_card(const Card& c) {
  return Json{{"id", c.id},
              {"kind", std::string(to_string(c.kind))},
              {"position", encode_pair(c.position.x, c.position.y)},
              {"size", encode_pair(c.size.width, c.size.height)},
              {"query", codec::encode(c.query)},
              {"zoom_level", c.zoom_level},
              {"parent_links", c.parent_links},
              {"pinned", c.pinned},
              {"visible", c.visible},
              {"highlight_anomalies", c.highlight_anomalies}};
}

Card card_from_json(const Json& j) {
  Card c;
  c.id = codec::get_string(j, "id");
  auto kind = parse_card_kind(codec::get_string(j, "kind"));
  if (!kind) invalid("unknown card kind");
  c.kind = *kind;
  auto [x, y] = decode_pair(codec::field(j, "position"));
  c.position = {x, y};
  auto [w, h] = decode_pair(codec::field(j, "size"));
  c.size = {w, h};
  c.query = codec::decode_query(codec::field(j, "query"));
  c.zoom_level = static_cast<int>(codec::get_int(j, "zoom_level"));
  c.parent_links = decode_strings(codec::field(j, "parent_links"));
  c.pinned = codec::get_bool(j, "pinned");
  c.visible = codec::get_bool(j, "visible");
  c.highlight_anomalies = codec::get_bool(j, "highlight_anomalies");
  return c;
}

Json encode_time_range(const std::optional<TimeRange>& r) {
  if (!r) return nullptr;
  return Json{{"column", r->column}, {"start", r->start.seconds}, {"end", r->end.seconds}};
}

std::optional<TimeRange> decode_time_range(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return TimeRange{codec::get_string(j, "column"), {codec::get_int(j, "start")},
                   {codec::get_int(j, "end")}};
}

Json encode_cohort(const std::optional<Cohort>& c) {
  if (!c) return nullptr;
  return Json{{"name", c->name}, {"predicate", encode_filters(c->predicate)}};
}

std::optional<Cohort> decode_cohort(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return Cohort{codec::get_string(j, "name"), decode_filters(codec::field(j, "predicate"))};
}

Json encode_payload(const DeltaPayload& p) {
  return std::visit(
      [](const auto& d) -> Json {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, delta::AddFilter>) {
          return Json{{"filter", codec::encode(d.filter)}};
        } else if constexpr (std::is_same_v<T, delta::RemoveFilter>) {
          if (auto f = std::get_if<data::FilterSpec>(&d.target)) return Json{{"filter", codec::encode(*f)}};
          if (auto c = std::get_if<std::string>(&d.target)) return Json{{"column", *c}};
          return Json{{"index", std::get<std::size_t>(d.target)}};
        } else if constexpr (std::is_same_v<T, delta::SetGroupBy>) {
          return Json{{"columns", d.columns}};
        } else if constexpr (std::is_same_v<T, delta::SetTimeRange>) {
          return Json{{"range", encode_time_range(d.range)}};
        } else if constexpr (std::is_same_v<T, delta::SetCohort>) {
          return Json{{"cohort", encode_cohort(d.cohort)}};
        } else if constexpr (std::is_same_v<T, delta::SetAggregation>) {
          return Json{{"level", std::string(to_string(d.level))}};
        } else if constexpr (std::is_same_v<T, delta::AddCard>) {
          return Json{{"card", encode_card(d.card)}};
        } else if constexpr (std::is_same_v<T, delta::MoveCard>) {
          return Json{{"id", d.id}, {"position", encode_pair(d.position.x, d.position.y)}};
        } else if constexpr (std::is_same_v<T, delta::LinkCards>) {
          return Json{{"parent", d.parent}, {"child", d.child}};
        } else if constexpr (std::is_same_v<T, delta::SetZoom>) {
          return Json{{"id", d.id}, {"level", d.level}};
        } else if constexpr (std::is_same_v<T, delta::PinCard>) {
          return Json{{"id", d.id}, {"pinned", d.pinned}};
        } else {
          return Json{{"id", d.id}};
        }
      },
      p);
}

DeltaPayload decode_payload(std::string_view action, const Json& j) {
  using namespace codec;
  if (action == "AddFilter") return delta::AddFilter{decode_filter(field(j, "filter"))};
  if (action == "RemoveFilter") {
    if (j.contains("filter")) return delta::RemoveFilter{decode_filter(j["filter"])};
    if (j.contains("column")) return delta::RemoveFilter{get_string(j, "column")};
    std::int64_t index = get_int(j, "index");
    if (index < 1) invalid("filter positions start at 1");
    return delta::RemoveFilter{static_cast<std::size_t>(index)};
  }
  if (action == "SetGroupBy") return delta::SetGroupBy{decode_strings(field(j, "columns"))};
  if (action == "SetTimeRange") return delta::SetTimeRange{decode_time_range(field(j, "range"))};
  if (action == "SetCohort") return delta::SetCohort{decode_cohort(field(j, "cohort"))};
  if (action == "SetAggregation") {
    auto level = parse_aggregation_level(get_string(j, "level"));
    if (!level) invalid("unknown aggregation level");
    return delta::SetAggregation{*level};
  }
  if (action == "AddCard") return delta::AddCard{card_from_json(field(j, "card"))};
  if (action == "MoveCard") {
    auto [x, y] = decode_pair(field(j, "position"));
    return delta::MoveCard{get_string(j, "id"), {x, y}};
  }
  if (action == "LinkCards") return delta::LinkCards{get_string(j, "parent"), get_string(j, "child")};
  if (action == "SetZoom")
    return delta::SetZoom{get_string(j, "id"), static_cast<int>(get_int(j, "level"))};
  if (action == "PinCard") return delta::PinCard{get_string(j, "id"), get_bool(j, "pinned")};
  if (action == "RemoveCard") return delta::RemoveCard{get_string(j, "id")};
  invalid("unknown action '" + std::string(action) + "'");
}

}  // namespace

Json canonical_json(const SessionState& s) {
  Json cards = Json::array();
  for (const auto& c : s.cards) cards.push_back(encode_card(c));
  return Json{{"session_id", s.session_id},
              {"filters", encode_filters(s.active_filters)},
              {"group_by", s.group_by ? Json(*s.group_by) : Json(nullptr)},
              {"time_range", encode_time_range(s.time_range)},
              {"cohort", encode_cohort(s.cohort)},
              {"aggregation_level", std::string(to_string(s.aggregation_level))},
              {"cards", std::move(cards)},
              {"rail_enabled", s.rail_enabled}};
}

Json encode(const Card& card) { return encode_card(card); }
Card decode_card(const Json& j) { return card_from_json(j); }

namespace {

// Writes the bytes canonical_json(state).dump() would produce without
// building the tree: keys in sorted order, no whitespace, strings and
// numbers formatted exactly as the JSON library formats them. Hashing runs
// on every applied delta, so this path matters.
class CanonicalWriter {
 public:
  std::string out;

  void raw(std::string_view text) { out.append(text); }
  void key(std::string_view k) {
    str(k);
    out.push_back(':');
  }

  void str(std::string_view s) {
    for (unsigned char ch : s)
      if (ch >= 0x80) {
        // Non-ASCII: let the library validate UTF-8 and escape.
        out += Json(std::string(s)).dump();
        return;
      }
    out.push_back('"');
    for (unsigned char ch : s) {
      switch (ch) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\b': out += "\\b"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\f': out += "\\f"; break;
        case '\r': out += "\\r"; break;
        default:
          if (ch < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", ch);
            out += buf;
          } else {
            out.push_back(static_cast<char>(ch));
          }
      }
    }
    out.push_back('"');
  }

  void number(double x) {
    if (!std::isfinite(x)) {
      out += "null";
      return;
    }
    char buf[64];
    char* end = nlohmann::detail::to_chars(buf, buf + sizeof buf, x);
    out.append(buf, end);
  }
  void integer(std::int64_t x) { out += std::to_string(x); }
  void boolean(bool b) { out += b ? "true" : "false"; }

  template <class T, class F>
  void array(const std::vector<T>& xs, F&& each) {
    out.push_back('[');
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out.push_back(',');
      each(xs[i]);
    }
    out.push_back(']');
  }
  void strings(const std::vector<std::string>& xs) {
    array(xs, [&](const std::string& x) { str(x); });
  }
  void pair(double a, double b) {
    out.push_back('[');
    number(a);
    out.push_back(',');
    number(b);
    out.push_back(']');
  }

  void value(const data::Value& v) {
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, std::monostate>) {
            raw("null");
          } else if constexpr (std::is_same_v<T, data::Timestamp>) {
            raw("{\"t\":");
            integer(x.seconds);
            out.push_back('}');
          } else if constexpr (std::is_same_v<T, bool>) {
            boolean(x);
          } else if constexpr (std::is_same_v<T, double>) {
            number(x);
          } else {
            str(x);
          }
        },
        v);
  }

  void filter(const data::FilterSpec& f) {
    raw("{\"column\":");
    str(f.column);
    raw(",\"hi\":");
    value(f.hi);
    raw(",\"lo\":");
    value(f.lo);
    raw(",\"op\":");
    str(data::to_string(f.op));
    raw(",\"values\":");
    array(f.values, [&](const data::Value& v) { value(v); });
    out.push_back('}');
  }
  void filters(const std::vector<data::FilterSpec>& fs) {
    array(fs, [&](const data::FilterSpec& f) { filter(f); });
  }

  void query(const data::QuerySpec& q) {
    raw("{\"aggregate\":");
    str(data::to_string(q.aggregate));
    raw(",\"filters\":");
    filters(q.filters);
    raw(",\"group_by\":");
    strings(q.group_by);
    raw(",\"target\":");
    if (q.target) str(*q.target); else raw("null");
    raw(",\"time_bucket\":");
    if (q.time_bucket) str(data::to_string(*q.time_bucket)); else raw("null");
    out.push_back('}');
  }

  void card(const Card& c) {
    raw("{\"highlight_anomalies\":");
    boolean(c.highlight_anomalies);
    raw(",\"id\":");
    str(c.id);
    raw(",\"kind\":");
    str(to_string(c.kind));
    raw(",\"parent_links\":");
    strings(c.parent_links);
    raw(",\"pinned\":");
    boolean(c.pinned);
    raw(",\"position\":");
    pair(c.position.x, c.position.y);
    raw(",\"query\":");
    query(c.query);
    raw(",\"size\":");
    pair(c.size.width, c.size.height);
    raw(",\"visible\":");
    boolean(c.visible);
    raw(",\"zoom_level\":");
    integer(c.zoom_level);
    out.push_back('}');
  }

  void state(const SessionState& s) {
    raw("{\"aggregation_level\":");
    str(to_string(s.aggregation_level));
    raw(",\"cards\":");
    array(s.cards, [&](const Card& c) { card(c); });
    raw(",\"cohort\":");
    if (s.cohort) {
      raw("{\"name\":");
      str(s.cohort->name);
      raw(",\"predicate\":");
      filters(s.cohort->predicate);
      out.push_back('}');
    } else {
      raw("null");
    }
    raw(",\"filters\":");
    filters(s.active_filters);
    raw(",\"group_by\":");
    if (s.group_by) strings(*s.group_by); else raw("null");
    raw(",\"rail_enabled\":");
    boolean(s.rail_enabled);
    raw(",\"session_id\":");
    str(s.session_id);
    raw(",\"time_range\":");
    if (s.time_range) {
      raw("{\"column\":");
      str(s.time_range->column);
      raw(",\"end\":");
      integer(s.time_range->end.seconds);
      raw(",\"start\":");
      integer(s.time_range->start.seconds);
      out.push_back('}');
    } else {
      raw("null");
    }
    out.push_back('}');
  }
};

}  // namespace

std::string canonical_text(const SessionState& state) {
  CanonicalWriter w;
  w.out.reserve(256 + 320 * state.cards.size());
  w.state(state);
  return std::move(w.out);
}

std::string compute_hash(const SessionState& state) {
  const std::string text = canonical_text(state);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

SessionState make_state(std::string session_id) {
  SessionState s;
  s.session_id = std::move(session_id);
  s.state_hash = compute_hash(s);
  return s;
}

SessionState decode_state(const Json& j) {
  SessionState s;
  s.session_id = codec::get_string(j, "session_id");
  s.active_filters = decode_filters(codec::field(j, "filters"));
  const Json& group = codec::field(j, "group_by");
  if (!group.is_null()) {
    s.group_by = decode_strings(group);
    if (s.group_by->empty()) invalid("group_by must be null or non-empty");
  }
  s.time_range = decode_time_range(codec::field(j, "time_range"));
  s.cohort = decode_cohort(codec::field(j, "cohort"));
  auto level = parse_aggregation_level(codec::get_string(j, "aggregation_level"));
  if (!level) invalid("unknown aggregation level");
  s.aggregation_level = *level;
  const Json& cards = codec::field(j, "cards");
  if (!cards.is_array()) invalid("cards must be an array");
  for (const auto& c : cards) s.cards.push_back(card_from_json(c));
  s.rail_enabled = codec::get_bool(j, "rail_enabled");
  s.state_hash = compute_hash(s);
  return s;
}

Json encode(const StateDelta& d) {
  return Json{{"action", std::string(action_name(d.payload))},
              {"payload", encode_payload(d.payload)},
              {"origin", std::string(to_string(d.origin))},
              {"confidence", d.confidence},
              {"annotation", d.annotation}};
}

StateDelta decode_delta(const Json& j) {
  StateDelta d;
  d.payload = decode_payload(codec::get_string(j, "action"), codec::field(j, "payload"));
  auto origin = parse_origin(codec::get_string(j, "origin"));
  if (!origin) invalid("unknown origin");
  d.origin = *origin;
  d.confidence = codec::get_number(j, "confidence");
  d.annotation = j.contains("annotation") ? codec::get_string(j, "annotation") : std::string();
  return d;
}

Json encode(const ProvenanceRecord& r) {
  return Json{{"seq", r.seq},
              {"timestamp_ms", r.timestamp_ms},
              {"delta", encode(r.delta)},
              {"resulting_hash", r.resulting_hash}};
}

ProvenanceRecord decode_record(const Json& j) {
  ProvenanceRecord r;
  std::int64_t seq = codec::get_int(j, "seq");
  if (seq < 1) invalid("seq must be positive");
  r.seq = static_cast<std::uint64_t>(seq);
  r.timestamp_ms = codec::get_int(j, "timestamp_ms");
  r.delta = decode_delta(codec::field(j, "delta"));
  r.resulting_hash = codec::get_string(j, "resulting_hash");
  return r;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool finite_value(const data::Value& v) {
  auto d = std::get_if<double>(&v);
  return !d || std::isfinite(*d);
}

// Structural checks that hold with or without a schema.
void check_filter(const data::FilterSpec& f, const data::Schema* schema) {
  if (schema) {
    data::validate_filter(*schema, f);
    return;
  }
  if (f.column.empty()) invalid("filter column is empty");
  for (const auto& v : f.values)
    if (!finite_value(v)) invalid("filter literal is not finite");
  if (!finite_value(f.lo) || !finite_value(f.hi)) invalid("filter bound is not finite");
  switch (f.op) {
    case data::FilterOp::Eq:
    case data::FilterOp::Neq:
      if (f.values.size() != 1 || data::is_missing(f.values[0])) invalid("filter needs one literal");
      break;
    case data::FilterOp::In:
      if (f.values.empty()) invalid("'in' filter needs at least one literal");
      break;
    case data::FilterOp::Range:
      if (data::is_missing(f.lo) || data::is_missing(f.hi) || f.lo.index() != f.hi.index())
        invalid("range needs two bounds of one type");
      if (f.hi < f.lo) invalid("range lower bound exceeds upper bound");
      break;
  }
}

void check_column(const std::string& column, const data::Schema* schema) {
  if (column.empty()) invalid("column name is empty");
  if (schema && !data::find_column(*schema, column))
    throw Error(ErrorCode::Schema, "unknown column '" + column + "'");
}

void check_query(const data::QuerySpec& q, const data::Schema* schema) {
  if (schema) {
    data::validate_query(*schema, q);
    return;
  }
  for (const auto& f : q.filters) check_filter(f, nullptr);
  if (q.aggregate != data::Aggregate::Count && !q.target) invalid("aggregate needs a target column");
}

void check_finite(double a, double b, const char* what) {
  if (!std::isfinite(a) || !std::isfinite(b)) invalid(std::string(what) + " must be finite");
}

const Card& require_card(const SessionState& s, const std::string& id) {
  const Card* c = s.find_card(id);
  if (!c) invalid("unknown card '" + id + "'");
  return *c;
}

// True if `target` is reachable from `from` by following parent links.
bool reaches(const SessionState& s, const std::string& from, const std::string& target) {
  std::vector<std::string> stack{from};
  std::vector<std::string> seen;
  while (!stack.empty()) {
    std::string id = std::move(stack.back());
    stack.pop_back();
    if (id == target) return true;
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
    seen.push_back(id);
    if (const Card* c = s.find_card(id))
      stack.insert(stack.end(), c->parent_links.begin(), c->parent_links.end());
  }
  return false;
}

}  // namespace

void validate_delta(const SessionState& s, const StateDelta& d, const data::Schema* schema) {
  if (!(d.confidence > 0 && d.confidence <= 1)) invalid("delta confidence must be in (0, 1]");
  if (d.origin == Origin::Direct && d.confidence != 1.0)
    invalid("direct manipulation carries confidence 1");

  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, delta::AddFilter>) {
          check_filter(p.filter, schema);
        } else if constexpr (std::is_same_v<T, delta::RemoveFilter>) {
          if (auto f = std::get_if<data::FilterSpec>(&p.target)) check_filter(*f, schema);
          if (auto c = std::get_if<std::string>(&p.target)) check_column(*c, schema);
          if (auto i = std::get_if<std::size_t>(&p.target); i && *i == 0)
            invalid("filter positions start at 1");
        } else if constexpr (std::is_same_v<T, delta::SetGroupBy>) {
          for (std::size_t i = 0; i < p.columns.size(); ++i) {
            check_column(p.columns[i], schema);
            if (std::find(p.columns.begin(), p.columns.begin() + i, p.columns[i]) != p.columns.begin() + i)
              invalid("duplicate group column '" + p.columns[i] + "'");
          }
        } else if constexpr (std::is_same_v<T, delta::SetTimeRange>) {
          if (p.range) {
            check_column(p.range->column, schema);
            if (schema && data::find_column(*schema, p.range->column)->type != data::ColumnType::Timestamp)
              throw Error(ErrorCode::Query, "time range column must hold timestamps");
            if (p.range->end < p.range->start) invalid("time range ends before it starts");
          }
        } else if constexpr (std::is_same_v<T, delta::SetCohort>) {
          if (p.cohort) {
            if (p.cohort->name.empty()) invalid("cohort needs a name");
            if (p.cohort->predicate.empty()) invalid("cohort needs a predicate");
            for (const auto& f : p.cohort->predicate) check_filter(f, schema);
          }
        } else if constexpr (std::is_same_v<T, delta::SetAggregation>) {
        } else if constexpr (std::is_same_v<T, delta::AddCard>) {
          const Card& c = p.card;
          if (c.id.empty()) invalid("card id is empty");
          if (s.find_card(c.id)) invalid("card id '" + c.id + "' already exists");
          if (c.zoom_level < 0 || c.zoom_level > 2) throw Error(ErrorCode::Range, "zoom level must be 0, 1 or 2");
          check_finite(c.position.x, c.position.y, "card position");
          check_finite(c.size.width, c.size.height, "card size");
          if (c.size.width <= 0 || c.size.height <= 0) invalid("card size must be positive");
          for (std::size_t i = 0; i < c.parent_links.size(); ++i) {
            require_card(s, c.parent_links[i]);
            if (std::find(c.parent_links.begin(), c.parent_links.begin() + i, c.parent_links[i]) !=
                c.parent_links.begin() + i)
              invalid("duplicate parent link");
          }
          check_query(c.query, schema);
        } else if constexpr (std::is_same_v<T, delta::MoveCard>) {
          require_card(s, p.id);
          check_finite(p.position.x, p.position.y, "card position");
        } else if constexpr (std::is_same_v<T, delta::LinkCards>) {
          require_card(s, p.parent);
          require_card(s, p.child);
          if (p.parent == p.child) invalid("a card cannot link to itself");
          if (reaches(s, p.parent, p.child)) invalid("link would create a cycle");
        } else if constexpr (std::is_same_v<T, delta::SetZoom>) {
          require_card(s, p.id);
          if (p.level < 0 || p.level > 2) throw Error(ErrorCode::Range, "zoom level must be 0, 1 or 2");
        } else {
          require_card(s, p.id);
        }
      },
      d.payload);
}

// ---------------------------------------------------------------------------
// Transitions

namespace {

Card& card_ref(SessionState& s, const std::string& id) {
  for (auto& c : s.cards)
    if (c.id == id) return c;
  invalid("unknown card '" + id + "'");
}

void mutate(SessionState& s, const DeltaPayload& payload) {
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        auto& fs = s.active_filters;
        if constexpr (std::is_same_v<T, delta::AddFilter>) {
          if (std::find(fs.begin(), fs.end(), p.filter) == fs.end()) fs.push_back(p.filter);
        } else if constexpr (std::is_same_v<T, delta::RemoveFilter>) {
          if (auto f = std::get_if<data::FilterSpec>(&p.target)) {
            std::erase(fs, *f);
          } else if (auto c = std::get_if<std::string>(&p.target)) {
            std::erase_if(fs, [&](const data::FilterSpec& x) { return x.column == *c; });
          } else {
            std::size_t i = std::get<std::size_t>(p.target);
            if (i >= 1 && i <= fs.size()) fs.erase(fs.begin() + static_cast<std::ptrdiff_t>(i - 1));
          }
        } else if constexpr (std::is_same_v<T, delta::SetGroupBy>) {
          if (p.columns.empty())
            s.group_by.reset();
          else
            s.group_by = p.columns;
        } else if constexpr (std::is_same_v<T, delta::SetTimeRange>) {
          s.time_range = p.range;
        } else if constexpr (std::is_same_v<T, delta::SetCohort>) {
          s.cohort = p.cohort;
        } else if constexpr (std::is_same_v<T, delta::SetAggregation>) {
          s.aggregation_level = p.level;
        } else if constexpr (std::is_same_v<T, delta::AddCard>) {
          s.cards.push_back(p.card);
        } else if constexpr (std::is_same_v<T, delta::MoveCard>) {
          card_ref(s, p.id).position = p.position;
        } else if constexpr (std::is_same_v<T, delta::LinkCards>) {
          auto& links = card_ref(s, p.child).parent_links;
          if (std::find(links.begin(), links.end(), p.parent) == links.end()) links.push_back(p.parent);
        } else if constexpr (std::is_same_v<T, delta::SetZoom>) {
          card_ref(s, p.id).zoom_level = p.level;
        } else if constexpr (std::is_same_v<T, delta::PinCard>) {
          card_ref(s, p.id).pinned = p.pinned;
        } else {
          std::erase_if(s.cards, [&](const Card& c) { return c.id == p.id; });
          for (auto& c : s.cards) std::erase(c.parent_links, p.id);
        }
      },
      payload);
}

}  // namespace

SessionState apply_delta(const SessionState& state, const StateDelta& d, const data::Schema* schema) {
  validate_delta(state, d, schema);
  SessionState next = state;
  mutate(next, d.payload);
  next.state_hash = compute_hash(next);
  return next;
}

std::int64_t system_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

Session::Session(std::string session_id, std::optional<data::Schema> schema, Clock clock)
    : Session(make_state(std::move(session_id)), std::move(schema), std::move(clock)) {}

Session::Session(SessionState initial, std::optional<data::Schema> schema, Clock clock)
    : initial_(std::move(initial)), schema_(std::move(schema)), clock_(std::move(clock)) {
  initial_.state_hash = compute_hash(initial_);
  state_ = initial_;
}

Session::Session(SessionState initial, std::vector<ProvenanceRecord> log,
                 std::optional<data::Schema> schema, Clock clock)
    : Session(std::move(initial), std::move(schema), std::move(clock)) {
  state_ = replay(log, initial_);
  log_ = std::move(log);
}

const ProvenanceRecord& Session::apply(const StateDelta& d) {
  SessionState next = apply_delta(state_, d, schema_ ? &*schema_ : nullptr);
  ProvenanceRecord r;
  r.seq = log_.empty() ? 1 : log_.back().seq + 1;
  r.timestamp_ms = clock_();
  r.delta = d;
  r.resulting_hash = next.state_hash;
  state_ = std::move(next);
  log_.push_back(std::move(r));
  return log_.back();
}

SessionState replay(std::span<const ProvenanceRecord> log, const SessionState& initial) {
  SessionState s = initial;
  s.state_hash = compute_hash(s);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log[i];
    if (i > 0 && r.seq != log[i - 1].seq + 1)
      throw CorruptionError(r.seq, "provenance gap before seq " + std::to_string(r.seq));
    try {
      s = apply_delta(s, r.delta, nullptr);
    } catch (const CorruptionError&) {
      throw;
    } catch (const Error& e) {
      throw CorruptionError(r.seq, "record " + std::to_string(r.seq) + " cannot be applied: " + e.what());
    }
    if (s.state_hash != r.resulting_hash)
      throw CorruptionError(r.seq, "hash mismatch at seq " + std::to_string(r.seq));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Measurement

namespace {

std::size_t non_default_vars(const SessionState& s) {
  return static_cast<std::size_t>(s.group_by.has_value()) + s.time_range.has_value() +
         s.cohort.has_value() + (s.aggregation_level != AggregationLevel::Raw);
}

bool is_view(const Card& c) { return c.kind == CardKind::Chart || c.kind == CardKind::Table; }

// Cards that count toward the working set, among those accepted by `keep`.
template <typename Pred>
std::size_t counted_cards(const SessionState& s, Pred keep) {
  std::size_t views = 0, hypotheses = 0;
  for (const auto& c : s.cards) {
    if (!keep(c)) continue;
    if (is_view(c)) ++views;
    if (c.kind == CardKind::Hypothesis) ++hypotheses;
  }
  return (views > 0 ? views - 1 : 0) + hypotheses;
}

std::string join(const std::vector<std::string>& xs, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

}  // namespace

long measure_m(const SessionState& s) {
  std::size_t views = 0, hypotheses = 0;
  for (const auto& c : s.cards) {
    if (is_view(c) && c.visible) ++views;
    if (c.kind == CardKind::Hypothesis) ++hypotheses;
  }
  return static_cast<long>(s.active_filters.size() + (views > 0 ? views - 1 : 0) + hypotheses +
                           non_default_vars(s));
}

std::vector<RailTag> rail_tags(const SessionState& s) {
  std::vector<RailTag> tags;
  for (std::size_t i = 0; i < s.active_filters.size(); ++i)
    tags.push_back({"filter", data::describe(s.active_filters[i]), i});
  if (s.group_by) tags.push_back({"group_by", "by " + join(*s.group_by, ", "), std::nullopt});
  if (s.time_range)
    tags.push_back({"time_range",
                    s.time_range->column + " from " + data::format_timestamp(s.time_range->start) +
                        " to " + data::format_timestamp(s.time_range->end),
                    std::nullopt});
  if (s.cohort) tags.push_back({"cohort", "cohort " + s.cohort->name, std::nullopt});
  if (s.aggregation_level != AggregationLevel::Raw)
    tags.push_back({"aggregation", "aggregation " + std::string(to_string(s.aggregation_level)),
                    std::nullopt});
  return tags;
}

long measure_v(const SessionState& s, const Rect& viewport, ViewMode mode) {
  if (!(viewport.width > 0 && viewport.height > 0) || !std::isfinite(viewport.x) ||
      !std::isfinite(viewport.y) || !std::isfinite(viewport.width) || !std::isfinite(viewport.height))
    invalid("viewport must have positive finite extent");
  const long tags = static_cast<long>(s.active_filters.size() + non_default_vars(s));
  switch (mode) {
    case ViewMode::ChatOnly: return 1;
    case ViewMode::Rail: return 1 + tags;
    case ViewMode::Canvas:
      return tags + static_cast<long>(counted_cards(
                        s, [&](const Card& c) { return c.visible && c.bounds().intersects(viewport); }));
  }
  return 1;
}

std::vector<data::FilterSpec> effective_filters(const SessionState& s) {
  std::vector<data::FilterSpec> out = s.active_filters;
  if (s.time_range)
    out.push_back(data::FilterSpec::range(s.time_range->column, s.time_range->start, s.time_range->end));
  if (s.cohort) out.insert(out.end(), s.cohort->predicate.begin(), s.cohort->predicate.end());
  return out;
}

// ---------------------------------------------------------------------------
// Forgotten filters

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void query_columns(const data::QuerySpec& q, std::vector<std::string>& out) {
  for (const auto& f : q.filters) out.push_back(f.column);
  out.insert(out.end(), q.group_by.begin(), q.group_by.end());
  if (q.target) out.push_back(*q.target);
}

std::vector<std::string> mentioned_columns(const DeltaPayload& payload) {
  std::vector<std::string> out;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, delta::AddFilter>) {
          out.push_back(p.filter.column);
        } else if constexpr (std::is_same_v<T, delta::RemoveFilter>) {
          if (auto f = std::get_if<data::FilterSpec>(&p.target)) out.push_back(f->column);
          if (auto c = std::get_if<std::string>(&p.target)) out.push_back(*c);
        } else if constexpr (std::is_same_v<T, delta::SetGroupBy>) {
          out = p.columns;
        } else if constexpr (std::is_same_v<T, delta::SetTimeRange>) {
          if (p.range) out.push_back(p.range->column);
        } else if constexpr (std::is_same_v<T, delta::SetCohort>) {
          if (p.cohort)
            for (const auto& f : p.cohort->predicate) out.push_back(f.column);
        } else if constexpr (std::is_same_v<T, delta::AddCard>) {
          query_columns(p.card.query, out);
        }
      },
      payload);
  return out;
}

bool mentions(const ProvenanceRecord& r, const data::FilterSpec& f) {
  for (const auto& c : mentioned_columns(r.delta.payload))
    if (c == f.column) return true;
  if (r.delta.annotation.empty()) return false;
  const std::string text = lower(r.delta.annotation);
  if (text.find(lower(f.column)) != std::string::npos) return true;
  std::vector<data::Value> literals = f.values;
  literals.push_back(f.lo);
  literals.push_back(f.hi);
  for (const auto& v : literals) {
    std::string lit = lower(data::format_value(v));
    if (!lit.empty() && text.find(lit) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

std::vector<ForgottenFilter> detect_forgotten_filters(const SessionState& state,
                                                      std::span<const ProvenanceRecord> log,
                                                      const data::Dataset& dataset, std::size_t k) {
  if (k == 0) invalid("lookback must be at least 1");
  const auto recent = log.subspan(log.size() > k ? log.size() - k : 0);
  const data::Schema schema = dataset.schema();

  std::vector<data::FilterSpec> working;
  for (const auto& f : effective_filters(state)) {
    try {
      data::validate_filter(schema, f);
      working.push_back(f);
    } catch (const Error&) {
      // Filters that do not apply to this dataset cannot hide rows from it.
    }
  }
  const std::size_t kept = data::matching_rows(dataset, working).size();

  std::vector<ForgottenFilter> out;
  for (std::size_t i = 0; i < state.active_filters.size(); ++i) {
    const auto& f = state.active_filters[i];
    auto pos = std::find(working.begin(), working.end(), f);
    if (pos == working.end()) continue;
    if (std::any_of(recent.begin(), recent.end(), [&](const ProvenanceRecord& r) { return mentions(r, f); }))
      continue;
    auto without = working;
    without.erase(without.begin() + (pos - working.begin()));
    const std::size_t widened = data::matching_rows(dataset, without).size();
    if (widened > kept) out.push_back({f, i, widened - kept});
  }
  return out;
}

}  // namespace keyhole::session
