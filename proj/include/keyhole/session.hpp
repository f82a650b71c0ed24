#pragma once

// Event-sourced analytical session. Every change is a StateDelta; applying
// one appends a ProvenanceRecord carrying the hash of the resulting state.
// The hash is SHA-256 over the canonical JSON form (sorted keys, filters in
// insertion order, shortest round-trip numbers).

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "keyhole/codec.hpp"
#include "keyhole/query.hpp"

namespace keyhole::session {

enum class CardKind { Chart, Table, Summary, Hypothesis };
enum class AggregationLevel { Raw, Bucketed, Summary };
enum class Origin { Chat, Direct, System };
enum class ViewMode { ChatOnly, Rail, Canvas };

std::string_view to_string(CardKind kind);
std::string_view to_string(AggregationLevel level);
std::string_view to_string(Origin origin);
std::string_view to_string(ViewMode mode);
std::optional<CardKind> parse_card_kind(std::string_view text);
std::optional<AggregationLevel> parse_aggregation_level(std::string_view text);
std::optional<Origin> parse_origin(std::string_view text);
std::optional<ViewMode> parse_view_mode(std::string_view text);

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

struct Size {
  double width = 400;
  double height = 300;
  bool operator==(const Size&) const = default;
};

struct Rect {
  double x = 0;
  double y = 0;
  double width = 0;
  double height = 0;
  bool intersects(const Rect& other) const;
};

struct Card {
  std::string id;
  CardKind kind = CardKind::Chart;
  Point position;
  Size size;
  data::QuerySpec query;
  int zoom_level = 1;  // 0 summary, 1 aggregate, 2 rows
  std::vector<std::string> parent_links;
  bool pinned = false;
  bool visible = true;
  bool highlight_anomalies = false;  // ghost-layer markers requested

  Rect bounds() const { return {position.x, position.y, size.width, size.height}; }
  bool operator==(const Card&) const = default;
};

struct TimeRange {
  std::string column;
  data::Timestamp start;
  data::Timestamp end;
  bool operator==(const TimeRange&) const = default;
};

struct Cohort {
  std::string name;
  std::vector<data::FilterSpec> predicate;
  bool operator==(const Cohort&) const = default;
};

struct SessionState {
  std::string session_id;
  std::vector<data::FilterSpec> active_filters;
  std::optional<std::vector<std::string>> group_by;  // never an empty list
  std::optional<TimeRange> time_range;
  std::optional<Cohort> cohort;
  AggregationLevel aggregation_level = AggregationLevel::Raw;
  std::vector<Card> cards;
  bool rail_enabled = true;
  std::string state_hash;  // always current for states produced here

  const Card* find_card(std::string_view id) const;
};

SessionState make_state(std::string session_id);

namespace delta {

struct AddFilter {
  data::FilterSpec filter;
};
// Removes by exact spec, by column (every filter on it) or by 1-based
// position in active_filters.
struct RemoveFilter {
  std::variant<data::FilterSpec, std::string, std::size_t> target;
};
// An empty list clears the grouping.
struct SetGroupBy {
  std::vector<std::string> columns;
};
struct SetTimeRange {
  std::optional<TimeRange> range;
};
struct SetCohort {
  std::optional<Cohort> cohort;
};
struct SetAggregation {
  AggregationLevel level = AggregationLevel::Raw;
};
struct AddCard {
  Card card;
};
struct MoveCard {
  std::string id;
  Point position;
};
struct LinkCards {
  std::string parent;
  std::string child;
};
struct SetZoom {
  std::string id;
  int level = 1;
};
struct PinCard {
  std::string id;
  bool pinned = true;
};
struct RemoveCard {
  std::string id;
};

}  // namespace delta

using DeltaPayload =
    std::variant<delta::AddFilter, delta::RemoveFilter, delta::SetGroupBy, delta::SetTimeRange,
                 delta::SetCohort, delta::SetAggregation, delta::AddCard, delta::MoveCard,
                 delta::LinkCards, delta::SetZoom, delta::PinCard, delta::RemoveCard>;

std::string_view action_name(const DeltaPayload& payload);

struct StateDelta {
  DeltaPayload payload;
  Origin origin = Origin::Direct;
  double confidence = 1.0;  // must be 1 for direct manipulation
  std::string annotation;   // the utterance behind a chat delta
};

struct ProvenanceRecord {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  StateDelta delta;
  std::string resulting_hash;
};

// Canonical form without the hash, and its SHA-256 in lowercase hex.
codec::Json canonical_json(const SessionState& state);
std::string canonical_text(const SessionState& state);
std::string compute_hash(const SessionState& state);

codec::Json encode(const Card& card);
Card decode_card(const codec::Json& j);

// Decodes a canonical form and recomputes its hash.
SessionState decode_state(const codec::Json& j);

codec::Json encode(const StateDelta& d);
StateDelta decode_delta(const codec::Json& j);
codec::Json encode(const ProvenanceRecord& r);
ProvenanceRecord decode_record(const codec::Json& j);

// Checks origin/confidence and payload shape. With a schema, also checks
// columns and literal types. Throws Validation, Schema or Query errors.
void validate_delta(const SessionState& state, const StateDelta& d, const data::Schema* schema);

// Pure transition. Returns the new state with its hash set; a delta without
// effect returns the state unchanged.
SessionState apply_delta(const SessionState& state, const StateDelta& d,
                         const data::Schema* schema = nullptr);

using Clock = std::function<std::int64_t()>;
std::int64_t system_clock_ms();

// A session with its append-only log. Deltas are applied one at a time; a
// rejected delta leaves both state and log untouched.
class Session {
 public:
  explicit Session(std::string session_id, std::optional<data::Schema> schema = std::nullopt,
                   Clock clock = system_clock_ms);
  Session(SessionState initial, std::optional<data::Schema> schema, Clock clock = system_clock_ms);
  // Rebuilds a session from a persisted log, verifying it by replay.
  Session(SessionState initial, std::vector<ProvenanceRecord> log,
          std::optional<data::Schema> schema, Clock clock = system_clock_ms);

  const SessionState& state() const noexcept { return state_; }
  const SessionState& initial() const noexcept { return initial_; }
  const std::vector<ProvenanceRecord>& log() const noexcept { return log_; }
  const std::optional<data::Schema>& schema() const noexcept { return schema_; }

  const ProvenanceRecord& apply(const StateDelta& d);

 private:
  SessionState initial_;
  SessionState state_;
  std::vector<ProvenanceRecord> log_;
  std::optional<data::Schema> schema_;
  Clock clock_;
};

// Re-applies the log on top of `initial`. Seqs must be contiguous. Throws
// CorruptionError naming the first record whose delta cannot be applied or
// whose resulting hash differs.
SessionState replay(std::span<const ProvenanceRecord> log, const SessionState& initial);

// Working-set size: filters, visible chart/table cards beyond the first,
// hypothesis cards and non-default state variables.
long measure_m(const SessionState& state);

// Rail labels in display order: filters, then group_by, time_range, cohort,
// aggregation level.
struct RailTag {
  std::string kind;  // "filter", "group_by", "time_range", "cohort", "aggregation"
  std::string label;
  std::optional<std::size_t> filter_index;  // position in active_filters
};
std::vector<RailTag> rail_tags(const SessionState& state);

// Items visible without retrieval. Chat shows the current response only;
// the rail adds one tag per filter or state variable; the canvas shows rail
// tags plus the in-viewport cards that count toward m.
long measure_v(const SessionState& state, const Rect& viewport, ViewMode mode);

// Filters in force for the session's working query: active filters, the
// time range as a range filter and the cohort predicate.
std::vector<data::FilterSpec> effective_filters(const SessionState& state);

struct ForgottenFilter {
  data::FilterSpec filter;
  std::size_t index = 0;        // position in active_filters
  std::size_t rows_hidden = 0;  // rows the filter removes from the working result
};

inline constexpr std::size_t kForgottenLookback = 10;

// Active filters that none of the last k records mention (by column in the
// delta, or by column name or literal in the annotation) and that change
// the working row set when dropped.
std::vector<ForgottenFilter> detect_forgotten_filters(const SessionState& state,
                                                      std::span<const ProvenanceRecord> log,
                                                      const data::Dataset& dataset,
                                                      std::size_t k = kForgottenLookback);

}  // namespace keyhole::session
