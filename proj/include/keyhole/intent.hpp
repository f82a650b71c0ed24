#pragma once

// Deterministic command grammar for analytical utterances.
//
//   command   := filter | show | breakdown | compare | zoom | remove
//              | summarize | analyze | characterize
//   filter    := "filter" column ("=" | "!=" | "in") literal {"," literal}
//              | "filter" column "between" literal "and" literal
//   show      := "show" [aggregate] [column] "by" column
//   breakdown := "break" [deictic] "down" "by" column
//   compare   := "compare" ref "vs" ref
//   zoom      := "zoom" ("in" | "out")
//   remove    := "remove" "filter" (column | integer)
//   summarize := "summarize" [deictic]
//   analyze   := "analyze" topic-text
//   characterize := "what" "do" deictic {word} "have" "in" "common" ["?"]
//   deictic   := "this" | "these" | "that"
//
// Keywords are case-insensitive. Columns match exactly first, then by
// optimal-string-alignment distance with confidence 1 / (1 + dist / len).
// A literal is one or more bare words or a double-quoted string.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/error.hpp"
#include "keyhole/query.hpp"

namespace keyhole::intent {

enum class Verb { Show, Filter, Breakdown, Compare, Zoom, Remove, Summarize, Analyze, Characterize };
enum class ZoomDirection { In, Out };
enum class DeicticWord { This, These, That };

std::string_view to_string(Verb verb);
std::string_view to_string(DeicticWord word);
std::optional<Verb> parse_verb(std::string_view text);

struct DeicticSlot {
  DeicticWord word = DeicticWord::This;
  std::size_t token = 0;  // position in the utterance's token stream
  bool operator==(const DeicticSlot&) const = default;
};

// What a resolved deictic reference points at.
struct Binding {
  std::vector<std::size_t> row_ids;
  std::optional<std::string> anchor_card;
  bool operator==(const Binding&) const = default;
};

struct Args {
  std::string column;  // filter / breakdown / show dimension / remove-by-column
  data::FilterOp op = data::FilterOp::Eq;
  std::vector<std::string> literals;  // filter values; range holds lo, hi
  data::Aggregate aggregate = data::Aggregate::Count;
  std::optional<std::string> measure;  // show: measured column
  std::string left;                    // compare
  std::string right;
  ZoomDirection zoom = ZoomDirection::In;
  std::optional<std::size_t> remove_index;  // remove filter N (1-based)
  std::string topic;                        // analyze topic, characterize noun
  bool operator==(const Args&) const = default;
};

struct IntentCommand {
  Verb verb = Verb::Summarize;
  Args args;
  double confidence = 1.0;
  // Other readings considered, by confidence descending. Each carries its
  // own confidence and has no alternatives of its own.
  std::vector<IntentCommand> alternatives;
  std::vector<DeicticSlot> deictic_slots;
  std::optional<Binding> binding;

  bool operator==(const IntentCommand&) const = default;
  bool resolved() const { return deictic_slots.empty(); }
};

inline constexpr double kMinParseConfidence = 0.4;
// Column candidates within this much of the best are offered as alternatives.
inline constexpr double kNearTie = 0.05;

class UnparseableError : public Error {
 public:
  UnparseableError(const std::string& message, std::vector<IntentCommand> alternatives)
      : Error(ErrorCode::Unparseable, message), alternatives_(std::move(alternatives)) {}
  const std::vector<IntentCommand>& alternatives() const noexcept { return alternatives_; }

 private:
  std::vector<IntentCommand> alternatives_;
};

// Throws UnparseableError when the text does not fit the grammar or the best
// reading has confidence below kMinParseConfidence.
IntentCommand parse(std::string_view utterance, std::span<const std::string> schema);

// Binds every deictic slot to the selection (if non-empty) or else the
// anchor card. Throws Validation when the command has no slots and
// NeedsSelection when there is nothing to bind to.
IntentCommand resolve_deixis(const IntentCommand& cmd, std::span<const std::size_t> selection,
                             std::optional<std::string> anchor_card = std::nullopt);

enum class Tier { Silent, Inferred, NeedsConfirmation };

std::string_view to_string(Tier tier);

struct TierBounds {
  double silent = 0.9;    // [silent, 1]   applied without decoration
  double inferred = 0.6;  // [inferred, silent) applied, marked as inferred
};                        // (0, inferred) must be confirmed before applying

void validate(const TierBounds& bounds);
Tier confidence_tier(double confidence, const TierBounds& bounds = {});
inline Tier confidence_tier(const IntentCommand& cmd, const TierBounds& bounds = {}) {
  return confidence_tier(cmd.confidence, bounds);
}

// Canonical text. parse(format(cmd), schema) reproduces any command built
// from schema columns with confidence 1 and no alternatives. Deictic words
// are rendered when slots are still open.
std::string format(const IntentCommand& cmd);

// Optimal string alignment distance (adjacent transpositions cost 1).
std::size_t edit_distance(std::string_view a, std::string_view b);

// Pluggable fallback for free-form language the grammar does not cover.
class ExternalResolver {
 public:
  virtual ~ExternalResolver() = default;
  virtual std::optional<IntentCommand> resolve(std::string_view utterance,
                                               std::span<const std::string> schema) = 0;
};

// Grammar first; on UnparseableError consult the resolver if one is given.
// A resolver answer must carry a confidence in (0, 1].
IntentCommand parse(std::string_view utterance, std::span<const std::string> schema,
                    ExternalResolver* resolver);

}  // namespace keyhole::intent
