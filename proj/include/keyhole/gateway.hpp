#pragma once

// Session API over the v1 wire protocol. One JSON object per message:
//
//   {"v": "v1", "kind": <MessageKind>, "session_id": "...", "seq": n, "payload": {...}}
//
// Client requests are Utterance, Delta and SelectionQuestion, plus
// StateView, TelemetryView and CardView used as read requests. The reply
// echoes the request seq. Every request that appends provenance records
// pushes exactly one StateView to the session's push channel, followed by
// a TelemetryView with the new points and a CardView per card added or
// re-zoomed. Push messages are numbered 1, 2, ... per session.
//
// Request payloads:
//   Utterance          {"text", "selection"?: [row ids], "anchor_card"?, "selection_hash"?}
//   Delta              a StateDelta; origin defaults to "direct", confidence to 1
//   SelectionQuestion  {"row_ids": [...], "text", "selection_hash"?}
//   CardView           {"card_id"}
//
// Ack statuses: "applied", "needs_confirmation", "answered", "report",
// "unchanged". A low-confidence parse is never applied; resending the echoed
// canonical command confirms it.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/anomaly.hpp"
#include "keyhole/calculus.hpp"
#include "keyhole/codec.hpp"
#include "keyhole/config.hpp"
#include "keyhole/data.hpp"
#include "keyhole/intent.hpp"
#include "keyhole/profile.hpp"
#include "keyhole/session.hpp"
#include "keyhole/store.hpp"

namespace keyhole::gateway {

inline constexpr std::string_view kProtocolVersion = "v1";

enum class MessageKind { Utterance, Delta, SelectionQuestion, StateView, TelemetryView, CardView, Error, Ack };

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> parse_message_kind(std::string_view text);

struct Message {
  MessageKind kind = MessageKind::Ack;
  std::string session_id;
  std::uint64_t seq = 0;
  codec::Json payload = codec::Json::object();
};

codec::Json encode(const Message& m);
// Throws Version for a "v" other than v1 and Validation for anything else
// malformed.
Message decode_message(const codec::Json& j);
std::string to_wire(const Message& m);
Message from_wire(std::string_view text);

struct RailTagView {
  session::RailTag tag;
  bool removable = true;
  double confidence = 1.0;  // of the delta that set it
  session::Origin origin = session::Origin::Direct;
  intent::Tier tier = intent::Tier::Silent;
};

struct CardViewModel {
  session::Card card;
  std::vector<data::AnomalyMarker> markers;  // only when highlight_anomalies is set
};

struct StateViewModel {
  std::string session_id;
  std::string state_hash;
  std::uint64_t provenance_seq = 0;  // last applied record, 0 when none
  session::ViewMode view_mode = session::ViewMode::Canvas;
  std::vector<RailTagView> rail;
  std::vector<CardViewModel> cards;
  calculus::OverloadReport overload;
  calculus::Modality recommendation = calculus::Modality::ChatTolerable;
  std::vector<session::ForgottenFilter> forgotten;
};

codec::Json encode(const StateViewModel& view);
codec::Json encode(const calculus::OverloadReport& report);

// Overload of a state as presented in `mode`. A chat stream flattens every
// grouping dimension into serial text; views keep them.
calculus::OverloadReport state_overload(const session::SessionState& state, session::ViewMode mode,
                                        const config::Config& cfg);

struct TelemetryPoint {
  std::uint64_t seq = 0;  // provenance seq, 0 for the initial state
  calculus::OverloadReport report;
};

// Utterances that changed nothing: unparseable or awaiting confirmation.
struct UnappliedUtterance {
  std::int64_t timestamp_ms = 0;
  std::string text;
  std::string outcome;  // "unparseable" or "needs_confirmation"
};

struct Reply {
  Message reply;
  std::vector<Message> pushed;
};

struct UtteranceOptions {
  std::vector<std::size_t> selection;
  std::optional<std::string> anchor_card;
  std::optional<std::string> selection_hash;  // state hash when the selection was made
};

// Cap on rows sent in a level-2 CardView.
inline constexpr std::size_t kMaxCardRows = 1000;

struct SessionOptions {
  std::optional<std::string> session_id;
  std::optional<session::ViewMode> view_mode;  // defaults to the config's
};

// Owns sessions and their datasets. Requests on one session are serialized;
// distinct sessions proceed concurrently. Request-level failures come back
// as Error replies; only misuse of the C++ API (unknown session in a read
// accessor) throws.
class Gateway {
 public:
  explicit Gateway(config::Config config = {}, session::Clock clock = session::system_clock_ms);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  const config::Config& config() const noexcept { return config_; }

  // Each returns the session id. Duplicate ids are rejected.
  std::string create_session(data::Dataset dataset, SessionOptions options = {});
  std::string restore_snapshot(std::string_view snapshot, data::Dataset dataset, SessionOptions options = {});
  std::string restore_provenance(const store::ProvenanceFile& file, data::Dataset dataset,
                                 SessionOptions options = {});

  bool has_session(std::string_view id) const;
  std::vector<std::string> session_ids() const;

  Reply handle(const Message& request);
  Reply handle_utterance(const std::string& id, std::string_view text, const UtteranceOptions& options = {},
                         std::uint64_t seq = 0);
  Reply handle_delta(const std::string& id, const session::StateDelta& delta, std::uint64_t seq = 0);
  Reply handle_selection_question(const std::string& id, const std::vector<std::size_t>& row_ids,
                                  std::string_view text, std::optional<std::string> selection_hash = std::nullopt,
                                  std::uint64_t seq = 0);

  StateViewModel state_view(const std::string& id) const;
  std::vector<TelemetryPoint> telemetry(const std::string& id) const;
  std::vector<UnappliedUtterance> unapplied(const std::string& id) const;
  Message card_view(const std::string& id, const std::string& card_id) const;
  session::SessionState state(const std::string& id) const;
  std::string snapshot(const std::string& id) const;
  store::ProvenanceFile provenance(const std::string& id) const;

  // Push messages with seq > after, waiting up to `wait` for one to arrive.
  std::vector<Message> pushes(const std::string& id, std::uint64_t after,
                              std::chrono::milliseconds wait = std::chrono::milliseconds(0)) const;

  struct Context;  // per-session state, opaque to callers

 private:
  std::shared_ptr<Context> find(std::string_view id) const;
  std::shared_ptr<Context> add(std::shared_ptr<Context> ctx);
  std::shared_ptr<Context> make_context(session::Session s, data::Dataset ds, session::ViewMode mode) const;

  config::Config config_;
  session::Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Context>, std::less<>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace keyhole::gateway
