#pragma once

// Mise en place: turns an analyze intent into a prepared workspace of up to
// four cards on a 2x2 grid and up to three pre-configured filters.
//
// Column relevance = 2 if a topic word matches the column name
//                  + 1 for timestamp or categorical columns
//                  + 1 / distinct-count for categorical columns.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/anomaly.hpp"
#include "keyhole/intent.hpp"
#include "keyhole/session.hpp"

namespace keyhole::workspace {

struct ColumnScore {
  std::string column;
  double score = 0;
  bool keyword = false;
};

struct WorkspacePlan {
  std::vector<ColumnScore> ranking;  // by score descending, ties by column order
  std::vector<session::StateDelta> deltas;
  std::map<std::string, std::vector<data::AnomalyMarker>> highlights;  // card id -> markers
  std::string explanation;

  bool empty() const { return deltas.empty(); }
};

inline constexpr double kCardWidth = 400;
inline constexpr double kCardHeight = 300;
inline constexpr double kCardGap = 40;
inline constexpr std::size_t kMaxCards = 4;
inline constexpr std::size_t kMaxFilters = 3;

std::vector<ColumnScore> rank_columns(std::string_view topic, const data::Dataset& ds);

// Requires an analyze command. Card ids are "<prefix>-trend",
// "<prefix>-breakdown", "<prefix>-cohort" and "<prefix>-anomalies". Deltas
// carry origin system and the intent's confidence. A topic that matches no
// column yields an empty plan with an explanation.
WorkspacePlan plan_workspace(const intent::IntentCommand& intent, const data::Dataset& ds,
                             std::string_view card_prefix = "ws");

// Applies a plan to the session; returns the number of records appended.
std::size_t apply_plan(session::Session& session, const WorkspacePlan& plan);

}  // namespace keyhole::workspace
