#include "keyhole/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "keyhole/error.hpp"

namespace keyhole::workspace {

namespace {

using data::ColumnType;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> topic_words(std::string_view topic) {
  static const std::set<std::string> stop{"the", "and", "for", "with", "why", "what", "how",
                                          "our", "are", "was", "from", "into", "this", "that"};
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.size() >= 3 && !stop.count(word)) out.push_back(word);
    word.clear();
  };
  for (char c : topic) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    else
      flush();
  }
  flush();
  return out;
}

bool categorical(ColumnType t) { return t == ColumnType::String || t == ColumnType::Boolean; }
bool measurable(ColumnType t) { return t == ColumnType::Number || t == ColumnType::Boolean; }

std::size_t distinct_present(const data::Column& col) {
  std::set<data::Value> seen;
  for (const auto& v : col.cells)
    if (!data::is_missing(v)) seen.insert(v);
  return seen.size();
}

// A filter spanning every present value of the column.
std::optional<data::FilterSpec> full_span_filter(const data::Column& col) {
  std::set<data::Value> seen;
  for (const auto& v : col.cells)
    if (!data::is_missing(v)) seen.insert(v);
  if (seen.empty()) return std::nullopt;
  if (categorical(col.type)) return data::FilterSpec::in(col.name, {seen.begin(), seen.end()});
  return data::FilterSpec::range(col.name, *seen.begin(), *seen.rbegin());
}

}  // namespace

std::vector<ColumnScore> rank_columns(std::string_view topic, const data::Dataset& ds) {
  const auto words = topic_words(topic);
  std::vector<ColumnScore> out;
  for (const auto& col : ds.columns()) {
    ColumnScore s{col.name, 0, false};
    const std::string name = lower(col.name);
    for (const auto& w : words) {
      if (name.find(w) != std::string::npos || (name.size() >= 3 && w.find(name) != std::string::npos)) {
        s.keyword = true;
        break;
      }
    }
    if (s.keyword) s.score += 2;
    if (col.type == ColumnType::Timestamp || categorical(col.type)) s.score += 1;
    if (categorical(col.type)) {
      std::size_t distinct = distinct_present(col);
      if (distinct > 0) s.score += 1.0 / static_cast<double>(distinct);
    }
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ColumnScore& a, const ColumnScore& b) { return a.score > b.score; });
  return out;
}

WorkspacePlan plan_workspace(const intent::IntentCommand& cmd, const data::Dataset& ds,
                             std::string_view prefix) {
  if (cmd.verb != intent::Verb::Analyze)
    throw Error(ErrorCode::Validation, "a workspace is prepared only for analyze commands");

  WorkspacePlan plan;
  plan.ranking = rank_columns(cmd.args.topic, ds);

  const ColumnScore* target = nullptr;
  for (const auto& s : plan.ranking)
    if (s.keyword) {
      target = &s;
      break;
    }
  if (!target) {
    plan.explanation = "No column matches '" + cmd.args.topic + "'; the workspace is empty.";
    return plan;
  }

  const auto& target_col = ds.column(target->column);
  data::QuerySpec base;
  std::string measured;
  if (measurable(target_col.type)) {
    base.aggregate = data::Aggregate::Mean;
    base.target = target_col.name;
    measured = target_col.name;
  }

  std::optional<std::string> time_col, cat_col;
  for (const auto& s : plan.ranking) {
    const auto type = ds.column(s.column).type;
    if (!time_col && type == ColumnType::Timestamp) time_col = s.column;
    if (!cat_col && categorical(type) && s.column != measured) cat_col = s.column;
  }

  auto make_delta = [&](session::DeltaPayload payload) {
    session::StateDelta d;
    d.payload = std::move(payload);
    d.origin = session::Origin::System;
    d.confidence = cmd.confidence;
    d.annotation = intent::format(cmd);
    return d;
  };

  std::size_t filters = 0;
  for (const auto& s : plan.ranking) {
    if (filters == kMaxFilters || s.score <= 0) break;
    if (s.column == measured) continue;
    if (auto f = full_span_filter(ds.column(s.column))) {
      plan.deltas.push_back(make_delta(session::delta::AddFilter{*f}));
      ++filters;
    }
  }

  std::vector<session::Card> cards;
  auto add_card = [&](std::string suffix, session::CardKind kind, data::QuerySpec q) -> session::Card& {
    session::Card c;
    c.id = std::string(prefix) + "-" + suffix;
    c.kind = kind;
    const std::size_t slot = cards.size();
    c.position = {static_cast<double>(slot % 2) * (kCardWidth + kCardGap),
                  static_cast<double>(slot / 2) * (kCardHeight + kCardGap)};
    c.size = {kCardWidth, kCardHeight};
    c.query = std::move(q);
    cards.push_back(std::move(c));
    return cards.back();
  };

  data::QuerySpec trend = base;
  if (time_col) {
    trend.group_by = {*time_col};
    trend.time_bucket = data::TimeBucket::Month;
  }
  const std::string trend_id = add_card("trend", session::CardKind::Chart, trend).id;

  if (cat_col) {
    data::QuerySpec q = base;
    q.group_by = {*cat_col};
    add_card("breakdown", session::CardKind::Chart, q).parent_links = {trend_id};
  }
  if (cat_col && time_col) {
    data::QuerySpec q = base;
    q.group_by = {*cat_col, *time_col};
    q.time_bucket = data::TimeBucket::Month;
    add_card("cohort", session::CardKind::Table, q).parent_links = {trend_id};
  }
  if (time_col) {
    auto markers = data::detect_anomalies(data::run_query(ds, trend), data::kDefaultAnomalyThreshold);
    cards.front().highlight_anomalies = true;
    auto& summary = add_card("anomalies", session::CardKind::Summary, trend);
    summary.zoom_level = 0;
    summary.highlight_anomalies = true;
    summary.parent_links = {trend_id};
    plan.highlights[trend_id] = markers;
    plan.highlights[summary.id] = std::move(markers);
  }

  for (auto& c : cards) plan.deltas.push_back(make_delta(session::delta::AddCard{std::move(c)}));

  plan.explanation = "Prepared " + std::to_string(plan.deltas.size() - filters) + " cards and " +
                     std::to_string(filters) + " filters around '" + target->column + "'.";
  return plan;
}

std::size_t apply_plan(session::Session& session, const WorkspacePlan& plan) {
  for (const auto& d : plan.deltas) session.apply(d);
  return plan.deltas.size();
}

}  // namespace keyhole::workspace
