#include "keyhole/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "keyhole/anomaly.hpp"
#include "keyhole/error.hpp"

namespace keyhole::data {

namespace {

std::string percent(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0f%%", rate * 100.0);
  return buf;
}

std::string fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

FeatureScore score_categorical(const Column& col, const std::vector<bool>& selected) {
  std::map<Value, std::size_t> sel_counts;
  std::map<Value, std::size_t> comp_counts;
  std::size_t sel_n = 0;
  std::size_t comp_n = 0;
  for (std::size_t r = 0; r < col.cells.size(); ++r) {
    if (is_missing(col.cells[r])) continue;
    if (selected[r]) {
      ++sel_counts[col.cells[r]];
      ++sel_n;
    } else {
      ++comp_counts[col.cells[r]];
      ++comp_n;
    }
  }
  FeatureScore f{col.name, FeatureKind::Categorical, 0, {}};
  if (sel_n == 0) {
    f.detail = "no present values in selection";
    return f;
  }
  // Ties on count go to the smallest value, which keeps the score
  // independent of row order.
  const Value* dominant = nullptr;
  std::size_t best = 0;
  for (const auto& [value, count] : sel_counts) {
    if (count > best) {
      best = count;
      dominant = &value;
    }
  }
  double sel_share = static_cast<double>(best) / static_cast<double>(sel_n);
  double comp_share = 0;
  if (comp_n) {
    auto it = comp_counts.find(*dominant);
    comp_share = it == comp_counts.end()
                     ? 0
                     : static_cast<double>(it->second) / static_cast<double>(comp_n);
  }
  f.score = std::abs(sel_share - comp_share);
  f.detail = col.name + " = " + format_value(*dominant) + " in " + percent(sel_share) +
             " of selection vs " + percent(comp_share) + " of the rest";
  return f;
}

FeatureScore score_numeric(const Column& col, const std::vector<bool>& selected) {
  double sel_sum = 0, comp_sum = 0, all_sum = 0;
  std::size_t sel_n = 0, comp_n = 0;
  for (std::size_t r = 0; r < col.cells.size(); ++r) {
    auto v = numeric_value(col.cells[r]);
    if (!v) continue;
    all_sum += *v;
    if (selected[r]) {
      sel_sum += *v;
      ++sel_n;
    } else {
      comp_sum += *v;
      ++comp_n;
    }
  }
  FeatureScore f{col.name, FeatureKind::Numeric, 0, {}};
  if (sel_n == 0 || comp_n == 0) {
    f.detail = "insufficient present values";
    return f;
  }
  const double all_n = static_cast<double>(sel_n + comp_n);
  const double all_mean = all_sum / all_n;
  double ss = 0;
  for (const auto& cell : col.cells)
    if (auto v = numeric_value(cell)) ss += (*v - all_mean) * (*v - all_mean);
  const double sd = std::sqrt(ss / all_n);
  const double sel_mean = sel_sum / static_cast<double>(sel_n);
  const double comp_mean = comp_sum / static_cast<double>(comp_n);
  if (sd > 0) f.score = std::abs(sel_mean - comp_mean) / sd;
  f.detail = "mean " + fixed(sel_mean, 3) + " in selection vs " + fixed(comp_mean, 3) +
             " in the rest";
  return f;
}

}  // namespace

SelectionReport characterize_selection(const Dataset& ds, std::span<const std::size_t> row_ids) {
  if (row_ids.empty()) throw Error(ErrorCode::Validation, "selection is empty");
  std::vector<bool> selected(ds.row_count(), false);
  std::size_t size = 0;
  for (auto id : row_ids) {
    if (id >= ds.row_count())
      throw Error(ErrorCode::Validation, "row id " + std::to_string(id) + " out of range");
    if (!selected[id]) {
      selected[id] = true;
      ++size;
    }
  }

  SelectionReport report;
  report.selection_size = size;
  report.complement_size = ds.row_count() - size;
  report.low_support = size < kMinSupport;
  if (report.complement_size == 0) {
    report.explanation = "selection covers every row; there is no complement to compare against";
    return report;
  }

  for (const auto& col : ds.columns()) {
    if (col.type == ColumnType::Number || col.type == ColumnType::Timestamp)
      report.features.push_back(score_numeric(col, selected));
    else
      report.features.push_back(score_categorical(col, selected));
  }
  std::stable_sort(report.features.begin(), report.features.end(),
                   [](const FeatureScore& a, const FeatureScore& b) { return a.score > b.score; });
  return report;
}

ColumnProfile column_profile(const Dataset& ds, std::string_view column,
                             std::optional<std::string_view> group_column) {
  const Column& col = ds.column(column);
  ColumnProfile p;
  p.column = col.name;
  p.type = col.type;
  p.row_count = ds.row_count();
  p.missing = col.missing_count();
  p.missing_rate = p.row_count ? static_cast<double>(p.missing) / static_cast<double>(p.row_count) : 0;

  std::map<Value, std::size_t> counts;
  for (const auto& cell : col.cells)
    if (!is_missing(cell)) ++counts[cell];
  p.distinct = counts.size();
  if (!counts.empty() && col.type != ColumnType::String && col.type != ColumnType::Boolean) {
    p.min = counts.begin()->first;
    p.max = counts.rbegin()->first;
  }
  if (col.type == ColumnType::String || col.type == ColumnType::Boolean) {
    std::vector<std::pair<Value, std::size_t>> top(counts.begin(), counts.end());
    std::stable_sort(top.begin(), top.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (top.size() > 5) top.resize(5);
    p.top_values = std::move(top);
  }

  if (group_column) {
    const Column& grp = ds.column(*group_column);
    p.group_column = grp.name;
    std::map<Value, GroupMissingness> groups;
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
      auto& g = groups[grp.cells[r]];
      ++g.rows;
      if (is_missing(col.cells[r])) ++g.missing;
    }
    for (auto& [key, g] : groups) {
      g.group = group_label(std::span<const Value>(&key, 1));
      g.share_of_missing =
          p.missing ? static_cast<double>(g.missing) / static_cast<double>(p.missing) : 0;
      p.concentration.push_back(g);
    }
    std::stable_sort(p.concentration.begin(), p.concentration.end(),
                     [](const auto& a, const auto& b) { return a.share_of_missing > b.share_of_missing; });
  }
  return p;
}

std::string describe(const ColumnProfile& p) {
  std::string out;
  if (p.missing == 0) {
    out = "I have no missing values";
  } else {
    out = "I have " + percent(p.missing_rate) + " missing values";
    if (!p.concentration.empty() && p.concentration.front().share_of_missing >= 0.5) {
      const auto& top = p.concentration.front();
      out += ", concentrated in " + top.group + " records (" + percent(top.share_of_missing) +
             " of missing)";
    }
  }
  out += "; " + std::to_string(p.distinct) + " distinct values";
  if (p.min && p.max)
    out += ", ranging from " + format_value(*p.min) + " to " + format_value(*p.max);
  else if (!p.top_values.empty())
    out += ", most often " + format_value(p.top_values.front().first);
  out += ".";
  return out;
}

}  // namespace keyhole::data
