#include "keyhole/zoom.hpp"

#include <algorithm>
#include <cmath>

#include "keyhole/anomaly.hpp"
#include "keyhole/error.hpp"

namespace keyhole::data {

std::string_view to_string(ChartKind kind) {
  switch (kind) {
    case ChartKind::Line: return "line";
    case ChartKind::Bar: return "bar";
    case ChartKind::Stat: return "stat";
  }
  return "unknown";
}

std::string_view to_string(Direction direction) {
  switch (direction) {
    case Direction::Rising: return "rising";
    case Direction::Falling: return "falling";
    case Direction::Flat: return "flat";
  }
  return "unknown";
}

RowsView rows_level(const Dataset& ds, const QuerySpec& q) {
  validate_query(ds.schema(), q);
  RowsView view;
  view.source_rows = matching_rows(ds, q.filters);
  view.rows = ds.select_rows(view.source_rows);
  return view;
}

AggregateView aggregate_level(const RowsView& rows, const QuerySpec& q) {
  QuerySpec unfiltered = q;
  unfiltered.filters.clear();
  AggregateView view;
  view.table = run_query(rows.rows, unfiltered);
  view.chart.y = measure_name(q);
  if (q.group_by.empty()) {
    view.chart.kind = ChartKind::Stat;
  } else {
    for (std::size_t i = 0; i < q.group_by.size(); ++i) {
      if (i) view.chart.x += " / ";
      view.chart.x += q.group_by[i];
    }
    const Column& first = rows.rows.column(q.group_by.front());
    view.chart.kind = (first.type == ColumnType::Timestamp || first.type == ColumnType::Number)
                          ? ChartKind::Line
                          : ChartKind::Bar;
  }
  return view;
}

double series_slope(const ResultTable& table) {
  std::vector<double> ys;
  for (const auto& row : table.rows)
    if (auto v = numeric_value(row.back())) ys.push_back(*v);
  const std::size_t n = ys.size();
  if (n < 2) return 0;
  const double xbar = static_cast<double>(n - 1) / 2.0;
  double ybar = 0;
  for (double y : ys) ybar += y;
  ybar /= static_cast<double>(n);
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = static_cast<double>(i) - xbar;
    sxy += dx * (ys[i] - ybar);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

Direction classify_slope(double slope, double scale) {
  if (std::abs(slope) <= kFlatSlopeEpsilon * scale) return Direction::Flat;
  return slope > 0 ? Direction::Rising : Direction::Falling;
}

SummaryView summary_level(const AggregateView& agg) {
  const ResultTable& t = agg.table;
  SummaryView s;
  s.slope = series_slope(t);

  double scale = 0;
  double mean = 0;
  std::size_t n = 0;
  for (const auto& row : t.rows) {
    if (auto v = numeric_value(row.back())) {
      scale = std::max(scale, std::abs(*v));
      mean += *v;
      ++n;
    }
  }
  if (n) mean /= static_cast<double>(n);
  s.direction = classify_slope(s.slope, scale);

  // Extremum: largest absolute deviation from the series mean, first wins.
  double best = -1;
  for (const auto& row : t.rows) {
    auto v = numeric_value(row.back());
    if (!v) continue;
    double dev = std::abs(*v - mean);
    if (dev > best) {
      best = dev;
      s.extremum_value = row.back();
      s.extremum_key = group_label(std::span<const Value>(row).first(row.size() - 1));
    }
  }

  std::string range = "all rows";
  if (!t.query.group_by.empty() && !t.rows.empty()) {
    auto label = [](const std::vector<Value>& row) {
      return group_label(std::span<const Value>(row).first(row.size() - 1));
    };
    range = label(t.rows.front()) + " to " + label(t.rows.back());
  }
  std::string value = n ? format_value(s.extremum_value) : std::string("none");
  std::string key = n ? s.extremum_key : std::string("none");
  s.sentence = measure_name(t.query) + " is " + std::string(to_string(s.direction)) + " over " +
               range + "; extremum " + value + " at " + key;
  return s;
}

ZoomView zoom_view(const Dataset& ds, const QuerySpec& q, int level) {
  if (level < 0 || level > 2)
    throw Error(ErrorCode::Range, "zoom level must be 0, 1 or 2, got " + std::to_string(level));
  RowsView rows = rows_level(ds, q);
  if (level == 2) return rows;
  AggregateView agg = aggregate_level(rows, q);
  if (level == 1) return agg;
  return summary_level(agg);
}

}  // namespace keyhole::data
