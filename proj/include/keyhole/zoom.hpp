#pragma once

// Semantic zoom: the same query rendered at three levels of abstraction.
//   2  raw matching rows
//   1  aggregate table plus a chart spec, computed from the level-2 rows
//   0  one summary sentence derived from the level-1 series

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "keyhole/query.hpp"

namespace keyhole::data {

enum class ChartKind { Line, Bar, Stat };
enum class Direction { Rising, Falling, Flat };

std::string_view to_string(ChartKind kind);
std::string_view to_string(Direction direction);

struct ChartSpec {
  ChartKind kind = ChartKind::Stat;
  std::string x;  // joined group columns; empty for Stat
  std::string y;  // measure name
};

struct RowsView {
  Dataset rows;
  std::vector<std::size_t> source_rows;
};

struct AggregateView {
  ResultTable table;
  ChartSpec chart;
};

struct SummaryView {
  std::string sentence;
  Direction direction = Direction::Flat;
  double slope = 0;
  std::string extremum_key;
  Value extremum_value;
};

using ZoomView = std::variant<SummaryView, AggregateView, RowsView>;

inline constexpr double kFlatSlopeEpsilon = 1e-9;

RowsView rows_level(const Dataset& ds, const QuerySpec& q);
// Pure function of the rows: re-runs the grouping and aggregate (no filters).
AggregateView aggregate_level(const RowsView& rows, const QuerySpec& q);
SummaryView summary_level(const AggregateView& agg);

// Least-squares slope of the non-missing measures against their position.
double series_slope(const ResultTable& table);
Direction classify_slope(double slope, double scale);

// Throws Range for levels outside {0,1,2}.
ZoomView zoom_view(const Dataset& ds, const QuerySpec& q, int level);

}  // namespace keyhole::data
