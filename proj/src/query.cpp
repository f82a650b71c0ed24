#include "keyhole/query.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <map>
#include <ostream>

#include "keyhole/error.hpp"

namespace keyhole::data {

std::string_view to_string(FilterOp op) {
  switch (op) {
    case FilterOp::Eq: return "eq";
    case FilterOp::Neq: return "neq";
    case FilterOp::In: return "in";
    case FilterOp::Range: return "range";
  }
  return "unknown";
}

std::optional<FilterOp> parse_filter_op(std::string_view text) {
  if (text == "eq") return FilterOp::Eq;
  if (text == "neq") return FilterOp::Neq;
  if (text == "in") return FilterOp::In;
  if (text == "range") return FilterOp::Range;
  return std::nullopt;
}

FilterSpec FilterSpec::eq(std::string column, Value v) {
  return {std::move(column), FilterOp::Eq, {std::move(v)}, {}, {}};
}
FilterSpec FilterSpec::neq(std::string column, Value v) {
  return {std::move(column), FilterOp::Neq, {std::move(v)}, {}, {}};
}
FilterSpec FilterSpec::in(std::string column, std::vector<Value> vs) {
  return {std::move(column), FilterOp::In, std::move(vs), {}, {}};
}
FilterSpec FilterSpec::range(std::string column, Value lo, Value hi) {
  return {std::move(column), FilterOp::Range, {}, std::move(lo), std::move(hi)};
}

namespace {

void check_literal(const ColumnSchema& col, const Value& v) {
  auto t = type_of(v);
  if (!t) throw Error(ErrorCode::Query, "filter on '" + col.name + "' has a missing literal");
  if (*t != col.type)
    throw Error(ErrorCode::Query, "filter on '" + col.name + "' expects a " +
                                      std::string(to_string(col.type)) + " literal, got " +
                                      std::string(to_string(*t)));
}

}  // namespace

void validate_filter(const Schema& schema, const FilterSpec& f) {
  const ColumnSchema* col = find_column(schema, f.column);
  if (!col) throw Error(ErrorCode::Schema, "unknown column '" + f.column + "'");
  switch (f.op) {
    case FilterOp::Eq:
    case FilterOp::Neq:
      if (f.values.size() != 1)
        throw Error(ErrorCode::Query, "eq/neq filter needs exactly one value");
      break;
    case FilterOp::In:
      if (f.values.empty()) throw Error(ErrorCode::Query, "in filter needs at least one value");
      break;
    case FilterOp::Range:
      if (!f.values.empty()) throw Error(ErrorCode::Query, "range filter takes lo/hi only");
      check_literal(*col, f.lo);
      check_literal(*col, f.hi);
      if (f.hi < f.lo) throw Error(ErrorCode::Query, "range filter on '" + f.column + "' has lo > hi");
      return;
  }
  for (const auto& v : f.values) check_literal(*col, v);
}

bool matches(const FilterSpec& f, const Value& cell) {
  if (is_missing(cell)) return false;
  switch (f.op) {
    case FilterOp::Eq: return cell == f.values.front();
    case FilterOp::Neq: return cell != f.values.front();
    case FilterOp::In: return std::find(f.values.begin(), f.values.end(), cell) != f.values.end();
    case FilterOp::Range: return !(cell < f.lo) && !(f.hi < cell);
  }
  return false;
}

std::string describe(const FilterSpec& f) {
  switch (f.op) {
    case FilterOp::Eq: return f.column + " = " + format_value(f.values.front());
    case FilterOp::Neq: return f.column + " != " + format_value(f.values.front());
    case FilterOp::In: {
      std::string out = f.column + " in ";
      for (std::size_t i = 0; i < f.values.size(); ++i) {
        if (i) out += ", ";
        out += format_value(f.values[i]);
      }
      return out;
    }
    case FilterOp::Range:
      return f.column + " between " + format_value(f.lo) + " and " + format_value(f.hi);
  }
  return f.column;
}

std::string_view to_string(Aggregate agg) {
  switch (agg) {
    case Aggregate::Count: return "count";
    case Aggregate::Sum: return "sum";
    case Aggregate::Mean: return "mean";
    case Aggregate::Min: return "min";
    case Aggregate::Max: return "max";
  }
  return "unknown";
}

std::optional<Aggregate> parse_aggregate(std::string_view text) {
  if (text == "count") return Aggregate::Count;
  if (text == "sum") return Aggregate::Sum;
  if (text == "mean" || text == "avg") return Aggregate::Mean;
  if (text == "min") return Aggregate::Min;
  if (text == "max") return Aggregate::Max;
  return std::nullopt;
}

std::string_view to_string(TimeBucket bucket) {
  switch (bucket) {
    case TimeBucket::Day: return "day";
    case TimeBucket::Week: return "week";
    case TimeBucket::Month: return "month";
  }
  return "unknown";
}

std::optional<TimeBucket> parse_time_bucket(std::string_view text) {
  if (text == "day") return TimeBucket::Day;
  if (text == "week") return TimeBucket::Week;
  if (text == "month") return TimeBucket::Month;
  return std::nullopt;
}

std::string measure_name(const QuerySpec& q) {
  std::string name(to_string(q.aggregate));
  if (q.target) name += "(" + *q.target + ")";
  return name;
}

void validate_query(const Schema& schema, const QuerySpec& q) {
  for (const auto& f : q.filters) validate_filter(schema, f);
  bool has_timestamp_group = false;
  for (const auto& g : q.group_by) {
    const ColumnSchema* col = find_column(schema, g);
    if (!col) throw Error(ErrorCode::Schema, "unknown group column '" + g + "'");
    has_timestamp_group |= col->type == ColumnType::Timestamp;
    if (std::count(q.group_by.begin(), q.group_by.end(), g) > 1)
      throw Error(ErrorCode::Query, "group column '" + g + "' repeated");
  }
  if (q.target) {
    const ColumnSchema* col = find_column(schema, *q.target);
    if (!col) throw Error(ErrorCode::Schema, "unknown target column '" + *q.target + "'");
    if (q.aggregate != Aggregate::Count && col->type != ColumnType::Number &&
        col->type != ColumnType::Boolean)
      throw Error(ErrorCode::Query, std::string(to_string(q.aggregate)) +
                                        " needs a numeric target, '" + *q.target + "' is " +
                                        std::string(to_string(col->type)));
  } else if (q.aggregate != Aggregate::Count) {
    throw Error(ErrorCode::Query,
                std::string(to_string(q.aggregate)) + " needs a numeric target column");
  }
  if (q.time_bucket && !has_timestamp_group)
    throw Error(ErrorCode::Query, "time bucket requires a timestamp group column");
}

Timestamp bucket_start(Timestamp ts, TimeBucket bucket) {
  using namespace std::chrono;
  sys_seconds t{seconds{ts.seconds}};
  sys_days d = floor<days>(t);
  switch (bucket) {
    case TimeBucket::Day:
      break;
    case TimeBucket::Week: {
      // 1970-01-01 was a Thursday; weekday index 0 = Monday.
      weekday wd{d};
      unsigned from_monday = (wd.c_encoding() + 6) % 7;
      d -= days{from_monday};
      break;
    }
    case TimeBucket::Month: {
      year_month_day ymd{d};
      d = sys_days{ymd.year() / ymd.month() / 1};
      break;
    }
  }
  return Timestamp{static_cast<std::int64_t>(d.time_since_epoch().count()) * 86400};
}

std::vector<std::size_t> matching_rows(const Dataset& ds, const std::vector<FilterSpec>& filters) {
  std::vector<std::size_t> col_index;
  col_index.reserve(filters.size());
  for (const auto& f : filters) {
    auto idx = ds.index_of(f.column);
    if (!idx) throw Error(ErrorCode::Schema, "unknown column '" + f.column + "'");
    col_index.push_back(*idx);
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    bool keep = true;
    for (std::size_t i = 0; i < filters.size() && keep; ++i)
      keep = matches(filters[i], ds.cell(r, col_index[i]));
    if (keep) rows.push_back(r);
  }
  return rows;
}

namespace {

struct Accumulator {
  std::size_t count = 0;
  double sum = 0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double x) {
    ++count;
    sum += x;
    min = std::min(min, x);
    max = std::max(max, x);
  }

  Value result(Aggregate agg) const {
    if (agg == Aggregate::Count) return static_cast<double>(count);
    if (count == 0) return {};
    switch (agg) {
      case Aggregate::Sum: return sum;
      case Aggregate::Mean: return sum / static_cast<double>(count);
      case Aggregate::Min: return min;
      case Aggregate::Max: return max;
      case Aggregate::Count: break;
    }
    return {};
  }
};

}  // namespace

ResultTable run_query(const Dataset& ds, const QuerySpec& q, std::string source_hash) {
  const Schema schema = ds.schema();
  validate_query(schema, q);

  std::vector<std::size_t> group_cols;
  std::vector<bool> bucketed;
  for (const auto& g : q.group_by) {
    auto idx = *ds.index_of(g);
    group_cols.push_back(idx);
    bucketed.push_back(q.time_bucket && ds.columns()[idx].type == ColumnType::Timestamp);
  }
  std::optional<std::size_t> target_col;
  if (q.target) target_col = ds.index_of(*q.target);

  std::map<std::vector<Value>, Accumulator> groups;
  if (q.group_by.empty()) groups[{}];

  std::vector<Value> key(group_cols.size());
  for (std::size_t r : matching_rows(ds, q.filters)) {
    for (std::size_t i = 0; i < group_cols.size(); ++i) {
      const Value& cell = ds.cell(r, group_cols[i]);
      if (bucketed[i] && !is_missing(cell))
        key[i] = bucket_start(std::get<Timestamp>(cell), *q.time_bucket);
      else
        key[i] = cell;
    }
    Accumulator& acc = groups[key];
    if (!target_col) {
      acc.add(0);
      continue;
    }
    const Value& cell = ds.cell(r, *target_col);
    if (is_missing(cell)) continue;
    if (q.aggregate == Aggregate::Count)
      acc.add(0);
    else
      acc.add(*numeric_value(cell));
  }

  ResultTable out;
  out.columns = q.group_by;
  out.columns.push_back(measure_name(q));
  out.query = q;
  out.source_hash = std::move(source_hash);
  out.rows.reserve(groups.size());
  for (const auto& [k, acc] : groups) {
    std::vector<Value> row = k;
    row.push_back(acc.result(q.aggregate));
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_csv(std::ostream& out, const ResultTable& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ',';
    write_csv_field(out, table.columns[c]);
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      write_csv_field(out, format_value(row[c]));
    }
    out << '\n';
  }
}

}  // namespace keyhole::data
