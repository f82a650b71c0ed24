#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/data.hpp"

namespace keyhole::data {

enum class FilterOp { Eq, Neq, In, Range };

std::string_view to_string(FilterOp op);
std::optional<FilterOp> parse_filter_op(std::string_view text);

// A single predicate on one column. Eq/Neq carry exactly one value, In one
// or more, Range uses lo/hi (inclusive). Missing cells never match.
struct FilterSpec {
  std::string column;
  FilterOp op = FilterOp::Eq;
  std::vector<Value> values;
  Value lo;
  Value hi;

  bool operator==(const FilterSpec&) const = default;

  static FilterSpec eq(std::string column, Value v);
  static FilterSpec neq(std::string column, Value v);
  static FilterSpec in(std::string column, std::vector<Value> vs);
  static FilterSpec range(std::string column, Value lo, Value hi);
};

// Throws Schema for unknown columns and Query for malformed or
// type-mismatched literals.
void validate_filter(const Schema& schema, const FilterSpec& f);
bool matches(const FilterSpec& f, const Value& cell);

// Human-readable rail label, e.g. "region = EU" or "amount between 1 and 5".
std::string describe(const FilterSpec& f);

enum class Aggregate { Count, Sum, Mean, Min, Max };
enum class TimeBucket { Day, Week, Month };

std::string_view to_string(Aggregate agg);
std::optional<Aggregate> parse_aggregate(std::string_view text);
std::string_view to_string(TimeBucket bucket);
std::optional<TimeBucket> parse_time_bucket(std::string_view text);

struct QuerySpec {
  std::vector<FilterSpec> filters;
  std::vector<std::string> group_by;
  Aggregate aggregate = Aggregate::Count;
  // Required for every aggregate except Count. With Count, a target counts
  // only rows where that column is present.
  std::optional<std::string> target;
  // Applies to timestamp columns in group_by.
  std::optional<TimeBucket> time_bucket;

  bool operator==(const QuerySpec&) const = default;
};

// "count", "count(col)", "mean(revenue)", ...
std::string measure_name(const QuerySpec& q);

void validate_query(const Schema& schema, const QuerySpec& q);

struct ResultTable {
  std::vector<std::string> columns;  // group columns then the measure
  std::vector<std::vector<Value>> rows;
  QuerySpec query;
  std::string source_hash;
};

// Floors a timestamp to the start of its day, ISO week (Monday) or month.
Timestamp bucket_start(Timestamp ts, TimeBucket bucket);

// Row ids (ascending) satisfying every filter.
std::vector<std::size_t> matching_rows(const Dataset& ds, const std::vector<FilterSpec>& filters);

// Filters, then groups, then aggregates. Group keys come out sorted
// ascending with missing keys first. Missing measure values are skipped; an
// aggregate over no values is missing (count is 0). Without group_by the
// result always has exactly one row.
ResultTable run_query(const Dataset& ds, const QuerySpec& q, std::string source_hash = {});

void write_csv(std::ostream& out, const ResultTable& table);

}  // namespace keyhole::data
