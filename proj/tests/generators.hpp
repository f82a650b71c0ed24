#pragma once

// Seeded generators for property tests.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "keyhole/data.hpp"
#include "keyhole/query.hpp"

namespace gen {

using namespace keyhole::data;

// Up to `max_rows` rows and 1..max_cols columns. Numbers are small
// integers (so sums are exact), strings come from a tiny alphabet so groups
// collide, and roughly 10% of cells are missing.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t max_rows, std::size_t max_cols) {
  std::uniform_int_distribution<std::size_t> rows_dist(0, max_rows);
  std::uniform_int_distribution<std::size_t> cols_dist(1, max_cols);
  std::uniform_int_distribution<int> type_dist(0, 3);
  std::uniform_int_distribution<int> small(-50, 50);
  std::uniform_int_distribution<int> pct(0, 99);
  const std::size_t rows = rows_dist(rng);
  const std::size_t ncols = cols_dist(rng);
  static const char* words[] = {"EU", "US", "APAC", "LATAM"};
  std::vector<Column> cols;
  for (std::size_t c = 0; c < ncols; ++c) {
    Column col{"c" + std::to_string(c), static_cast<ColumnType>(type_dist(rng)), {}};
    for (std::size_t r = 0; r < rows; ++r) {
      if (pct(rng) < 10) {
        col.cells.emplace_back();
        continue;
      }
      switch (col.type) {
        case ColumnType::Number: col.cells.emplace_back(static_cast<double>(small(rng))); break;
        case ColumnType::String: col.cells.emplace_back(std::string(words[rng() % 4])); break;
        case ColumnType::Timestamp:
          col.cells.emplace_back(Timestamp{1700000000 + 86400 * static_cast<std::int64_t>(rng() % 20)});
          break;
        case ColumnType::Boolean: col.cells.emplace_back(static_cast<bool>(rng() & 1)); break;
      }
    }
    cols.push_back(std::move(col));
  }
  return Dataset(std::move(cols));
}

inline Value random_literal(std::mt19937_64& rng, const Column& col) {
  std::vector<Value> present;
  for (const auto& c : col.cells)
    if (!is_missing(c)) present.push_back(c);
  if (!present.empty() && (rng() % 4) != 0) return present[rng() % present.size()];
  switch (col.type) {
    case ColumnType::Number: return static_cast<double>(static_cast<int>(rng() % 101) - 50);
    case ColumnType::String: return std::string("EU");
    case ColumnType::Timestamp: return Timestamp{1700000000 + 86400 * static_cast<std::int64_t>(rng() % 20)};
    case ColumnType::Boolean: return static_cast<bool>(rng() & 1);
  }
  return {};
}

inline FilterSpec random_filter(std::mt19937_64& rng, const Dataset& ds) {
  const Column& col = ds.columns()[rng() % ds.column_count()];
  switch (rng() % 4) {
    case 0: return FilterSpec::eq(col.name, random_literal(rng, col));
    case 1: return FilterSpec::neq(col.name, random_literal(rng, col));
    case 2: {
      std::vector<Value> vs;
      std::size_t n = 1 + rng() % 3;
      for (std::size_t i = 0; i < n; ++i) vs.push_back(random_literal(rng, col));
      return FilterSpec::in(col.name, vs);
    }
    default: {
      Value a = random_literal(rng, col), b = random_literal(rng, col);
      if (b < a) std::swap(a, b);
      return FilterSpec::range(col.name, a, b);
    }
  }
}

inline QuerySpec random_query(std::mt19937_64& rng, const Dataset& ds) {
  QuerySpec q;
  std::size_t nf = rng() % 3;
  for (std::size_t i = 0; i < nf; ++i) q.filters.push_back(random_filter(rng, ds));
  std::size_t ng = rng() % 3;
  for (std::size_t i = 0; i < ng; ++i) {
    const auto& name = ds.columns()[rng() % ds.column_count()].name;
    if (std::find(q.group_by.begin(), q.group_by.end(), name) == q.group_by.end())
      q.group_by.push_back(name);
  }
  std::vector<std::string> numeric;
  for (const auto& c : ds.columns())
    if (c.type == ColumnType::Number || c.type == ColumnType::Boolean) numeric.push_back(c.name);
  int agg = static_cast<int>(rng() % 5);
  if (agg == 0 || numeric.empty()) {
    q.aggregate = Aggregate::Count;
    if (rng() & 1) q.target = ds.columns()[rng() % ds.column_count()].name;
  } else {
    q.aggregate = static_cast<Aggregate>(agg);
    q.target = numeric[rng() % numeric.size()];
  }
  return q;
}

}  // namespace gen
