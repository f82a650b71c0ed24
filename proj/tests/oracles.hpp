#pragma once

// Test-only reference implementations. Each one takes the slow, obvious route
// and shares no code with the library path it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/data.hpp"
#include "keyhole/query.hpp"

namespace oracle {

using keyhole::data::Dataset;
using keyhole::data::FilterOp;
using keyhole::data::FilterSpec;
using keyhole::data::QuerySpec;
using keyhole::data::Value;

inline bool row_passes(const Dataset& ds, std::size_t r, const FilterSpec& f) {
  const Value& cell = ds.cell(r, *ds.index_of(f.column));
  if (keyhole::data::is_missing(cell)) return false;
  switch (f.op) {
    case FilterOp::Eq: return cell == f.values[0];
    case FilterOp::Neq: return !(cell == f.values[0]);
    case FilterOp::In:
      for (const auto& v : f.values)
        if (cell == v) return true;
      return false;
    case FilterOp::Range: return (f.lo < cell || f.lo == cell) && (cell < f.hi || cell == f.hi);
  }
  return false;
}

inline std::optional<double> as_number(const Value& v) {
  if (auto d = std::get_if<double>(&v)) return *d;
  if (auto b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::nullopt;
}

struct OracleRow {
  std::vector<Value> key;
  Value measure;
};

// Full scan per distinct key: collect distinct keys first, sort them, then
// for each key rescan every row. Quadratic and obviously correct.
// Time buckets are not supported here.
inline std::vector<OracleRow> naive_query(const Dataset& ds, const QuerySpec& q) {
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    bool ok = true;
    for (const auto& f : q.filters) ok = ok && row_passes(ds, r, f);
    if (ok) keep.push_back(r);
  }
  auto key_of = [&](std::size_t r) {
    std::vector<Value> k;
    for (const auto& g : q.group_by) k.push_back(ds.cell(r, *ds.index_of(g)));
    return k;
  };
  std::vector<std::vector<Value>> keys;
  if (q.group_by.empty()) {
    keys.push_back({});
  } else {
    for (auto r : keep) {
      auto k = key_of(r);
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    std::sort(keys.begin(), keys.end());
  }

  std::vector<OracleRow> out;
  for (const auto& k : keys) {
    std::vector<double> vals;
    std::size_t counted = 0;
    for (auto r : keep) {
      if (key_of(r) != k) continue;
      if (!q.target) {
        ++counted;
        continue;
      }
      const Value& cell = ds.cell(r, *ds.index_of(*q.target));
      if (keyhole::data::is_missing(cell)) continue;
      ++counted;
      if (auto x = as_number(cell)) vals.push_back(*x);
    }
    Value measure;
    using keyhole::data::Aggregate;
    switch (q.aggregate) {
      case Aggregate::Count: measure = static_cast<double>(counted); break;
      case Aggregate::Sum: {
        if (vals.empty()) break;
        double s = 0;
        for (double x : vals) s += x;
        measure = s;
        break;
      }
      case Aggregate::Mean: {
        if (vals.empty()) break;
        long double s = 0;
        for (double x : vals) s += x;
        measure = static_cast<double>(s / vals.size());
        break;
      }
      case Aggregate::Min:
        if (!vals.empty()) measure = *std::min_element(vals.begin(), vals.end());
        break;
      case Aggregate::Max:
        if (!vals.empty()) measure = *std::max_element(vals.begin(), vals.end());
        break;
    }
    out.push_back({k, measure});
  }
  return out;
}

// z-scores by the textbook definition, one index at a time.
inline std::vector<std::size_t> brute_anomalies(const std::vector<double>& xs, double threshold) {
  std::vector<std::size_t> out;
  long double sum = 0;
  for (double x : xs) sum += x;
  long double mean = sum / xs.size();
  long double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= xs.size();
  if (var == 0) return out;
  long double sd = std::sqrt(var);
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::fabs(static_cast<double>((xs[i] - mean) / sd)) >= threshold) out.push_back(i);
  return out;
}

// Normal-equation slope from raw sums: (n Sxy - Sx Sy) / (n Sxx - Sx^2).
inline double normal_equation_slope(const std::vector<double>& ys) {
  const long double n = ys.size();
  if (ys.size() < 2) return 0;
  long double sx = 0, sy = 0, sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    sx += i;
    sy += ys[i];
    sxy += i * static_cast<long double>(ys[i]);
    sxx += static_cast<long double>(i) * i;
  }
  return static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
}

// Optimal string alignment distance by exhaustive recursion (short inputs).
inline int osa_recursive(std::string_view a, std::string_view b) {
  if (a.empty()) return static_cast<int>(b.size());
  if (b.empty()) return static_cast<int>(a.size());
  int best = std::min(osa_recursive(a.substr(1), b) + 1, osa_recursive(a, b.substr(1)) + 1);
  best = std::min(best, osa_recursive(a.substr(1), b.substr(1)) + (a[0] != b[0]));
  if (a.size() >= 2 && b.size() >= 2 && a[0] == b[1] && a[1] == b[0])
    best = std::min(best, osa_recursive(a.substr(2), b.substr(2)) + 1);
  return best;
}

}  // namespace oracle
