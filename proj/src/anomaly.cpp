#include "keyhole/anomaly.hpp"

#include <cmath>
#include <map>

#include "keyhole/error.hpp"

namespace keyhole::data {

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::Spike: return "spike";
    case AnomalyKind::Dip: return "dip";
    case AnomalyKind::Missingness: return "missingness";
  }
  return "unknown";
}

std::string group_label(std::span<const Value> key) {
  if (key.empty()) return "all";
  std::string out;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (i) out += " / ";
    out += is_missing(key[i]) ? std::string("(missing)") : format_value(key[i]);
  }
  return out;
}

std::vector<AnomalyMarker> detect_anomalies(std::span<const double> series, double threshold) {
  if (series.size() < 3)
    throw Error(ErrorCode::Validation, "anomaly detection needs at least 3 values");
  if (!(threshold > 0)) throw Error(ErrorCode::Validation, "anomaly threshold must be positive");

  const double n = static_cast<double>(series.size());
  double mean = 0;
  for (double x : series) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : series) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);

  std::vector<AnomalyMarker> out;
  if (sd == 0) return out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    double z = (series[i] - mean) / sd;
    if (std::abs(z) >= threshold)
      out.push_back({i, {}, z, z > 0 ? AnomalyKind::Spike : AnomalyKind::Dip});
  }
  return out;
}

std::vector<AnomalyMarker> detect_anomalies(const ResultTable& table, double threshold) {
  std::vector<double> values;
  std::vector<std::string> keys;
  for (const auto& row : table.rows) {
    auto v = numeric_value(row.back());
    if (!v) continue;
    values.push_back(*v);
    keys.push_back(group_label(std::span<const Value>(row).first(row.size() - 1)));
  }
  if (values.size() < 3) return {};
  auto markers = detect_anomalies(values, threshold);
  for (auto& m : markers) m.bucket_key = keys[m.index];
  return markers;
}

std::vector<AnomalyMarker> detect_missingness(const Dataset& ds, std::string_view column,
                                              std::string_view group_column, double threshold) {
  const Column& col = ds.column(column);
  const Column& grp = ds.column(group_column);
  std::map<Value, std::pair<std::size_t, std::size_t>> per_group;  // (missing, rows)
  for (std::size_t r = 0; r < ds.row_count(); ++r) {
    auto& [missing, rows] = per_group[grp.cells[r]];
    ++rows;
    if (is_missing(col.cells[r])) ++missing;
  }
  if (per_group.size() < 3) return {};
  std::vector<double> rates;
  std::vector<std::string> keys;
  for (const auto& [key, counts] : per_group) {
    rates.push_back(static_cast<double>(counts.first) / static_cast<double>(counts.second));
    keys.push_back(group_label(std::span<const Value>(&key, 1)));
  }
  auto markers = detect_anomalies(rates, threshold);
  std::erase_if(markers, [](const AnomalyMarker& m) { return m.kind != AnomalyKind::Spike; });
  for (auto& m : markers) {
    m.kind = AnomalyKind::Missingness;
    m.bucket_key = keys[m.index];
  }
  return markers;
}

}  // namespace keyhole::data
