#pragma once

// Ghost-layer markers: z-score spikes and dips on ordered series, plus
// groups whose missingness stands out.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/query.hpp"

namespace keyhole::data {

enum class AnomalyKind { Spike, Dip, Missingness };

std::string_view to_string(AnomalyKind kind);

struct AnomalyMarker {
  std::size_t index = 0;   // position in the series (or row index)
  std::string bucket_key;  // group label when the series came from a result table
  double score = 0;        // z-value, |score| >= threshold
  AnomalyKind kind = AnomalyKind::Spike;
};

inline constexpr double kDefaultAnomalyThreshold = 2.0;

// Marker at i iff |(x_i - mean) / sd| >= threshold, sd the population
// standard deviation. Needs at least three values and a positive threshold;
// zero variance yields no markers.
std::vector<AnomalyMarker> detect_anomalies(std::span<const double> series, double threshold);

// Runs detect_anomalies over the measure column of a result table, skipping
// missing measures. Bucket keys are the rendered group keys. Tables with
// fewer than three usable rows yield no markers.
std::vector<AnomalyMarker> detect_anomalies(const ResultTable& table, double threshold);

// Scores each group's missing rate of `column` against the other groups;
// groups at or beyond the threshold become Missingness markers.
std::vector<AnomalyMarker> detect_missingness(const Dataset& ds, std::string_view column,
                                              std::string_view group_column, double threshold);

// "EU", "2024-01-01 / EU", ... ; empty key renders as "all".
std::string group_label(std::span<const Value> key);

}  // namespace keyhole::data
