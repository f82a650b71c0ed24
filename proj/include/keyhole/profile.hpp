#pragma once

// Self-describing data: what a selection of rows has in common, and what a
// column can say about itself.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "keyhole/data.hpp"

namespace keyhole::data {

enum class FeatureKind { Categorical, Numeric };

struct FeatureScore {
  std::string column;
  FeatureKind kind = FeatureKind::Categorical;
  // Categorical: |share of the selection's dominant value in the selection
  //              - its share in the complement|.
  // Numeric:     |mean(selection) - mean(complement)| / population sd of
  //              all present values (0 when that sd is 0).
  double score = 0;
  std::string detail;
};

// Selections smaller than this are flagged as low support.
inline constexpr std::size_t kMinSupport = 3;

struct SelectionReport {
  std::vector<FeatureScore> features;  // by score descending, then column order
  std::size_t selection_size = 0;
  std::size_t complement_size = 0;
  bool low_support = false;
  std::string explanation;  // set when the report is empty
};

// Duplicate ids are collapsed. Throws Validation for an empty selection or
// an out-of-range id.
SelectionReport characterize_selection(const Dataset& ds, std::span<const std::size_t> row_ids);

struct GroupMissingness {
  std::string group;
  std::size_t missing = 0;
  std::size_t rows = 0;
  double share_of_missing = 0;  // missing in this group / all missing
};

struct ColumnProfile {
  std::string column;
  ColumnType type = ColumnType::String;
  std::size_t row_count = 0;
  std::size_t missing = 0;
  double missing_rate = 0;
  std::size_t distinct = 0;
  std::optional<Value> min;
  std::optional<Value> max;
  std::vector<std::pair<Value, std::size_t>> top_values;  // up to five, by count
  std::optional<std::string> group_column;
  std::vector<GroupMissingness> concentration;  // by share descending
};

ColumnProfile column_profile(const Dataset& ds, std::string_view column,
                             std::optional<std::string_view> group_column = std::nullopt);

// First-person sentence, e.g.
// "I have 40% missing values, concentrated in EU records (100% of missing)."
std::string describe(const ColumnProfile& profile);

}  // namespace keyhole::data
