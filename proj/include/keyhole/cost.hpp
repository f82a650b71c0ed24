#pragma once

// Interaction-time models: Fitts' law for pointing and a per-operation
// table of chat versus direct-manipulation times.

#include <array>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace keyhole::cost {

// Movement time MT = a + b * log2(D / W + 1). Throughput 1/b must fall in
// [kMinThroughput, kMaxThroughput] bits per second.
struct PointingParams {
  double a = 0.1;   // seconds
  double b = 0.15;  // seconds per bit
};

inline constexpr double kMinThroughput = 4.0;
inline constexpr double kMaxThroughput = 10.0;

void validate(const PointingParams& p);

// Throws InvalidTarget for width <= 0 or negative distance.
double fitts_time(const PointingParams& p, double distance, double width);

enum class OperationKind { SimpleFilter, DateRange, MultiSelect, DrillDown, CompareViews };
enum class Modality { Chat, Gui };

inline constexpr std::array<OperationKind, 5> kAllOperations{
    OperationKind::SimpleFilter, OperationKind::DateRange, OperationKind::MultiSelect,
    OperationKind::DrillDown, OperationKind::CompareViews};

std::string_view to_string(OperationKind kind);
std::string_view to_string(Modality modality);
std::optional<OperationKind> parse_operation(std::string_view text);
std::optional<Modality> parse_modality(std::string_view text);

struct OpCost {
  double chat = 0;  // seconds
  double gui = 0;
  bool operator==(const OpCost&) const = default;
};

// Seconds per operation, indexed by OperationKind. Defaults are the
// published estimates.
struct ModalityCostTable {
  std::array<OpCost, 5> entries{{{5.2, 0.5}, {8.5, 1.2}, {12.3, 2.1}, {7.8, 0.8}, {15.2, 1.5}}};

  const OpCost& operator[](OperationKind kind) const { return entries[static_cast<std::size_t>(kind)]; }
  OpCost& operator[](OperationKind kind) { return entries[static_cast<std::size_t>(kind)]; }
  bool operator==(const ModalityCostTable&) const = default;
};

void validate(const ModalityCostTable& table);

double op_time(OperationKind kind, Modality modality, const ModalityCostTable& table = {});

using Mix = std::vector<std::pair<OperationKind, Modality>>;

// Total seconds. Sums per-cell counts times cell time in table order, so the
// result does not depend on the order of the mix. Throws on an empty mix.
double session_cost(const Mix& mix, const ModalityCostTable& table = {});

// `per_kind` of each operation, all in one modality.
Mix uniform_mix(Modality modality, std::size_t per_kind = 10);

}  // namespace keyhole::cost
