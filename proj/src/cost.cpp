#include "keyhole/cost.hpp"

#include <cmath>
#include <string>

#include "keyhole/error.hpp"

namespace keyhole::cost {

void validate(const PointingParams& p) {
  if (!std::isfinite(p.a) || p.a < 0) throw Error(ErrorCode::Validation, "pointing intercept a must be >= 0");
  if (!std::isfinite(p.b) || p.b <= 0) throw Error(ErrorCode::Validation, "pointing slope b must be > 0");
  const double throughput = 1.0 / p.b;
  if (throughput < kMinThroughput || throughput > kMaxThroughput)
    throw Error(ErrorCode::Validation, "implied throughput " + std::to_string(throughput) +
                                           " bits/s is outside [4, 10]");
}

double fitts_time(const PointingParams& p, double distance, double width) {
  if (!(width > 0) || !std::isfinite(width)) throw Error(ErrorCode::InvalidTarget, "target width must be positive");
  if (!(distance >= 0) || !std::isfinite(distance))
    throw Error(ErrorCode::InvalidTarget, "target distance must be non-negative");
  return p.a + p.b * std::log2(distance / width + 1.0);
}

namespace {

constexpr std::array<std::string_view, 5> kOpNames{"SimpleFilter", "DateRange", "MultiSelect", "DrillDown",
                                                   "CompareViews"};

}  // namespace

std::string_view to_string(OperationKind kind) { return kOpNames[static_cast<std::size_t>(kind)]; }
std::string_view to_string(Modality modality) { return modality == Modality::Chat ? "chat" : "gui"; }

std::optional<OperationKind> parse_operation(std::string_view text) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i)
    if (kOpNames[i] == text) return static_cast<OperationKind>(i);
  return std::nullopt;
}

std::optional<Modality> parse_modality(std::string_view text) {
  if (text == "chat") return Modality::Chat;
  if (text == "gui") return Modality::Gui;
  return std::nullopt;
}

void validate(const ModalityCostTable& table) {
  for (auto kind : kAllOperations) {
    const auto& c = table[kind];
    if (!(c.chat > 0) || !(c.gui > 0) || !std::isfinite(c.chat) || !std::isfinite(c.gui))
      throw Error(ErrorCode::Validation, "cost for " + std::string(to_string(kind)) + " must be positive");
  }
}

double op_time(OperationKind kind, Modality modality, const ModalityCostTable& table) {
  const auto& c = table[kind];
  return modality == Modality::Chat ? c.chat : c.gui;
}

double session_cost(const Mix& mix, const ModalityCostTable& table) {
  if (mix.empty()) throw Error(ErrorCode::Validation, "operation mix is empty");
  std::array<std::array<std::size_t, 2>, 5> counts{};
  for (const auto& [kind, modality] : mix) ++counts[static_cast<std::size_t>(kind)][static_cast<std::size_t>(modality)];
  double total = 0;
  for (auto kind : kAllOperations)
    for (auto modality : {Modality::Chat, Modality::Gui}) {
      auto n = counts[static_cast<std::size_t>(kind)][static_cast<std::size_t>(modality)];
      if (n) total += static_cast<double>(n) * op_time(kind, modality, table);
    }
  return total;
}

Mix uniform_mix(Modality modality, std::size_t per_kind) {
  Mix mix;
  for (auto kind : kAllOperations)
    for (std::size_t i = 0; i < per_kind; ++i) mix.emplace_back(kind, modality);
  return mix;
}

}  // namespace keyhole::cost
