#include "keyhole/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "keyhole/error.hpp"

namespace keyhole::calculus {

std::string_view to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::Filter: return "filter";
    case ItemKind::View: return "view";
    case ItemKind::Hypothesis: return "hypothesis";
    case ItemKind::StateVar: return "state_var";
  }
  return "unknown";
}

std::string_view to_string(Modality modality) {
  switch (modality) {
    case Modality::ChatTolerable: return "chat_tolerable";
    case Modality::ExternalizeState: return "externalize_state";
    case Modality::ErrorProne: return "error_prone";
  }
  return "unknown";
}

void validate(const CapacityModel& cap) {
  if (!(cap.base_capacity > 0) || !std::isfinite(cap.base_capacity))
    throw Error(ErrorCode::Validation, "base_capacity must be positive");
  if (!(cap.expertise >= 0) || !(cap.chunking_aid >= 0))
    throw Error(ErrorCode::Validation, "expertise and chunking_aid must be non-negative");
}

void validate(const CalculusParams& params) {
  if (!(params.alpha > 0)) throw Error(ErrorCode::Validation, "alpha must be positive");
  if (!(params.lambda > 0)) throw Error(ErrorCode::Validation, "lambda must be positive");
  if (!(params.gg_threshold > 0))
    throw Error(ErrorCode::Validation, "gg_threshold must be positive");
}

void validate(const Item& item) {
  if (!(item.weight >= 0) || !std::isfinite(item.weight))
    throw Error(ErrorCode::Validation, "item '" + item.id + "' has negative weight");
  if (!(item.salience >= 0 && item.salience <= 1))
    throw Error(ErrorCode::Validation, "item '" + item.id + "' salience outside [0,1]");
}

void validate(std::span<const Item> items) {
  std::set<std::string_view> seen;
  for (const auto& item : items) {
    validate(item);
    if (!seen.insert(item.id).second)
      throw Error(ErrorCode::Validation, "duplicate item id '" + item.id + "'");
  }
}

OverloadReport overload(long m, long v, const CapacityModel& cap) {
  if (m < 0 || v < 0) throw Error(ErrorCode::Validation, "m and v must be non-negative");
  validate(cap);
  OverloadReport r;
  r.m = static_cast<double>(m);
  r.v = static_cast<double>(v);
  r.l_internal = std::max(0.0, r.m - r.v);
  r.o = std::max(0.0, r.m - r.v - cap.effective());
  r.o_prime = r.o;
  return r;
}

double extended_overload(std::span<const Item> items, const CapacityModel& cap) {
  validate(items);
  validate(cap);
  double total = 0;
  double visible = 0;
  for (const auto& item : items) {
    total += item.weight;
    visible += item.weight * item.salience;
  }
  return std::max(0.0, total - visible - cap.effective());
}

double serialization_penalty(int d, const CalculusParams& params) {
  if (d < 1)
    throw Error(ErrorCode::InvalidDimensionality,
                "dimensionality must be >= 1, got " + std::to_string(d));
  validate(params);
  return params.alpha * static_cast<double>(d - 1);
}

double total_overload(double o, double s) {
  if (!(o >= 0) || !(s >= 0))
    throw Error(ErrorCode::Validation, "overload and penalty must be non-negative");
  return o + s;
}

double error_probability(double o, const CalculusParams& params) {
  if (!(o >= 0)) throw Error(ErrorCode::Validation, "overload must be non-negative");
  validate(params);
  // 1 - e^{-x} == -expm1(-x); keeps p(0) == 0 exactly and stays < 1 until
  // the exponent underflows.
  double p = -std::expm1(-params.lambda * o);
  return std::min(p, std::nextafter(1.0, 0.0));
}

Modality recommend_modality(double o, const CalculusParams& params) {
  if (!(o >= 0)) throw Error(ErrorCode::Validation, "overload must be non-negative");
  if (o == 0) return Modality::ChatTolerable;
  if (o < params.gg_threshold) return Modality::ExternalizeState;
  return Modality::ErrorProne;
}

OverloadReport full_report(long m, long v, int d, const CapacityModel& cap,
                           const CalculusParams& params, ErrorBasis basis) {
  OverloadReport r = overload(m, v, cap);
  r.dimensionality = d;
  r.s = serialization_penalty(d, params);
  r.o_prime = total_overload(r.o, r.s);
  r.basis = basis;
  r.p_error = error_probability(basis == ErrorBasis::Overload ? r.o : r.o_prime, params);
  return r;
}

}  // namespace keyhole::calculus
