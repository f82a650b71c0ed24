#pragma once

// Cognitive-overload calculus: how many task-relevant items must be held in
// working memory once visible items and capacity are accounted for, plus the
// serialization penalty and the exponential error mapping.

#include <span>
#include <string>
#include <string_view>

namespace keyhole::calculus {

enum class ItemKind { Filter, View, Hypothesis, StateVar };

std::string_view to_string(ItemKind kind);

struct Item {
  std::string id;
  ItemKind kind = ItemKind::Filter;
  double weight = 1.0;    // w_i >= 0
  double salience = 0.0;  // sigma_i in [0,1]
  std::string label;
};

// Working-memory capacity in chunks. The effective capacity grows additively
// with expertise and external chunking aids.
struct CapacityModel {
  double base_capacity = 4.0;
  double expertise = 0.0;
  double chunking_aid = 0.0;

  double effective() const noexcept { return base_capacity + expertise + chunking_aid; }
};

struct CalculusParams {
  double alpha = 1.0;         // serialization coefficient
  double lambda = 0.5;        // error-rate coefficient
  double gg_threshold = 3.0;  // overload at which chat-only is called error-prone
};

enum class ErrorBasis { Overload, TotalOverload };

struct OverloadReport {
  double m = 0;
  double v = 0;
  double l_internal = 0;
  double o = 0;
  int dimensionality = 1;
  double s = 0;
  double o_prime = 0;
  double p_error = 0;
  ErrorBasis basis = ErrorBasis::Overload;
};

enum class Modality { ChatTolerable, ExternalizeState, ErrorProne };

std::string_view to_string(Modality modality);

void validate(const CapacityModel& cap);
void validate(const CalculusParams& params);
void validate(const Item& item);
void validate(std::span<const Item> items);

// Base model. Fills m, v, l_internal and o; the remaining fields keep their
// neutral values (d = 1, s = 0, o' = o, p = 0).
OverloadReport overload(long m, long v, const CapacityModel& cap);

// Weighted items with graded visibility.
double extended_overload(std::span<const Item> items, const CapacityModel& cap);

// alpha * (d - 1); throws InvalidDimensionality for d < 1.
double serialization_penalty(int d, const CalculusParams& params);

double total_overload(double o, double s);

// 1 - exp(-lambda * o), computed with expm1 so small o keeps precision.
double error_probability(double o, const CalculusParams& params);

Modality recommend_modality(double o, const CalculusParams& params = {});

// Full report: base overload, penalty for the presented dimensionality and
// error probability on the requested basis.
OverloadReport full_report(long m, long v, int d, const CapacityModel& cap,
                           const CalculusParams& params,
                           ErrorBasis basis = ErrorBasis::Overload);

}  // namespace keyhole::calculus
