#pragma once

// Seeded Monte Carlo runs of synthetic bounded-memory agents under interface
// conditions. This executes the overload model; it does not stand in for
// human data.
//
// Per step of a task script, m is the number of live items and v the number
// the condition shows: chat shows the latest item, the state rail adds every
// filter and state variable, the hybrid canvas adds a few more views. A
// required item that is neither visible nor in the agent's memory is missed:
// with probability 1 - exp(-lambda * O) that is a consistency error,
// otherwise the agent scrolls back for it at retrieval_cost.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyhole/calculus.hpp"
#include "keyhole/cost.hpp"

namespace keyhole::harness {

struct RecallWeights {
  double primacy = 2.5;  // boost for the first item introduced
  double recency = 1.0;  // multiplier on recency rank
};

struct AgentModel {
  int wm_capacity = 4;
  RecallWeights recall;
  double retrieval_cost = 3.0;  // seconds per scroll-back
  double anchor_strength = 0.5;
  double lambda = 0.5;
};

void validate(const AgentModel& agent);

struct ScriptItem {
  std::string id;
  calculus::ItemKind kind = calculus::ItemKind::Filter;
};

struct TaskStep {
  std::vector<ScriptItem> introduced;
  std::vector<std::string> required;  // introduced at this step or earlier
  cost::OperationKind op = cost::OperationKind::SimpleFilter;
  bool trap = false;  // conclusion depends on an early filter
};

struct TaskScript {
  std::string name;
  std::vector<TaskStep> steps;
};

// Throws Validation for duplicate ids, unknown required ids or no steps.
void validate(const TaskScript& script);

enum class ConditionName { ChatOnly, ChatStateRail, Hybrid };

std::string_view to_string(ConditionName name);
std::optional<ConditionName> parse_condition(std::string_view text);

struct InterfaceCondition {
  ConditionName name = ConditionName::ChatOnly;
  bool rail = false;              // filters and state variables stay visible
  std::size_t canvas_slots = 0;   // further views kept on screen
  std::array<cost::Modality, 5> modality{};  // per OperationKind
};

inline constexpr std::size_t kDefaultCanvasSlots = 3;

InterfaceCondition make_condition(ConditionName name, std::size_t canvas_slots = kDefaultCanvasSlots);

// Visible item count at one step given live items in introduction order.
std::size_t visible_count(const InterfaceCondition& cond, const std::vector<ScriptItem>& live);

struct TrialResult {
  double total_time = 0;
  std::size_t consistency_errors = 0;
  std::size_t backtracks = 0;
  double mean_overload = 0;
  std::optional<double> anchor_persistence;
};

struct SimulationCosts {
  cost::ModalityCostTable table;
  cost::PointingParams pointing;
};

TrialResult simulate_trial(const TaskScript& task, const InterfaceCondition& cond, const AgentModel& agent,
                           std::uint64_t seed, const SimulationCosts& costs = {});

// Eight items introduced in the first step: three filters, four views and
// a hypothesis, as in the published overload comparison.
TaskScript eight_item_script(std::size_t steps = 6);

// Random task with planted traps: an early filter required again late.
TaskScript generate_task(std::uint64_t seed);

enum class Paradigm { UiComparison, Anchoring, DeicticEfficiency, ChangeDetection };

std::string_view to_string(Paradigm p);
std::optional<Paradigm> parse_paradigm(std::string_view text);

struct AnchoringParams {
  double evidence_threshold = 3.0;
  std::size_t max_observations = 40;
};

struct HarnessConfig {
  AgentModel agent;
  SimulationCosts costs;
  AnchoringParams anchoring;
  std::size_t canvas_slots = kDefaultCanvasSlots;
};

void validate(const HarnessConfig& config);

struct TrialRecord {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string condition;
  TrialResult result;
};

struct Stat {
  double mean = 0;
  double sd = 0;  // population
};

struct ConditionSummary {
  std::string condition;
  Stat total_time;
  Stat consistency_errors;
  Stat backtracks;
  Stat mean_overload;
  std::optional<Stat> anchor_persistence;
};

// Differences a - b over trials sharing a generated task.
struct PairedDifference {
  std::string a;
  std::string b;
  Stat consistency_errors;
  Stat total_time;
};

struct ParadigmSummary {
  Paradigm paradigm = Paradigm::UiComparison;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::vector<ConditionSummary> conditions;
  std::vector<PairedDifference> paired;
  std::vector<TrialRecord> records;  // trial-major, condition order as in `conditions`

  const ConditionSummary& condition(std::string_view name) const;
};

ParadigmSummary run_paradigm(Paradigm paradigm, std::size_t trials, std::uint64_t seed,
                             const HarnessConfig& config = {});

// Per-trial anchoring outcome; exposed for property tests.
double anchor_persistence(double anchor_strength, bool side_by_side, const AgentModel& agent,
                          const AnchoringParams& params, std::uint64_t seed);

// Per-trial seed from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Header comment, per-condition means and SDs, paired differences.
std::string format_summary(const ParadigmSummary& summary);

// One CSV row per trial record with a fixed column order. Throws on empty.
std::string export_metrics(const std::vector<TrialRecord>& records);

}  // namespace keyhole::harness
