#include "keyhole/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "keyhole/error.hpp"

namespace keyhole::harness {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::Validation, what); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Uniform [0,1) keyed by (seed, a, b), independent of draw order so paired
// conditions see the same randomness at the same point of a task.
double draw(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = splitmix64(seed ^ splitmix64(a * 0x100000001B3ull + splitmix64(b)));
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

bool is_rail_item(calculus::ItemKind k) {
  return k == calculus::ItemKind::Filter || k == calculus::ItemKind::StateVar;
}

std::vector<std::string> visible_ids(const InterfaceCondition& cond, const std::vector<ScriptItem>& live) {
  std::vector<std::string> vis;
  if (live.empty()) return vis;
  vis.push_back(live.back().id);
  auto shown = [&](const std::string& id) { return std::find(vis.begin(), vis.end(), id) != vis.end(); };
  if (cond.rail)
    for (const auto& item : live)
      if (is_rail_item(item.kind) && !shown(item.id)) vis.push_back(item.id);
  std::size_t extra = 0;
  for (auto it = live.rbegin(); it != live.rend() && extra < cond.canvas_slots; ++it) {
    if (is_rail_item(it->kind) || shown(it->id)) continue;
    vis.push_back(it->id);
    ++extra;
  }
  return vis;
}

// Bounded working memory. Eviction removes the lowest recall weight:
// recency rank (1 = least recently touched) times the recency multiplier,
// multiplied by the primacy boost for the first item of the task.
class Memory {
 public:
  Memory(std::size_t capacity, std::string first, RecallWeights weights)
      : capacity_(capacity), first_(std::move(first)), weights_(weights) {}

  bool contains(const std::string& id) const {
    return std::any_of(slots_.begin(), slots_.end(), [&](const Slot& s) { return s.id == id; });
  }

  void touch(const std::string& id) {
    ++tick_;
    for (auto& s : slots_)
      if (s.id == id) {
        s.last = tick_;
        return;
      }
    slots_.push_back({id, tick_});
    if (slots_.size() > capacity_) evict();
  }

 private:
  struct Slot {
    std::string id;
    std::uint64_t last = 0;
  };

  void evict() {
    std::sort(slots_.begin(), slots_.end(), [](const Slot& a, const Slot& b) { return a.last < b.last; });
    std::size_t victim = 0;
    double lowest = 0;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      double w = static_cast<double>(i + 1) * weights_.recency;
      if (slots_[i].id == first_) w *= weights_.primacy;
      if (i == 0 || w < lowest) {
        lowest = w;
        victim = i;
      }
    }
    slots_.erase(slots_.begin() + static_cast<std::ptrdiff_t>(victim));
  }

  std::size_t capacity_;
  std::string first_;
  RecallWeights weights_;
  std::vector<Slot> slots_;
  std::uint64_t tick_ = 0;
};

calculus::CapacityModel capacity_of(const AgentModel& agent) {
  calculus::CapacityModel cap;
  cap.base_capacity = agent.wm_capacity;
  return cap;
}

calculus::CalculusParams params_of(const AgentModel& agent) {
  calculus::CalculusParams p;
  p.lambda = agent.lambda;
  return p;
}

Stat stat_of(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  long double sum = 0;
  for (double x : xs) sum += x;
  const long double mean = sum / static_cast<long double>(xs.size());
  long double var = 0;
  for (double x : xs) var += (x - mean) * (x - mean);
  s.mean = static_cast<double>(mean);
  s.sd = static_cast<double>(std::sqrt(var / static_cast<long double>(xs.size())));
  return s;
}

std::string num(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace

void validate(const AgentModel& a) {
  if (a.wm_capacity < 1) invalid("wm_capacity must be at least 1");
  if (!(a.recall.primacy >= 0) || !(a.recall.recency >= 0) || !std::isfinite(a.recall.primacy) ||
      !std::isfinite(a.recall.recency))
    invalid("recall weights must be finite and non-negative");
  if (!(a.retrieval_cost >= 0) || !std::isfinite(a.retrieval_cost)) invalid("retrieval_cost must be >= 0");
  if (!(a.anchor_strength >= 0 && a.anchor_strength <= 1)) invalid("anchor_strength must be in [0, 1]");
  if (!(a.lambda > 0) || !std::isfinite(a.lambda)) invalid("lambda must be positive");
}

void validate(const TaskScript& script) {
  if (script.steps.empty()) invalid("task script has no steps");
  std::set<std::string> seen;
  for (std::size_t s = 0; s < script.steps.size(); ++s) {
    for (const auto& item : script.steps[s].introduced) {
      if (item.id.empty()) invalid("item id is empty");
      if (!seen.insert(item.id).second) invalid("item '" + item.id + "' introduced twice");
    }
    for (const auto& r : script.steps[s].required)
      if (!seen.count(r)) invalid("step " + std::to_string(s + 1) + " requires unknown item '" + r + "'");
  }
  if (seen.empty()) invalid("task script introduces no items");
}

std::string_view to_string(ConditionName name) {
  switch (name) {
    case ConditionName::ChatOnly: return "chat_only";
    case ConditionName::ChatStateRail: return "chat_state_rail";
    case ConditionName::Hybrid: return "hybrid";
  }
  return "unknown";
}

std::optional<ConditionName> parse_condition(std::string_view text) {
  for (auto c : {ConditionName::ChatOnly, ConditionName::ChatStateRail, ConditionName::Hybrid})
    if (to_string(c) == text) return c;
  return std::nullopt;
}

InterfaceCondition make_condition(ConditionName name, std::size_t canvas_slots) {
  InterfaceCondition c;
  c.name = name;
  c.modality.fill(cost::Modality::Chat);
  switch (name) {
    case ConditionName::ChatOnly: break;
    case ConditionName::ChatStateRail:
      c.rail = true;
      // Rail tags are edited directly; everything else still goes through chat.
      c.modality[static_cast<std::size_t>(cost::OperationKind::SimpleFilter)] = cost::Modality::Gui;
      break;
    case ConditionName::Hybrid:
      c.rail = true;
      c.canvas_slots = canvas_slots;
      c.modality.fill(cost::Modality::Gui);
      break;
  }
  return c;
}

std::size_t visible_count(const InterfaceCondition& cond, const std::vector<ScriptItem>& live) {
  return visible_ids(cond, live).size();
}

TrialResult simulate_trial(const TaskScript& task, const InterfaceCondition& cond, const AgentModel& agent,
                           std::uint64_t seed, const SimulationCosts& costs) {
  validate(task);
  validate(agent);
  std::string first;
  for (const auto& step : task.steps)
    if (!step.introduced.empty()) {
      first = step.introduced.front().id;
      break;
    }

  Memory memory(static_cast<std::size_t>(agent.wm_capacity), first, agent.recall);
  const auto cap = capacity_of(agent);
  const auto params = params_of(agent);
  std::vector<ScriptItem> live;
  TrialResult r;
  double overload_sum = 0;

  for (std::size_t s = 0; s < task.steps.size(); ++s) {
    const auto& step = task.steps[s];
    for (const auto& item : step.introduced) {
      live.push_back(item);
      memory.touch(item.id);
    }
    const auto vis = visible_ids(cond, live);
    const double o = calculus::overload(static_cast<long>(live.size()), static_cast<long>(vis.size()), cap).o;
    overload_sum += o;
    const double p = calculus::error_probability(o, params);
    for (std::size_t j = 0; j < step.required.size(); ++j) {
      const auto& id = step.required[j];
      if (std::find(vis.begin(), vis.end(), id) != vis.end() || memory.contains(id)) continue;
      if (draw(seed, s, j) < p) {
        ++r.consistency_errors;
      } else {
        ++r.backtracks;
        r.total_time += agent.retrieval_cost;
      }
    }
    r.total_time += cost::op_time(step.op, cond.modality[static_cast<std::size_t>(step.op)], costs.table);
    // Memory evolves with the script alone, so conditions differ only in
    // what they show.
    for (const auto& id : step.required) memory.touch(id);
  }
  r.mean_overload = overload_sum / static_cast<double>(task.steps.size());
  return r;
}

TaskScript eight_item_script(std::size_t steps) {
  using calculus::ItemKind;
  TaskScript t;
  t.name = "eight_items";
  TaskStep first;
  first.introduced = {{"f1", ItemKind::Filter}, {"f2", ItemKind::Filter}, {"f3", ItemKind::Filter},
                      {"v1", ItemKind::View},   {"v2", ItemKind::View},   {"v3", ItemKind::View},
                      {"v4", ItemKind::View},   {"h1", ItemKind::Hypothesis}};
  first.op = cost::OperationKind::SimpleFilter;
  t.steps.push_back(first);
  const char* rotation[] = {"f1", "v1", "f2", "v2", "f3", "v3", "v4", "h1"};
  for (std::size_t s = 1; s < steps; ++s) {
    TaskStep step;
    step.required = {rotation[(2 * s) % 8], rotation[(2 * s + 1) % 8]};
    step.op = cost::kAllOperations[s % 5];
    t.steps.push_back(step);
  }
  return t;
}

TaskScript generate_task(std::uint64_t seed) {
  using calculus::ItemKind;
  std::mt19937_64 rng(seed);
  TaskScript t;
  t.name = "task-" + std::to_string(seed);
  const std::size_t n_steps = 10 + rng() % 9;
  std::size_t counter = 0;
  auto fresh = [&](ItemKind kind) {
    const char* prefix = kind == ItemKind::Filter       ? "f"
                         : kind == ItemKind::View       ? "v"
                         : kind == ItemKind::Hypothesis ? "h"
                                                        : "s";
    return ScriptItem{prefix + std::to_string(++counter), kind};
  };

  std::vector<std::string> live, early_filters;
  TaskStep opening;
  for (std::size_t i = 0, n = 2 + rng() % 2; i < n; ++i) {
    opening.introduced.push_back(fresh(ItemKind::Filter));
    early_filters.push_back(opening.introduced.back().id);
  }
  opening.introduced.push_back(fresh(ItemKind::View));
  opening.op = cost::OperationKind::SimpleFilter;
  for (const auto& item : opening.introduced) live.push_back(item.id);
  t.steps.push_back(opening);

  for (std::size_t s = 1; s < n_steps; ++s) {
    TaskStep step;
    for (std::size_t i = 0, n = rng() % 3; i < n; ++i) {
      const auto roll = rng() % 20;
      ItemKind kind = roll < 7 ? ItemKind::Filter : roll < 15 ? ItemKind::View
                                                : roll < 18 ? ItemKind::Hypothesis
                                                            : ItemKind::StateVar;
      step.introduced.push_back(fresh(kind));
      live.push_back(step.introduced.back().id);
    }
    if (s >= n_steps / 2 && rng() % 2 == 0) {
      step.required.push_back(early_filters[rng() % early_filters.size()]);
      step.trap = true;
    }
    for (std::size_t i = 0, n = 1 + rng() % 3; i < n; ++i) {
      const auto& id = live[rng() % live.size()];
      if (std::find(step.required.begin(), step.required.end(), id) == step.required.end())
        step.required.push_back(id);
    }
    step.op = cost::kAllOperations[rng() % 5];
    t.steps.push_back(std::move(step));
  }
  return t;
}

std::string_view to_string(Paradigm p) {
  switch (p) {
    case Paradigm::UiComparison: return "ui_comparison";
    case Paradigm::Anchoring: return "anchoring";
    case Paradigm::DeicticEfficiency: return "deictic_efficiency";
    case Paradigm::ChangeDetection: return "change_detection";
  }
  return "unknown";
}

std::optional<Paradigm> parse_paradigm(std::string_view text) {
  for (auto p : {Paradigm::UiComparison, Paradigm::Anchoring, Paradigm::DeicticEfficiency,
                 Paradigm::ChangeDetection})
    if (to_string(p) == text) return p;
  return std::nullopt;
}

void validate(const HarnessConfig& c) {
  validate(c.agent);
  cost::validate(c.costs.table);
  cost::validate(c.costs.pointing);
  if (!(c.anchoring.evidence_threshold > 0) || !std::isfinite(c.anchoring.evidence_threshold))
    invalid("evidence_threshold must be positive");
  if (c.anchoring.max_observations < 1) invalid("max_observations must be at least 1");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

const ConditionSummary& ParadigmSummary::condition(std::string_view name) const {
  for (const auto& c : conditions)
    if (c.condition == name) return c;
  invalid("no condition '" + std::string(name) + "' in summary");
}

namespace {

struct AnchorOutcome {
  double persistence = 0;
  std::size_t failures = 0;
  double mean_overload = 0;
};

// The anchored hypothesis starts at the evidence threshold. Each integrated
// contradictory observation removes (1 - anchor_strength), twice that when
// evidence is shown side by side. In sequential chat the agent must hold
// every earlier observation plus the hypothesis with one visible, so
// integration fails with the overload error probability.
AnchorOutcome run_anchor(double strength, bool side_by_side, const AgentModel& agent,
                         const AnchoringParams& params, std::uint64_t seed) {
  if (!(strength >= 0 && strength <= 1)) invalid("anchor_strength must be in [0, 1]");
  const auto cap = capacity_of(agent);
  const auto cp = params_of(agent);
  const double step = (1.0 - strength) * (side_by_side ? 2.0 : 1.0);
  double weight = params.evidence_threshold;
  AnchorOutcome out;
  double overload_sum = 0;
  std::size_t k = 0;
  while (k < params.max_observations) {
    ++k;
    const long m = static_cast<long>(k) + 1;
    const long v = side_by_side ? m : 1;
    const double o = calculus::overload(m, v, cap).o;
    overload_sum += o;
    if (draw(seed, k, 0) < calculus::error_probability(o, cp)) {
      ++out.failures;
      continue;
    }
    weight -= step;
    if (weight <= 1e-9) break;
  }
  out.persistence = static_cast<double>(k);
  out.mean_overload = overload_sum / static_cast<double>(k);
  return out;
}

void add_condition_summaries(ParadigmSummary& summary, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    std::vector<double> time, errors, backtracks, overload, persistence;
    for (const auto& r : summary.records) {
      if (r.condition != name) continue;
      time.push_back(r.result.total_time);
      errors.push_back(static_cast<double>(r.result.consistency_errors));
      backtracks.push_back(static_cast<double>(r.result.backtracks));
      overload.push_back(r.result.mean_overload);
      if (r.result.anchor_persistence) persistence.push_back(*r.result.anchor_persistence);
    }
    ConditionSummary c{name, stat_of(time), stat_of(errors), stat_of(backtracks), stat_of(overload), std::nullopt};
    if (!persistence.empty()) c.anchor_persistence = stat_of(persistence);
    summary.conditions.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      std::vector<double> d_err, d_time;
      for (std::size_t t = 0; t < summary.trials; ++t) {
        const auto& a = summary.records[t * names.size() + i].result;
        const auto& b = summary.records[t * names.size() + j].result;
        d_err.push_back(static_cast<double>(a.consistency_errors) - static_cast<double>(b.consistency_errors));
        d_time.push_back(a.total_time - b.total_time);
      }
      summary.paired.push_back({names[i], names[j], stat_of(d_err), stat_of(d_time)});
    }
}

}  // namespace

double anchor_persistence(double anchor_strength, bool side_by_side, const AgentModel& agent,
                          const AnchoringParams& params, std::uint64_t seed) {
  return run_anchor(anchor_strength, side_by_side, agent, params, seed).persistence;
}

ParadigmSummary run_paradigm(Paradigm paradigm, std::size_t trials, std::uint64_t seed,
                             const HarnessConfig& config) {
  if (trials < 1) invalid("trials must be at least 1");
  validate(config);
  ParadigmSummary summary;
  summary.paradigm = paradigm;
  summary.trials = trials;
  summary.seed = seed;
  const auto& agent = config.agent;
  const auto& table = config.costs.table;
  std::vector<std::string> names;

  switch (paradigm) {
    case Paradigm::UiComparison: {
      std::vector<InterfaceCondition> conds;
      for (auto n : {ConditionName::ChatOnly, ConditionName::ChatStateRail, ConditionName::Hybrid}) {
        conds.push_back(make_condition(n, config.canvas_slots));
        names.emplace_back(to_string(n));
      }
      for (std::size_t t = 0; t < trials; ++t) {
        const auto ts = derive_seed(seed, t);
        const auto task = generate_task(ts);
        for (const auto& c : conds)
          summary.records.push_back({t, ts, std::string(to_string(c.name)),
                                     simulate_trial(task, c, agent, ts, config.costs)});
      }
      break;
    }
    case Paradigm::Anchoring: {
      names = {"sequential", "side_by_side"};
      for (std::size_t t = 0; t < trials; ++t) {
        const auto ts = derive_seed(seed, t);
        for (bool side : {false, true}) {
          auto out = run_anchor(agent.anchor_strength, side, agent, config.anchoring, ts);
          TrialResult r;
          r.anchor_persistence = out.persistence;
          r.consistency_errors = out.failures;
          r.mean_overload = out.mean_overload;
          r.total_time = out.persistence *
                         cost::op_time(cost::OperationKind::CompareViews,
                                       side ? cost::Modality::Gui : cost::Modality::Chat, table);
          summary.records.push_back({t, ts, side ? "side_by_side" : "sequential", r});
        }
      }
      break;
    }
    case Paradigm::DeicticEfficiency: {
      names = {"describe", "point"};
      calculus::CalculusParams cp = params_of(agent);
      // Describing a point serializes its two coordinates.
      const double o_prime = calculus::total_overload(0, calculus::serialization_penalty(2, cp));
      const double p_describe = calculus::error_probability(o_prime, cp);
      const double describe = cost::op_time(cost::OperationKind::DrillDown, cost::Modality::Chat, table);
      const double ask = cost::op_time(cost::OperationKind::DrillDown, cost::Modality::Gui, table);
      for (std::size_t t = 0; t < trials; ++t) {
        const auto ts = derive_seed(seed, t);
        const double distance = 100.0 + 700.0 * draw(ts, 1, 0);
        const double width = 8.0 + 32.0 * draw(ts, 2, 0);
        TrialResult d;
        d.total_time = describe;
        d.mean_overload = o_prime;
        if (draw(ts, 3, 0) < p_describe) {
          d.consistency_errors = 1;
          d.total_time += describe;
        }
        TrialResult p;
        p.total_time = cost::fitts_time(config.costs.pointing, distance, width) + ask;
        summary.records.push_back({t, ts, "describe", d});
        summary.records.push_back({t, ts, "point", p});
      }
      break;
    }
    case Paradigm::ChangeDetection: {
      names = {"sequential", "side_by_side"};
      const auto cap = capacity_of(agent);
      const auto cp = params_of(agent);
      for (std::size_t t = 0; t < trials; ++t) {
        const auto ts = derive_seed(seed, t);
        // Rows of the first table to carry across, plus the difference itself.
        const long rows = 3 + static_cast<long>(draw(ts, 1, 0) * 10);
        const double o = calculus::overload(rows + 1, 1, cap).o;
        TrialResult seq;
        seq.mean_overload = o;
        seq.total_time = cost::op_time(cost::OperationKind::CompareViews, cost::Modality::Chat, table);
        if (draw(ts, 2, 0) < calculus::error_probability(o, cp)) seq.consistency_errors = 1;
        TrialResult side;
        side.total_time = cost::op_time(cost::OperationKind::CompareViews, cost::Modality::Gui, table);
        summary.records.push_back({t, ts, "sequential", seq});
        summary.records.push_back({t, ts, "side_by_side", side});
      }
      break;
    }
  }
  add_condition_summaries(summary, names);
  return summary;
}

std::string format_summary(const ParadigmSummary& s) {
  std::ostringstream out;
  out << "# keyhole harness paradigm=" << to_string(s.paradigm) << " trials=" << s.trials
      << " seed=" << s.seed << "\n";
  out << "# model-consistency check of the overload calculus; not an empirical test of the load, "
         "accuracy, bias or comparison hypotheses\n";
  out << "condition,metric,mean,sd\n";
  for (const auto& c : s.conditions) {
    auto row = [&](const char* metric, const Stat& st) {
      out << c.condition << ',' << metric << ',' << num(st.mean) << ',' << num(st.sd) << "\n";
    };
    row("total_time", c.total_time);
    row("consistency_errors", c.consistency_errors);
    row("backtracks", c.backtracks);
    row("mean_overload", c.mean_overload);
    if (c.anchor_persistence) row("anchor_persistence", *c.anchor_persistence);
  }
  out << "paired_a,paired_b,metric,mean_difference,sd\n";
  for (const auto& p : s.paired) {
    out << p.a << ',' << p.b << ",consistency_errors," << num(p.consistency_errors.mean) << ','
        << num(p.consistency_errors.sd) << "\n";
    out << p.a << ',' << p.b << ",total_time," << num(p.total_time.mean) << ',' << num(p.total_time.sd) << "\n";
  }
  return out.str();
}

std::string export_metrics(const std::vector<TrialRecord>& records) {
  if (records.empty()) invalid("no trial records to export");
  std::ostringstream out;
  out << "trial,seed,condition,total_time,consistency_errors,backtracks,mean_overload,anchor_persistence\n";
  for (const auto& r : records) {
    out << r.trial << ',' << r.seed << ',' << r.condition << ',' << num(r.result.total_time) << ','
        << r.result.consistency_errors << ',' << r.result.backtracks << ',' << num(r.result.mean_overload) << ','
        << (r.result.anchor_persistence ? num(*r.result.anchor_persistence) : std::string()) << "\n";
  }
  return out.str();
}

}  // namespace keyhole::harness
