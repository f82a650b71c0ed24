#include "keyhole/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "keyhole/error.hpp"

namespace keyhole::config {

namespace {

using codec::Json;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::Validation, what); }

const Json& section(const Json& j, const char* key, std::initializer_list<std::string_view> allowed) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  const Json& s = j.at(key);
  if (!s.is_object()) invalid(std::string("config section '") + key + "' must be an object");
  for (const auto& [k, _] : s.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == k;
    if (!known) invalid(std::string("unknown key '") + k + "' in config section '" + key + "'");
  }
  return s;
}

void read(const Json& s, const char* key, double& out) {
  if (s.contains(key)) out = codec::get_number(s, key);
}

void read_count(const Json& s, const char* key, std::size_t& out) {
  if (!s.contains(key)) return;
  auto n = codec::get_int(s, key);
  if (n < 0) invalid(std::string("'") + key + "' must be non-negative");
  out = static_cast<std::size_t>(n);
}

}  // namespace

void validate(const Config& c) {
  calculus::validate(c.calculus);
  calculus::validate(c.capacity);
  intent::validate(c.tiers);
  harness::validate(c.harness);
  if (c.simulation.trials < 1) invalid("simulation.trials must be at least 1");
  const auto& v = c.gateway.viewport;
  if (!(v.width > 0 && v.height > 0) || !std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.width) ||
      !std::isfinite(v.height))
    invalid("gateway.viewport must have positive finite extent");
  if (!(c.gateway.anomaly_threshold > 0) || !std::isfinite(c.gateway.anomaly_threshold))
    invalid("gateway.anomaly_threshold must be positive");
  if (c.gateway.forgotten_lookback < 1) invalid("gateway.forgotten_lookback must be at least 1");
}

Config parse_config(const Json& j) {
  if (!j.is_object()) invalid("config must be a JSON object");
  static const std::set<std::string> top{"calculus", "capacity", "tiers",        "costs",     "pointing",
                                         "agent",    "anchoring", "canvas_slots", "simulation", "gateway"};
  for (const auto& [k, _] : j.items())
    if (!top.count(k)) invalid("unknown config section '" + k + "'");

  Config c;
  const Json& calc = section(j, "calculus", {"alpha", "lambda", "gg_threshold"});
  read(calc, "alpha", c.calculus.alpha);
  read(calc, "lambda", c.calculus.lambda);
  read(calc, "gg_threshold", c.calculus.gg_threshold);

  const Json& cap = section(j, "capacity", {"base_capacity", "expertise", "chunking_aid"});
  read(cap, "base_capacity", c.capacity.base_capacity);
  read(cap, "expertise", c.capacity.expertise);
  read(cap, "chunking_aid", c.capacity.chunking_aid);

  const Json& tiers = section(j, "tiers", {"silent", "inferred"});
  read(tiers, "silent", c.tiers.silent);
  read(tiers, "inferred", c.tiers.inferred);

  auto& h = c.harness;
  const Json& costs = section(j, "costs", {"SimpleFilter", "DateRange", "MultiSelect", "DrillDown", "CompareViews"});
  for (const auto& [name, cell] : costs.items()) {
    auto kind = cost::parse_operation(name);
    if (!cell.is_object()) invalid("cost entry '" + name + "' must be an object");
    for (const auto& [k, _] : cell.items())
      if (k != "chat" && k != "gui") invalid("unknown key '" + k + "' in cost entry '" + name + "'");
    read(cell, "chat", h.costs.table[*kind].chat);
    read(cell, "gui", h.costs.table[*kind].gui);
  }

  const Json& pointing = section(j, "pointing", {"a", "b"});
  read(pointing, "a", h.costs.pointing.a);
  read(pointing, "b", h.costs.pointing.b);

  const Json& agent = section(
      j, "agent", {"wm_capacity", "primacy", "recency", "retrieval_cost", "anchor_strength", "lambda"});
  if (agent.contains("wm_capacity")) {
    auto w = codec::get_int(agent, "wm_capacity");
    if (w < 1 || w > 1'000'000) invalid("agent.wm_capacity must be a positive integer");
    h.agent.wm_capacity = static_cast<int>(w);
  }
  read(agent, "primacy", h.agent.recall.primacy);
  read(agent, "recency", h.agent.recall.recency);
  read(agent, "retrieval_cost", h.agent.retrieval_cost);
  read(agent, "anchor_strength", h.agent.anchor_strength);
  read(agent, "lambda", h.agent.lambda);

  const Json& anchoring = section(j, "anchoring", {"evidence_threshold", "max_observations"});
  read(anchoring, "evidence_threshold", h.anchoring.evidence_threshold);
  read_count(anchoring, "max_observations", h.anchoring.max_observations);
  if (j.contains("canvas_slots")) read_count(j, "canvas_slots", h.canvas_slots);

  const Json& sim = section(j, "simulation", {"trials", "seed"});
  read_count(sim, "trials", c.simulation.trials);
  if (sim.contains("seed")) {
    const Json& s = sim.at("seed");
    if (!s.is_number_integer()) invalid("simulation.seed must be an integer");
    c.simulation.seed = s.is_number_unsigned() ? s.get<std::uint64_t>()
                                               : static_cast<std::uint64_t>(s.get<std::int64_t>());
  }

  const Json& gw = section(j, "gateway", {"view_mode", "viewport", "anomaly_threshold", "forgotten_lookback"});
  if (gw.contains("view_mode")) {
    auto mode = session::parse_view_mode(codec::get_string(gw, "view_mode"));
    if (!mode) invalid("gateway.view_mode must be chat_only, rail or canvas");
    c.gateway.view_mode = *mode;
  }
  if (gw.contains("viewport")) {
    const Json& v = gw.at("viewport");
    if (!v.is_array() || v.size() != 4) invalid("gateway.viewport must be [x, y, width, height]");
    for (const auto& n : v)
      if (!n.is_number()) invalid("gateway.viewport must hold numbers");
    c.gateway.viewport = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
  }
  read(gw, "anomaly_threshold", c.gateway.anomaly_threshold);
  read_count(gw, "forgotten_lookback", c.gateway.forgotten_lookback);

  validate(c);
  return c;
}

Config parse_config_text(std::string_view text) {
  Json j = Json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) invalid("config is not valid JSON");
  return parse_config(j);
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

Json encode(const Config& c) {
  const auto& h = c.harness;
  Json costs = Json::object();
  for (auto kind : cost::kAllOperations)
    costs[std::string(cost::to_string(kind))] = {{"chat", h.costs.table[kind].chat}, {"gui", h.costs.table[kind].gui}};
  const auto& v = c.gateway.viewport;
  return Json{
      {"calculus", {{"alpha", c.calculus.alpha}, {"lambda", c.calculus.lambda}, {"gg_threshold", c.calculus.gg_threshold}}},
      {"capacity",
       {{"base_capacity", c.capacity.base_capacity},
        {"expertise", c.capacity.expertise},
        {"chunking_aid", c.capacity.chunking_aid}}},
      {"tiers", {{"silent", c.tiers.silent}, {"inferred", c.tiers.inferred}}},
      {"costs", costs},
      {"pointing", {{"a", h.costs.pointing.a}, {"b", h.costs.pointing.b}}},
      {"agent",
       {{"wm_capacity", h.agent.wm_capacity},
        {"primacy", h.agent.recall.primacy},
        {"recency", h.agent.recall.recency},
        {"retrieval_cost", h.agent.retrieval_cost},
        {"anchor_strength", h.agent.anchor_strength},
        {"lambda", h.agent.lambda}}},
      {"anchoring",
       {{"evidence_threshold", h.anchoring.evidence_threshold}, {"max_observations", h.anchoring.max_observations}}},
      {"canvas_slots", h.canvas_slots},
      {"simulation", {{"trials", c.simulation.trials}, {"seed", c.simulation.seed}}},
      {"gateway",
       {{"view_mode", std::string(session::to_string(c.gateway.view_mode))},
        {"viewport", Json::array({v.x, v.y, v.width, v.height})},
        {"anomaly_threshold", c.gateway.anomaly_threshold},
        {"forgotten_lookback", c.gateway.forgotten_lookback}}}};
}

}  // namespace keyhole::config
