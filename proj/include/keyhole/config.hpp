#pragma once

// Runtime configuration read from a JSON file. Every section is optional;
// absent keys keep their defaults and unknown keys are rejected so typos
// surface as validation errors.
//
//   {
//     "calculus":  {"alpha", "lambda", "gg_threshold"},
//     "capacity":  {"base_capacity", "expertise", "chunking_aid"},
//     "tiers":     {"silent", "inferred"},
//     "costs":     {"SimpleFilter": {"chat", "gui"}, ...},
//     "pointing":  {"a", "b"},
//     "agent":     {"wm_capacity", "primacy", "recency", "retrieval_cost",
//                   "anchor_strength", "lambda"},
//     "anchoring": {"evidence_threshold", "max_observations"},
//     "canvas_slots": 3,
//     "simulation": {"trials", "seed"},
//     "gateway":   {"view_mode", "viewport": [x, y, w, h],
//                   "anomaly_threshold", "forgotten_lookback"}
//   }

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "keyhole/calculus.hpp"
#include "keyhole/codec.hpp"
#include "keyhole/harness.hpp"
#include "keyhole/intent.hpp"
#include "keyhole/session.hpp"

namespace keyhole::config {

struct GatewaySettings {
  session::ViewMode view_mode = session::ViewMode::Canvas;
  session::Rect viewport{0, 0, 1920, 1080};
  double anomaly_threshold = 2.0;
  std::size_t forgotten_lookback = session::kForgottenLookback;
};

struct SimulationDefaults {
  std::size_t trials = 500;
  std::uint64_t seed = 42;
};

struct Config {
  calculus::CalculusParams calculus;
  calculus::CapacityModel capacity;
  intent::TierBounds tiers;
  harness::HarnessConfig harness;  // agent, cost table, pointing, anchoring, canvas slots
  SimulationDefaults simulation;
  GatewaySettings gateway;
};

// Checks every section with the owning module's validator.
void validate(const Config& config);

Config parse_config(const codec::Json& j);
Config parse_config_text(std::string_view text);
Config load_config(const std::filesystem::path& path);

codec::Json encode(const Config& config);

}  // namespace keyhole::config
