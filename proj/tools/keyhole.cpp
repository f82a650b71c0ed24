// Command-line front end. Exit status: 0 success, 1 validation-type
// failure (bad arguments, bad input, version mismatch), 2 corruption.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "keyhole/config.hpp"
#include "keyhole/cost.hpp"
#include "keyhole/error.hpp"
#include "keyhole/gateway.hpp"
#include "keyhole/harness.hpp"
#include "keyhole/profile.hpp"
#include "keyhole/server.hpp"
#include "keyhole/store.hpp"

using namespace keyhole;

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::Validation, msg); }

config::Config config_from(const std::string& path) { return path.empty() ? config::Config{} : config::load_config(path); }

std::string fixed(double x, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << x;
  return out.str();
}

int serve(const std::string& config_path, const std::string& host, int port) {
  gateway::Gateway gw(config_from(config_path));
  server::Server srv(gw, {host, port});
  const int bound = srv.bind();
  std::cout << "keyhole listening on http://" << host << ':' << bound << std::endl;
  srv.run();
  return 0;
}

int simulate(const std::string& name, std::optional<std::size_t> trials, std::optional<std::uint64_t> seed,
             const std::string& out, const std::string& config_path) {
  auto paradigm = harness::parse_paradigm(name);
  if (!paradigm)
    invalid("unknown paradigm '" + name + "' (ui_comparison, anchoring, deictic_efficiency, change_detection)");
  const auto cfg = config_from(config_path);
  const std::size_t n = trials.value_or(cfg.simulation.trials);
  if (n == 0) invalid("--trials must be positive");
  auto summary = harness::run_paradigm(*paradigm, n, seed.value_or(cfg.simulation.seed), cfg.harness);
  std::cout << harness::format_summary(summary);
  if (!out.empty()) {
    store::save(out, harness::export_metrics(summary.records));
    std::cout << "wrote " << summary.records.size() << " rows to " << out << '\n';
  }
  return 0;
}

int replay(const std::string& path) {
  auto file = store::read_provenance_text(store::load(path));
  auto state = session::replay(file.log, file.initial);
  std::cout << "session " << state.session_id << ": " << file.log.size() << " records replayed\n"
            << "state_hash " << session::compute_hash(state) << '\n';
  return 0;
}

data::Dataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) invalid("cannot open " + path);
  return data::ingest_csv(in);
}

int ingest(const std::string& path, bool profile, const std::string& group) {
  auto ds = read_csv(path);
  std::cout << ds.row_count() << " rows, " << ds.column_count() << " columns\n";
  for (const auto& c : ds.columns())
    std::cout << "  " << c.name << ": " << data::to_string(c.type) << ", " << c.missing_count() << " missing\n";
  if (!profile) return 0;
  if (!group.empty()) ds.column(group);
  std::cout << '\n';
  for (const auto& c : ds.columns()) {
    std::optional<std::string_view> g;
    if (!group.empty() && group != c.name) g = group;
    auto p = data::column_profile(ds, c.name, g);
    std::cout << c.name << ": " << data::describe(p) << '\n';
    std::cout << "  distinct " << p.distinct;
    if (p.min) std::cout << ", min " << data::format_value(*p.min);
    if (p.max) std::cout << ", max " << data::format_value(*p.max);
    std::cout << '\n';
    if (!p.top_values.empty()) {
      std::cout << "  top";
      for (const auto& [value, count] : p.top_values) std::cout << ' ' << data::format_value(value) << " (" << count << ')';
      std::cout << '\n';
    }
  }
  return 0;
}

// One operation per line: "<Operation> <chat|gui> [count]". Blank lines
// and text after '#' are ignored.
cost::Mix read_mix(const std::string& path) {
  std::istringstream in(store::load(path));
  cost::Mix mix;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string op_text, mod_text, extra;
    long long count = 1;
    if (!(fields >> op_text)) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    if (!(fields >> mod_text)) invalid(where + "expected '<operation> <chat|gui> [count]'");
    if (fields >> extra) {
      std::size_t used = 0;
      try {
        count = std::stoll(extra, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != extra.size() || count < 1) invalid(where + "count must be a positive integer");
      if (fields >> extra) invalid(where + "unexpected text after count");
    }
    auto op = cost::parse_operation(op_text);
    if (!op) invalid(where + "unknown operation '" + op_text + "'");
    auto mod = cost::parse_modality(mod_text);
    if (!mod) invalid(where + "unknown modality '" + mod_text + "'");
    mix.insert(mix.end(), static_cast<std::size_t>(count), {*op, *mod});
  }
  if (mix.empty()) invalid(path + ": mix is empty");
  return mix;
}

cost::Mix all_in(cost::Mix mix, cost::Modality modality) {
  for (auto& entry : mix) entry.second = modality;
  return mix;
}

int cost_report(const std::string& mix_arg, const std::string& config_path) {
  const auto table = config_from(config_path).harness.costs.table;
  cost::Mix mix = mix_arg == "uniform50" ? cost::uniform_mix(cost::Modality::Chat, 10) : read_mix(mix_arg);

  std::cout << std::left << std::setw(14) << "operation" << std::right << std::setw(8) << "chat" << std::setw(8) << "gui"
            << '\n';
  for (auto kind : cost::kAllOperations)
    std::cout << std::left << std::setw(14) << cost::to_string(kind) << std::right << std::setw(8)
              << fixed(table[kind].chat, 1) << std::setw(8) << fixed(table[kind].gui, 1) << '\n';

  const double chat = cost::session_cost(all_in(mix, cost::Modality::Chat), table);
  const double gui = cost::session_cost(all_in(mix, cost::Modality::Gui), table);
  std::cout << '\n' << mix.size() << " operations\n";
  if (mix_arg != "uniform50") std::cout << "as given  " << fixed(cost::session_cost(mix, table), 1) << " s\n";
  std::cout << "all chat  " << fixed(chat, 1) << " s\n"
            << "all gui   " << fixed(gui, 1) << " s\n"
            << "ratio     " << fixed(chat / gui, 2) << '\n';
  return 0;
}

int overload_report(const std::string& path, const std::string& mode_text, const std::string& config_path) {
  auto mode = session::parse_view_mode(mode_text);
  if (!mode) invalid("--mode must be chat_only, rail or canvas");
  const auto cfg = config_from(config_path);
  auto file = store::read_provenance_text(store::load(path));
  // Replay first so a damaged log fails before any output.
  session::replay(file.log, file.initial);

  std::cout << "seq  action            m    v      O  d      S     O'      p  recommendation\n";
  auto row = [&](std::uint64_t seq, std::string_view action, const session::SessionState& s) {
    const auto r = gateway::state_overload(s, *mode, cfg);
    char line[160];
    std::snprintf(line, sizeof line, "%3llu  %-15s %3.0f %4.0f %6.2f %2d %6.2f %6.2f %6.3f  %s\n",
                  static_cast<unsigned long long>(seq), std::string(action).c_str(), r.m, r.v, r.o, r.dimensionality,
                  r.s, r.o_prime, r.p_error,
                  std::string(calculus::to_string(calculus::recommend_modality(r.o_prime, cfg.calculus))).c_str());
    std::cout << line;
  };
  session::SessionState state = file.initial;
  row(0, "initial", state);
  for (const auto& rec : file.log) {
    state = session::apply_delta(state, rec.delta, nullptr);
    row(rec.seq, session::action_name(rec.delta.payload), state);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"keyhole: overload-aware analytics sessions"};
  app.require_subcommand(1);

  std::string config_path, host = "127.0.0.1", out, name, path, mix, mode = "canvas", group;
  int port = 8080;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  bool profile = false;

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP gateway");
  serve_cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  serve_cmd->add_option("--port", port, "Port to listen on (0 picks one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "Address to bind");

  auto* sim_cmd = app.add_subcommand("simulate", "Run a simulated paradigm and print its summary");
  sim_cmd->add_option("paradigm", name, "ui_comparison, anchoring, deictic_efficiency or change_detection")
      ->required();
  sim_cmd->add_option("--trials", trials, "Number of trials");
  sim_cmd->add_option("--seed", seed, "Master seed");
  sim_cmd->add_option("--out", out, "Per-trial metrics CSV");
  sim_cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  auto* replay_cmd = app.add_subcommand("replay", "Verify a provenance file by replaying it");
  replay_cmd->add_option("provenance", path, "Provenance file")->required();

  auto* ingest_cmd = app.add_subcommand("ingest", "Load a CSV and report its inferred schema");
  ingest_cmd->add_option("csv", path, "CSV file")->required();
  ingest_cmd->add_flag("--profile", profile, "Describe every column");
  ingest_cmd->add_option("--group", group, "Column for missing-value concentration");

  auto* cost_cmd = app.add_subcommand("cost", "Total interaction time for an operation mix");
  cost_cmd->add_option("--mix", mix, "Mix file or 'uniform50'")->required();
  cost_cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  auto* report_cmd = app.add_subcommand("overload-report", "Overload at every step of a provenance file");
  report_cmd->add_option("provenance", path, "Provenance file")->required();
  report_cmd->add_option("--mode", mode, "chat_only, rail or canvas");
  report_cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  try {
    if (*serve_cmd) return serve(config_path, host, port);
    if (*sim_cmd) return simulate(name, trials, seed, out, config_path);
    if (*replay_cmd) return replay(path);
    if (*ingest_cmd) return ingest(path, profile, group);
    if (*cost_cmd) return cost_report(mix, config_path);
    if (*report_cmd) return overload_report(path, mode, config_path);
  } catch (const CorruptionError& e) {
    std::cerr << "error: corruption at seq " << e.seq() << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
