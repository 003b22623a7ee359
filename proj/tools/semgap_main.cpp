#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "semgap/scenario.hpp"

namespace {

using nlohmann::json;

json report_to_json(const semgap::GapReport& r) {
  json j;
  j["scenario"] = r.scenario;
  j["mode"] = r.mode;
  j["seed"] = r.seed;
  j["torn_observed"] = r.torn_observed;
  j["misleading_completions"] = r.misleading_completions;
  j["sdc_injected"] = r.sdc_injected;
  j["sdc_detected"] = r.sdc_detected;
  j["chunks_retransmitted"] = r.chunks_retransmitted;
  j["completions"] = r.completions;
  j["success_completions"] = r.success_completions;
  j["valid_t6"] = r.valid_t6;
  j["mean_visibility_gap"] = r.mean_visibility_gap;
  j["max_visibility_gap"] = r.max_visibility_gap;
  j["mean_semantic_gap"] = r.mean_semantic_gap;
  j["max_semantic_gap"] = r.max_semantic_gap;
  j["events"] = r.events;
  json extras = json::object();
  for (const auto& [k, v] : r.extras) extras[k] = v;
  j["extras"] = extras;
  return j;
}

json matrix_to_json(const semgap::GapMatrix& m) {
  json rows = json::array();
  for (const auto& row : m.rows) {
    json r;
    r["profile"] = row.profile;
    r["visibility"] = semgap::gap_verdict_name(row.visibility);
    r["semantic"] = semgap::gap_verdict_name(row.semantic);
    r["atomicity_boundary"] = row.boundary.to_string();
    r["reflecting"] = semgap::reflecting_phase_name(row.reflecting);
    r["sdc_detection"] = semgap::sdc_detection_name(row.sdc_detection);
    r["visibility_assumed"] = row.visibility_assumed;
    rows.push_back(r);
  }
  return rows;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw semgap::ConfigError("cannot write file: " + path);
  out << content;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic remote-memory completion-semantics simulator"};
  app.require_subcommand(1);

  // run
  std::string run_scenario_name;
  std::string run_config_path;
  std::string run_trace_path;
  std::string run_json_path;
  std::int64_t run_seed = -1;
  std::string run_mode;
  auto* run_cmd = app.add_subcommand("run", "run one scenario");
  run_cmd->add_option("scenario", run_scenario_name,
                      "dht-torn | partial-loss | sdc | pfc-stall | ecmp | "
                      "table1")
      ->required();
  run_cmd->add_option("--config", run_config_path, "config file path");
  run_cmd->add_option("--seed", run_seed, "seed override");
  run_cmd->add_option("--trace", run_trace_path, "write the trace here");
  run_cmd->add_option("--json", run_json_path, "write the report as JSON");
  run_cmd->add_option("--mode", run_mode, "mode override");

  // compare
  std::string cmp_scenario_name;
  std::string cmp_config_path;
  std::string cmp_modes;
  std::int64_t cmp_seed = -1;
  auto* cmp_cmd =
      app.add_subcommand("compare", "run one scenario across modes");
  cmp_cmd->add_option("scenario", cmp_scenario_name, "scenario name")
      ->required();
  cmp_cmd->add_option("--modes", cmp_modes, "comma-separated modes")
      ->required();
  cmp_cmd->add_option("--config", cmp_config_path, "config file path");
  cmp_cmd->add_option("--seed", cmp_seed, "seed override");

  // table1
  std::string t1_json_path;
  std::int64_t t1_seed = -1;
  auto* t1_cmd = app.add_subcommand(
      "table1", "emit the interconnect gap matrix and verify it");
  t1_cmd->add_option("--json", t1_json_path, "write the matrix as JSON");
  t1_cmd->add_option("--seed", t1_seed, "seed override");

  // ecmp
  semgap::EcmpConfig ecfg;
  auto* ecmp_cmd = app.add_subcommand("ecmp", "hash load-balance experiment");
  ecmp_cmd->add_option("--flows", ecfg.flow_count, "flow count");
  ecmp_cmd->add_option("--paths", ecfg.path_count, "path count");
  ecmp_cmd->add_option("--qps", ecfg.qps_per_flow, "queue pairs per flow");
  ecmp_cmd->add_option("--trials", ecfg.trials, "Monte Carlo trials");
  ecmp_cmd->add_option("--seed", ecfg.hash_seed, "hash seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      semgap::ScenarioConfig cfg =
          run_config_path.empty() ? semgap::default_config(run_scenario_name)
                                  : semgap::load_config_file(run_config_path);
      if (!run_config_path.empty() && cfg.scenario != run_scenario_name) {
        throw semgap::ConfigError("config is for scenario '" + cfg.scenario +
                                  "', not '" + run_scenario_name + "'");
      }
      if (run_seed >= 0) cfg.seed = static_cast<std::uint64_t>(run_seed);
      if (!run_mode.empty()) cfg.mode = run_mode;
      const bool want_trace = !run_trace_path.empty();
      semgap::RunResult result = semgap::run_scenario(cfg, want_trace);
      if (want_trace) write_file(run_trace_path, result.trace);
      if (!run_json_path.empty()) {
        write_file(run_json_path, report_to_json(result.report).dump(2) + "\n");
      }
      std::cout << semgap::render_report(result.report);
      return 0;
    }
    if (cmp_cmd->parsed()) {
      semgap::ScenarioConfig cfg =
          cmp_config_path.empty() ? semgap::default_config(cmp_scenario_name)
                                  : semgap::load_config_file(cmp_config_path);
      if (cmp_seed >= 0) cfg.seed = static_cast<std::uint64_t>(cmp_seed);
      const auto modes = split_commas(cmp_modes);
      const auto result = semgap::compare_modes(cfg, modes);
      std::cout << semgap::render_comparison(result);
      return 0;
    }
    if (t1_cmd->parsed()) {
      semgap::ScenarioSuite suite = semgap::default_gap_suite(
          t1_seed >= 0 ? static_cast<std::uint64_t>(t1_seed) : 1);
      const semgap::GapMatrix matrix = semgap::simulate_gap_matrix(suite);
      const auto mismatches = semgap::matrix_mismatches(matrix);
      std::cout << "simulated:\n" << semgap::render_gap_table(matrix);
      semgap::GapMatrix expected;
      for (const auto& p : semgap::builtin_profiles()) {
        semgap::GapMatrixRow row;
        row.profile = p.name;
        row.visibility = p.closes_visibility_gap;
        row.semantic = p.closes_semantic_gap;
        row.boundary = p.boundary;
        row.reflecting = p.reflecting;
        row.sdc_detection = p.sdc_detection;
        row.visibility_assumed = p.name == "ualink";
        expected.rows.push_back(row);
      }
      std::cout << "\nexpected:\n" << semgap::render_gap_table(expected);
      if (!t1_json_path.empty()) {
        write_file(t1_json_path, matrix_to_json(matrix).dump(2) + "\n");
      }
      if (!mismatches.empty()) {
        std::cout << "\nmismatches (" << mismatches.size() << "):\n";
        for (const auto& m : mismatches) std::cout << "  " << m << "\n";
        return 1;
      }
      std::cout << "\nmismatches: 0\n";
      return 0;
    }
    if (ecmp_cmd->parsed()) {
      const semgap::EcmpResult result = semgap::ecmp_load(ecfg);
      std::cout << semgap::render_ecmp(result);
      return 0;
    }
  } catch (const semgap::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const semgap::SimError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
