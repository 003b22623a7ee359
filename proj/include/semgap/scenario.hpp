#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "semgap/faults.hpp"
#include "semgap/oae.hpp"
#include "semgap/payloads.hpp"
#include "semgap/profiles.hpp"
#include "semgap/verbs.hpp"

namespace semgap {

struct EcmpConfig {
  std::uint32_t flow_count = 8;
  std::uint32_t path_count = 16;
  std::uint32_t qps_per_flow = 1;
  std::uint64_t hash_seed = 1;
  std::uint32_t trials = 100000;
};

// Scenario names are fixed: dht-torn, partial-loss, sdc, pfc-stall, ecmp,
// table1. Unknown config keys are rejected with line/key diagnostics.
struct ScenarioConfig {
  std::string scenario = "partial-loss";
  std::uint64_t seed = 1;
  std::string mode;  // dht-torn: plain|farm|oae; partial-loss: rc|uc|sdr;
                     // sdc: rdma|oae

  TransportMode transport_mode = TransportMode::ReliableConnected;
  std::uint32_t mtu_bytes = 4096;
  int priority_class = 0;

  LatencyConfig latency;
  Tick integrate_delay = 0;  // visibility -> application read

  FaultPlan fault;
  bool per_line_visibility = false;

  std::size_t object_bytes = kEntryBytes;

  unsigned farm_max_retries = 16;
  unsigned farm_writer_count = 1;
  std::string farm_reader_schedule = "enumerate";  // or seeded-random
  std::uint32_t farm_sample_count = 512;           // seeded-random sample size

  OaeConfig oae;

  std::uint32_t sdc_trials = 1000;
  std::uint32_t partial_chunks = 1024;

  EcmpConfig ecmp;
};

// Built-in defaults per scenario name.
ScenarioConfig default_config(const std::string& scenario);

// Flat key-value text, one `key = value` per line, '#' comments. Unknown
// keys throw ConfigError carrying the line number and key.
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig load_config_file(const std::string& path);
// Full round-trip serialization; reparsing yields an equivalent config.
std::string serialize_config(const ScenarioConfig& cfg);

// Aggregated per-run counters. `check()` enforces the internal consistency
// rules and throws SimError on violation.
struct GapReport {
  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;

  std::uint64_t torn_observed = 0;
  std::uint64_t misleading_completions = 0;
  std::uint64_t sdc_injected = 0;
  std::uint64_t sdc_detected = 0;
  std::uint64_t chunks_retransmitted = 0;
  std::uint64_t completions = 0;
  std::uint64_t success_completions = 0;
  std::uint64_t valid_t6 = 0;

  std::uint64_t visibility_gap_samples = 0;
  double mean_visibility_gap = 0.0;
  std::uint64_t max_visibility_gap = 0;
  std::uint64_t semantic_gap_samples = 0;
  double mean_semantic_gap = 0.0;
  std::uint64_t max_semantic_gap = 0;

  std::uint64_t events = 0;

  // Ordered scenario-specific facts, stable across runs.
  std::vector<std::pair<std::string, std::string>> extras;

  const std::string* extra(const std::string& key) const;
  void add_extra(const std::string& key, const std::string& value);
  void check() const;
};

std::string render_report(const GapReport& report);

struct RunResult {
  GapReport report;
  std::string trace;
};

// Runs one scenario deterministically. Same config + seed, same trace bytes.
RunResult run_scenario(const ScenarioConfig& cfg, bool want_trace = true);

// Same seed across modes; one report per mode plus highlighted deltas.
struct ComparisonResult {
  std::vector<GapReport> reports;
};
ComparisonResult compare_modes(const ScenarioConfig& base,
                               const std::vector<std::string>& modes);
std::string render_comparison(const ComparisonResult& result);

struct EcmpResult {
  EcmpConfig config;
  double no_collision_rate = 0.0;    // Monte Carlo estimate
  double exact_no_collision = 0.0;   // product formula
  double mean_max_load = 0.0;
  double mean_normalized_max_load = 0.0;
  std::map<std::uint32_t, std::uint64_t> max_load_histogram;
};

// P(all flows land on distinct paths) = prod_i (paths - i) / paths.
double exact_no_collision_probability(std::uint32_t flows,
                                      std::uint32_t paths);
EcmpResult ecmp_load(const EcmpConfig& cfg);
std::string render_ecmp(const EcmpResult& result);

// Fraction of seeded messages that survive one pass with zero chunk losses,
// sampled sparsely (cost ~ losses, not chunks). Oracle: (1-rate)^chunks.
struct IntactProbeResult {
  std::uint64_t messages = 0;
  std::uint64_t intact = 0;
  double empirical = 0.0;
};
IntactProbeResult message_intact_probe(std::uint64_t seed,
                                       std::uint32_t chunk_count,
                                       double loss_rate,
                                       std::uint64_t messages);

// A small randomized transfer mix used by the stage-monotonicity and
// determinism property suites. Throws if any engine invariant breaks.
GapReport run_randomized_probe(std::uint64_t seed);

}  // namespace semgap
