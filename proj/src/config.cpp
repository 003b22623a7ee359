#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semgap/scenario.hpp"

namespace semgap {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

std::uint64_t to_u64(const std::string& v, int line, const std::string& key) {
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'",
                      line, key);
  }
}

double to_double(const std::string& v, int line, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'", line, key);
  }
}

bool to_bool(const std::string& v, int line, const std::string& key) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'", line, key);
}

TransportMode to_transport(const std::string& v, int line,
                           const std::string& key) {
  if (v == "rc") return TransportMode::ReliableConnected;
  if (v == "uc") return TransportMode::UnreliableConnected;
  if (v == "connectionless") return TransportMode::Connectionless;
  throw ConfigError("expected rc|uc|connectionless, got '" + v + "'", line,
                    key);
}

void apply_key(ScenarioConfig& cfg, const std::string& key,
               const std::string& value, int line) {
  auto u64 = [&] { return to_u64(value, line, key); };
  auto u32 = [&] { return static_cast<std::uint32_t>(to_u64(value, line, key)); };

  if (key == "scenario") {
    cfg.scenario = value;
  } else if (key == "seed") {
    cfg.seed = u64();
  } else if (key == "mode") {
    cfg.mode = value;
  } else if (key == "transport.mode") {
    cfg.transport_mode = to_transport(value, line, key);
  } else if (key == "transport.mtu_bytes") {
    cfg.mtu_bytes = u32();
  } else if (key == "transport.timeout") {
    cfg.latency.timeout = u64();
  } else if (key == "transport.priority_class") {
    cfg.priority_class = static_cast<int>(to_u64(value, line, key));
  } else if (key == "transport.retry_rounds") {
    cfg.latency.retry_rounds = u32();
  } else if (key == "latency.placement") {
    cfg.latency.placement = u64();
  } else if (key == "latency.transmission") {
    cfg.latency.transmission = u64();
  } else if (key == "latency.wire") {
    cfg.latency.wire = u64();
  } else if (key == "latency.per_chunk") {
    cfg.latency.per_chunk = u64();
  } else if (key == "latency.ack") {
    cfg.latency.ack = u64();
  } else if (key == "latency.ack_jitter") {
    cfg.latency.ack_jitter = u64();
  } else if (key == "latency.integrate") {
    cfg.integrate_delay = u64();
  } else if (key == "fault.chunk_loss_rate") {
    cfg.fault.chunk_loss_rate = to_double(value, line, key);
    if (cfg.fault.chunk_loss_rate < 0.0 || cfg.fault.chunk_loss_rate > 1.0) {
      throw ConfigError("loss rate must be within [0, 1]", line, key);
    }
  } else if (key == "fault.lose_chunks") {
    cfg.fault.lose_chunks.clear();
    for (const auto& part : split(value, ',')) {
      cfg.fault.lose_chunks.push_back(
          static_cast<std::uint32_t>(to_u64(trim(part), line, key)));
    }
  } else if (key == "fault.visibility_delay") {
    const Tick t = u64();
    cfg.fault.visibility_delay = {t, t};
  } else if (key == "fault.visibility_delay_min") {
    cfg.fault.visibility_delay.min = u64();
  } else if (key == "fault.visibility_delay_max") {
    cfg.fault.visibility_delay.max = u64();
  } else if (key == "fault.pauses") {
    cfg.fault.pauses.clear();
    for (const auto& part : split(value, ';')) {
      const auto fields = split(trim(part), ':');
      if (fields.size() != 3) {
        throw ConfigError("expected class:start:duration", line, key);
      }
      PauseWindow w;
      w.priority_class = static_cast<int>(to_u64(fields[0], line, key));
      w.start = to_u64(fields[1], line, key);
      w.duration = to_u64(fields[2], line, key);
      cfg.fault.pauses.push_back(w);
    }
  } else if (key == "fault.sdc_flips") {
    cfg.fault.sdc_flips.clear();
    for (const auto& part : split(value, ';')) {
      const auto fields = split(trim(part), ':');
      if (fields.size() != 3) {
        throw ConfigError("expected op:chunk:bit", line, key);
      }
      SdcFlip f;
      f.op = to_u64(fields[0], line, key);
      f.chunk = static_cast<std::uint32_t>(to_u64(fields[1], line, key));
      f.bit = to_u64(fields[2], line, key);
      cfg.fault.sdc_flips.push_back(f);
    }
  } else if (key == "visibility.per_line") {
    cfg.per_line_visibility = to_bool(value, line, key);
  } else if (key == "object.size_bytes") {
    cfg.object_bytes = u64();
  } else if (key == "farm.max_retries") {
    cfg.farm_max_retries = u32();
  } else if (key == "farm.writer_count") {
    cfg.farm_writer_count = u32();
  } else if (key == "farm.reader_schedule") {
    if (value != "enumerate" && value != "seeded-random") {
      throw ConfigError("expected enumerate|seeded-random", line, key);
    }
    cfg.farm_reader_schedule = value;
  } else if (key == "farm.sample_count") {
    cfg.farm_sample_count = u32();
  } else if (key == "oae.invariant_id") {
    cfg.oae.invariant_id = value;
  } else if (key == "oae.expected_schema") {
    cfg.oae.expected_schema = u32();
  } else if (key == "oae.receiver_schema") {
    cfg.oae.receiver_schema = u32();
  } else if (key == "oae.reflect_loss_exempt") {
    cfg.oae.reflect_loss_exempt = to_bool(value, line, key);
  } else if (key == "oae.reflect_timeout") {
    cfg.oae.reflect_timeout = u64();
  } else if (key == "oae.reflect_latency") {
    cfg.oae.reflect_latency = u64();
  } else if (key == "sdc.trials") {
    cfg.sdc_trials = u32();
  } else if (key == "partial.chunks") {
    cfg.partial_chunks = u32();
  } else if (key == "ecmp.flows") {
    cfg.ecmp.flow_count = u32();
  } else if (key == "ecmp.paths") {
    cfg.ecmp.path_count = u32();
  } else if (key == "ecmp.qps") {
    cfg.ecmp.qps_per_flow = u32();
  } else if (key == "ecmp.trials") {
    cfg.ecmp.trials = u32();
  } else {
    throw ConfigError("unknown key", line, key);
  }
}

}  // namespace

ScenarioConfig default_config(const std::string& scenario) {
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  if (scenario == "partial-loss") {
    cfg.mode = "rc";
    cfg.mtu_bytes = 64;
    cfg.partial_chunks = 1024;
  } else if (scenario == "sdc") {
    cfg.mode = "rdma";
    cfg.sdc_trials = 1000;
    cfg.oae.invariant_id = "status-in-set";
  } else if (scenario == "dht-torn") {
    cfg.mode = "plain";
    cfg.object_bytes = kEntryBytes;
  } else if (scenario == "pfc-stall") {
    cfg.mode = "rc";
    cfg.mtu_bytes = 64;
    cfg.partial_chunks = 4;
    cfg.fault.pauses.push_back(PauseWindow{0, 5, 20});
  } else if (scenario == "ecmp") {
    cfg.mode = "hash";
  } else if (scenario == "table1") {
    cfg.mode = "matrix";
  } else {
    throw ConfigError("unknown scenario: " + scenario);
  }
  return cfg;
}

ScenarioConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  std::string scenario_name = "partial-loss";
  // First pass finds the scenario so the right defaults seed the parse.
  {
    std::istringstream scan(text);
    std::string l;
    int n = 0;
    while (std::getline(scan, l)) {
      ++n;
      const auto hash = l.find('#');
      if (hash != std::string::npos) l.resize(hash);
      l = trim(l);
      if (l.empty()) continue;
      const auto eq = l.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("expected 'key = value'", n, l);
      }
      if (trim(l.substr(0, eq)) == "scenario") {
        scenario_name = trim(l.substr(eq + 1));
      }
    }
  }
  ScenarioConfig cfg = default_config(scenario_name);
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const std::string l = trim(raw);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected 'key = value'", line_no, l);
    }
    const std::string key = trim(l.substr(0, eq));
    const std::string value = trim(l.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line_no, key);
    apply_key(cfg, key, value, line_no);
  }
  return cfg;
}

ScenarioConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ScenarioConfig& cfg) {
  std::ostringstream out;
  out << "scenario = " << cfg.scenario << "\n";
  out << "seed = " << cfg.seed << "\n";
  if (!cfg.mode.empty()) out << "mode = " << cfg.mode << "\n";
  out << "transport.mode = " << transport_mode_name(cfg.transport_mode)
      << "\n";
  out << "transport.mtu_bytes = " << cfg.mtu_bytes << "\n";
  out << "transport.timeout = " << cfg.latency.timeout << "\n";
  out << "transport.priority_class = " << cfg.priority_class << "\n";
  out << "transport.retry_rounds = " << cfg.latency.retry_rounds << "\n";
  out << "latency.placement = " << cfg.latency.placement << "\n";
  out << "latency.transmission = " << cfg.latency.transmission << "\n";
  out << "latency.wire = " << cfg.latency.wire << "\n";
  out << "latency.per_chunk = " << cfg.latency.per_chunk << "\n";
  out << "latency.ack = " << cfg.latency.ack << "\n";
  out << "latency.ack_jitter = " << cfg.latency.ack_jitter << "\n";
  out << "latency.integrate = " << cfg.integrate_delay << "\n";
  char rate[32];
  std::snprintf(rate, sizeof(rate), "%.17g", cfg.fault.chunk_loss_rate);
  out << "fault.chunk_loss_rate = " << rate << "\n";
  if (!cfg.fault.lose_chunks.empty()) {
    out << "fault.lose_chunks = ";
    for (std::size_t i = 0; i < cfg.fault.lose_chunks.size(); ++i) {
      if (i) out << ",";
      out << cfg.fault.lose_chunks[i];
    }
    out << "\n";
  }
  out << "fault.visibility_delay_min = " << cfg.fault.visibility_delay.min
      << "\n";
  out << "fault.visibility_delay_max = " << cfg.fault.visibility_delay.max
      << "\n";
  if (!cfg.fault.pauses.empty()) {
    out << "fault.pauses = ";
    for (std::size_t i = 0; i < cfg.fault.pauses.size(); ++i) {
      const auto& w = cfg.fault.pauses[i];
      if (i) out << ";";
      out << w.priority_class << ":" << w.start << ":" << w.duration;
    }
    out << "\n";
  }
  if (!cfg.fault.sdc_flips.empty()) {
    out << "fault.sdc_flips = ";
    for (std::size_t i = 0; i < cfg.fault.sdc_flips.size(); ++i) {
      const auto& f = cfg.fault.sdc_flips[i];
      if (i) out << ";";
      out << f.op << ":" << f.chunk << ":" << f.bit;
    }
    out << "\n";
  }
  out << "visibility.per_line = " << (cfg.per_line_visibility ? 1 : 0) << "\n";
  out << "object.size_bytes = " << cfg.object_bytes << "\n";
  out << "farm.max_retries = " << cfg.farm_max_retries << "\n";
  out << "farm.writer_count = " << cfg.farm_writer_count << "\n";
  out << "farm.reader_schedule = " << cfg.farm_reader_schedule << "\n";
  out << "farm.sample_count = " << cfg.farm_sample_count << "\n";
  out << "oae.invariant_id = " << cfg.oae.invariant_id << "\n";
  out << "oae.expected_schema = " << cfg.oae.expected_schema << "\n";
  out << "oae.receiver_schema = " << cfg.oae.receiver_schema << "\n";
  out << "oae.reflect_loss_exempt = " << (cfg.oae.reflect_loss_exempt ? 1 : 0)
      << "\n";
  out << "oae.reflect_timeout = " << cfg.oae.reflect_timeout << "\n";
  out << "oae.reflect_latency = " << cfg.oae.reflect_latency << "\n";
  out << "sdc.trials = " << cfg.sdc_trials << "\n";
  out << "partial.chunks = " << cfg.partial_chunks << "\n";
  out << "ecmp.flows = " << cfg.ecmp.flow_count << "\n";
  out << "ecmp.paths = " << cfg.ecmp.path_count << "\n";
  out << "ecmp.qps = " << cfg.ecmp.qps_per_flow << "\n";
  out << "ecmp.trials = " << cfg.ecmp.trials << "\n";
  return out.str();
}

const std::string* GapReport::extra(const std::string& key) const {
  for (const auto& [k, v] : extras) {
    if (k == key) return &v;
  }
  return nullptr;
}

void GapReport::add_extra(const std::string& key, const std::string& value) {
  extras.emplace_back(key, value);
}

void GapReport::check() const {
  if (sdc_detected > sdc_injected) {
    throw SimError("report: sdc_detected exceeds sdc_injected");
  }
  if (misleading_completions > completions) {
    throw SimError("report: misleading_completions exceeds completions");
  }
  if (success_completions < valid_t6) {
    throw SimError("report: valid_t6 exceeds success completions");
  }
  if (misleading_completions != success_completions - valid_t6) {
    throw SimError(
        "report: misleading_completions must equal success completions "
        "minus those reaching a valid t6");
  }
}

std::string render_report(const GapReport& r) {
  std::ostringstream out;
  out << "scenario:                " << r.scenario;
  if (!r.mode.empty()) out << " (mode " << r.mode << ")";
  out << "\n";
  out << "seed:                    " << r.seed << "\n";
  out << "completions:             " << r.completions << " ("
      << r.success_completions << " success)\n";
  out << "valid t6:                " << r.valid_t6 << "\n";
  out << "misleading completions:  " << r.misleading_completions << "\n";
  out << "torn observed:           " << r.torn_observed << "\n";
  out << "sdc injected/detected:   " << r.sdc_injected << "/" << r.sdc_detected
      << "\n";
  out << "chunks retransmitted:    " << r.chunks_retransmitted << "\n";
  char buf[96];
  if (r.visibility_gap_samples > 0) {
    std::snprintf(buf, sizeof(buf), "%.3f mean / %llu max over %llu",
                  r.mean_visibility_gap,
                  static_cast<unsigned long long>(r.max_visibility_gap),
                  static_cast<unsigned long long>(r.visibility_gap_samples));
    out << "visibility gap (ticks):  " << buf << "\n";
  }
  if (r.semantic_gap_samples > 0) {
    std::snprintf(buf, sizeof(buf), "%.3f mean / %llu max over %llu",
                  r.mean_semantic_gap,
                  static_cast<unsigned long long>(r.max_semantic_gap),
                  static_cast<unsigned long long>(r.semantic_gap_samples));
    out << "semantic gap (ticks):    " << buf << "\n";
  }
  out << "events fired:            " << r.events << "\n";
  for (const auto& [k, v] : r.extras) {
    out << k << ": " << v << "\n";
  }
  return out.str();
}

}  // namespace semgap
