#include "semgap/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "semgap/farm.hpp"

namespace semgap {

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

// A naive receiving application: integrates whatever is visible once the
// transfer's visibility event fires, trusting the completion signal. Keeps
// a ground-truth record of whether the integrated bytes matched the sent
// payload.
struct NaiveApp {
  std::unordered_map<OpId, bool> valid;

  void install(VerbsEngine& engine, Tick integrate_delay) {
    engine.set_integration_hook([this, &engine, integrate_delay](
                                    Simulator& s, OpId op, Tick) {
      if (engine.request(op).payload.empty()) return;
      s.schedule_stage(
          s.now() + integrate_delay, op, Stage::SemanticAgreement, "naive",
          [this, &engine, op](Simulator&) {
            const auto& req = engine.request(op);
            auto integrated = engine.memory().read_visible(
                req.remote_offset, req.payload.size());
            valid[op] = integrated == req.payload;
          });
    });
  }
};

void accumulate_gaps(const Simulator& sim, GapReport& report) {
  for (const auto& [op, tl] : sim.timelines()) {
    const StageGaps g = gaps(tl);
    if (g.visibility) {
      report.visibility_gap_samples += 1;
      report.mean_visibility_gap += static_cast<double>(*g.visibility);
      report.max_visibility_gap =
          std::max(report.max_visibility_gap, *g.visibility);
    }
    if (g.semantic) {
      report.semantic_gap_samples += 1;
      report.mean_semantic_gap += static_cast<double>(*g.semantic);
      report.max_semantic_gap = std::max(report.max_semantic_gap, *g.semantic);
    }
  }
  if (report.visibility_gap_samples > 0) {
    report.mean_visibility_gap /=
        static_cast<double>(report.visibility_gap_samples);
  }
  if (report.semantic_gap_samples > 0) {
    report.mean_semantic_gap /=
        static_cast<double>(report.semantic_gap_samples);
  }
}

// Completion/validity bookkeeping shared by the engine-backed scenarios.
void account_completions(VerbsEngine& engine, const Simulator& sim,
                         const NaiveApp* app, GapReport& report,
                         std::uint64_t extra_valid = 0) {
  for (OpId op : engine.op_ids()) {
    if (!engine.completed(op)) continue;
    report.completions += 1;
    if (engine.status(op) != CompletionStatus::Success) continue;
    report.success_completions += 1;
    const StageTimeline* tl = sim.find_timeline(op);
    const bool has_t6 = tl && tl->has(Stage::SemanticAgreement);
    bool valid = false;
    if (app) {
      auto it = app->valid.find(op);
      valid = has_t6 && it != app->valid.end() && it->second;
    }
    if (valid) report.valid_t6 += 1;
  }
  report.valid_t6 += extra_valid;
  report.misleading_completions =
      report.success_completions - report.valid_t6;
  report.chunks_retransmitted = engine.total_chunks_retransmitted();
}

TransportMode mode_to_transport(const std::string& mode, bool& sdr) {
  sdr = false;
  if (mode == "rc" || mode == "rdma" || mode.empty()) {
    return TransportMode::ReliableConnected;
  }
  if (mode == "uc") return TransportMode::UnreliableConnected;
  if (mode == "sdr") {
    sdr = true;
    return TransportMode::UnreliableConnected;
  }
  if (mode == "connectionless") return TransportMode::Connectionless;
  throw ConfigError("unknown transport mode: " + mode);
}

std::vector<std::byte> seeded_payload(std::uint64_t seed, std::size_t len) {
  std::vector<std::byte> bytes(len);
  for (std::size_t i = 0; i < len; ++i) {
    bytes[i] =
        std::byte{static_cast<unsigned char>(mix64(seed, 0x9A71ull, i))};
  }
  return bytes;
}

RunResult run_partial_loss(const ScenarioConfig& cfg, bool want_trace) {
  bool sdr = false;
  const TransportMode transport = mode_to_transport(cfg.mode, sdr);

  Simulator sim;
  sim.enable_trace(want_trace);
  const std::size_t payload_len =
      static_cast<std::size_t>(cfg.partial_chunks) * cfg.mtu_bytes;
  RemoteMemory mem(payload_len, 64);
  mem.register_region(0, payload_len);

  FaultPlan plan = cfg.fault;
  plan.seed = cfg.seed;
  VisibilityPolicy vis;
  vis.per_line = cfg.per_line_visibility;
  VerbsEngine engine(sim, mem, plan, cfg.latency, vis);
  NaiveApp app;
  app.install(engine, cfg.integrate_delay);

  const QpId qp = engine.create_qp(transport, cfg.mtu_bytes,
                                   cfg.priority_class, sdr);
  auto payload = seeded_payload(cfg.seed, payload_len);
  const OpId op = engine.post_write(qp, payload, 0);
  sim.run_all();
  auto records = engine.poll_cq(qp);

  GapReport report;
  report.scenario = cfg.scenario;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  account_completions(engine, sim, &app, report);
  accumulate_gaps(sim, report);
  report.events = sim.events_fired();

  const PartialCompletion pc = engine.partial_report(op);
  report.add_extra("chunks", std::to_string(cfg.partial_chunks));
  report.add_extra("delivered",
                   std::to_string(pc.delivered_count) + "/" +
                       std::to_string(pc.bitmap.chunk_count()));
  report.add_extra("delivered_fraction_pct",
                   fmt("%.4f", pc.delivered_fraction * 100.0));
  const auto missing = pc.bitmap.missing();
  report.add_extra("missing_count", std::to_string(missing.size()));
  if (!missing.empty() && missing.size() <= 8) {
    std::string idx;
    for (std::size_t i = 0; i < missing.size(); ++i) {
      if (i) idx += ",";
      idx += std::to_string(missing[i]);
    }
    report.add_extra("missing_chunks", idx);
  }
  if (pc.bitmap.chunk_count() <= 4096 && !missing.empty()) {
    report.add_extra("bitmap_rle", pc.bitmap.rle());
  }
  report.add_extra("passes", std::to_string(engine.passes(op)));
  report.add_extra("status", records.empty()
                                 ? "none"
                                 : (records.front().status ==
                                            CompletionStatus::Success
                                        ? "success"
                                        : "failure"));
  report.check();
  return RunResult{std::move(report), sim.trace()};
}

RunResult run_sdc(const ScenarioConfig& cfg, bool want_trace) {
  if (cfg.mode != "rdma" && cfg.mode != "oae") {
    throw ConfigError("sdc mode must be rdma or oae, got '" + cfg.mode + "'");
  }
  const std::uint32_t trials = cfg.sdc_trials;
  const std::size_t slot = 512;

  Simulator sim;
  sim.enable_trace(want_trace);
  RemoteMemory mem(std::max<std::size_t>(trials, 1) * slot, 64);
  mem.register_region(0, mem.size_bytes());

  FaultPlan plan = cfg.fault;
  plan.seed = cfg.seed;
  // One transfer per trial, posted sequentially: op ids are 1..trials.
  for (std::uint32_t t = 0; t < trials; ++t) {
    plan.sdc_flips.push_back(
        SdcFlip{t + 1, 0, pick_value_region_bit(cfg.seed, t)});
  }
  VerbsEngine engine(sim, mem, plan, cfg.latency);

  GapReport report;
  report.scenario = cfg.scenario;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  report.sdc_injected = trials;

  const auto payload = make_stamped_object(2);
  std::uint64_t committed = 0;

  if (cfg.mode == "rdma") {
    NaiveApp app;
    app.install(engine, cfg.integrate_delay);
    const QpId qp = engine.create_qp(TransportMode::ReliableConnected,
                                     cfg.mtu_bytes, cfg.priority_class);
    for (std::uint32_t t = 0; t < trials; ++t) {
      engine.post_write(qp, payload, t * slot);
      sim.run_all();
    }
    engine.poll_cq(qp);
    account_completions(engine, sim, &app, report);
    report.sdc_detected = 0;  // the completion path carries no evidence
  } else {
    std::deque<OaeLink> links;
    std::unordered_map<OpId, OaeLink*> by_op;
    engine.set_integration_hook([&by_op](Simulator& s, OpId op, Tick) {
      auto it = by_op.find(op);
      if (it != by_op.end()) it->second->on_transfer_visible(s);
    });
    const QpId qp = engine.create_qp(TransportMode::ReliableConnected,
                                     cfg.mtu_bytes, cfg.priority_class);
    for (std::uint32_t t = 0; t < trials; ++t) {
      links.emplace_back(engine, cfg.oae);
      OaeLink& link = links.back();
      const OpId op = link.initiate(qp, payload, t * slot);
      by_op[op] = &link;
      sim.run_all();
      if (link.state() == LinkPhase::Rejected &&
          link.reject_reason() == RejectReason::SdcDetected) {
        report.sdc_detected += 1;
      }
      if (link.state() == LinkPhase::Committed) committed += 1;
    }
    engine.poll_cq(qp);
    account_completions(engine, sim, nullptr, report, committed);
    report.add_extra("committed", std::to_string(committed));
  }

  accumulate_gaps(sim, report);
  report.events = sim.events_fired();
  report.add_extra("trials", std::to_string(trials));
  report.add_extra(
      "verbs_success_rate_pct",
      fmt("%.2f", trials == 0 ? 0.0
                              : 100.0 * static_cast<double>(
                                            report.success_completions) /
                                    trials));
  report.add_extra(
      "detection_rate_pct",
      fmt("%.2f", trials == 0 ? 0.0
                              : 100.0 * static_cast<double>(
                                            report.sdc_detected) /
                                    trials));
  report.check();
  return RunResult{std::move(report), sim.trace()};
}

// One torn-experiment episode: interleaves a line-granular writer with a
// line-granular reader over the shared object region, per the schedule.
struct TornEpisode {
  std::vector<std::vector<std::byte>> observed_lines;
  std::optional<FarmWriter> farm_writer;
  std::optional<FarmReader> farm_reader;
  std::size_t reader_steps_done = 0;
};

struct TornCounters {
  std::uint64_t episodes = 0;
  std::uint64_t torn = 0;
  std::uint64_t committed = 0;
  std::uint64_t committed_torn = 0;
  std::uint64_t rejected_invariant = 0;
  std::uint64_t rejected_sdc = 0;
  std::uint64_t retried = 0;
  std::uint64_t unresolved = 0;
};

std::vector<std::byte> assemble_lines(
    const std::vector<std::vector<std::byte>>& lines, std::size_t total) {
  std::vector<std::byte> out;
  out.reserve(total);
  for (const auto& l : lines) out.insert(out.end(), l.begin(), l.end());
  return out;
}

RunResult run_dht_torn(const ScenarioConfig& cfg, bool want_trace) {
  const bool plain = cfg.mode == "plain";
  const bool farm = cfg.mode == "farm";
  const bool oae = cfg.mode == "oae";
  if (!plain && !farm && !oae) {
    throw ConfigError("dht-torn mode must be plain, farm or oae, got '" +
                      cfg.mode + "'");
  }
  const std::size_t size = cfg.object_bytes;
  StampedObjectSpec spec;
  spec.size = size;
  const auto v1 = make_stamped_object(1, spec);
  const auto v2 = make_stamped_object(2, spec);

  Simulator sim;
  sim.enable_trace(want_trace);

  GapReport report;
  report.scenario = cfg.scenario;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  TornCounters counters;

  const std::size_t raw_lines = FarmLayout::raw_line_count(size);
  const std::size_t versioned_lines = FarmLayout::versioned_line_count(size);

  if (plain || oae) {
    const unsigned n = static_cast<unsigned>(raw_lines);
    auto schedules = enumerate_interleavings(n, 1);
    RemoteMemory mem(raw_lines * 64, 64);
    const std::uint32_t v2_checksum = crc32(v2);
    const InvariantSpec inv = builtin_invariant("all-versions-equal");
    const InvariantContext ctx;
    std::deque<TornEpisode> episodes;

    Tick base = 0;
    for (std::size_t e = 0; e < schedules.size(); ++e) {
      const auto& schedule = schedules[e];
      episodes.emplace_back();
      TornEpisode* ep = &episodes.back();
      const OpId subject = e + 1;
      sim.schedule(base, EventKind::Note, subject, "episode_reset",
                   [&mem, &v1, ep](Simulator& s) {
                     mem.place(0, v1);
                     mem.promote_range(0, v1.size(), s.now());
                     ep->observed_lines.clear();
                   });
      Tick t = base + 1;
      for (const auto& step : schedule.steps) {
        const std::size_t line = step.line_index;
        const std::size_t off = line * 64;
        const std::size_t width = std::min<std::size_t>(64, size - off);
        if (step.actor == Actor::Writer) {
          sim.schedule(t, EventKind::WriterStep, subject,
                       "line=" + std::to_string(line),
                       [&mem, &v2, off, width](Simulator& s) {
                         mem.place(off, std::span<const std::byte>(v2)
                                            .subspan(off, width));
                         mem.promote_range(off, width, s.now());
                       });
        } else {
          sim.schedule(t, EventKind::ReaderStep, subject,
                       "line=" + std::to_string(line),
                       [&mem, ep, off, width](Simulator&) {
                         ep->observed_lines.push_back(
                             mem.read_visible(off, width));
                       });
        }
        ++t;
      }
      sim.schedule(t, EventKind::Note, subject, "episode_eval",
                   [ep, size, oae, v2_checksum, &inv, &ctx, &counters,
                    &cfg](Simulator&) {
                     counters.episodes += 1;
                     auto assembled = assemble_lines(ep->observed_lines, size);
                     const bool torn = stamps_mixed(assembled);
                     if (torn) counters.torn += 1;
                     if (!oae) return;
                     const AssemblyOutcome out = resolve_assembly(
                         assembled, v2_checksum, inv, ctx,
                         cfg.oae.receiver_schema, cfg.oae.expected_schema);
                     if (out.phase == LinkPhase::Committed) {
                       counters.committed += 1;
                       if (torn) counters.committed_torn += 1;
                     } else if (out.reason ==
                                RejectReason::InvariantViolation) {
                       counters.rejected_invariant += 1;
                     } else if (out.reason == RejectReason::SdcDetected) {
                       counters.rejected_sdc += 1;
                     }
                   });
      base = t + 1;
    }
    sim.run_all();
  } else {
    const unsigned n = static_cast<unsigned>(versioned_lines);
    std::vector<InterleavingSchedule> schedules;
    if (cfg.farm_reader_schedule == "enumerate") {
      schedules = enumerate_interleavings(n, 2);
    } else {
      // Seeded uniform interleavings: pick writer/reader by remaining counts.
      for (std::uint32_t k = 0; k < cfg.farm_sample_count; ++k) {
        InterleavingSchedule s;
        unsigned w = 0;
        unsigned r = 0;
        const unsigned total_r = 2 * n;
        std::uint64_t stream = mix64(cfg.seed, 0xFA53ull, k);
        while (w < n || r < total_r) {
          stream = mix64(stream);
          const std::uint64_t pick = stream % (n - w + total_r - r);
          if (pick < n - w) {
            s.steps.push_back({Actor::Writer, w++});
          } else {
            s.steps.push_back({Actor::Reader, r++ % n});
          }
        }
        schedules.push_back(std::move(s));
      }
    }

    RemoteMemory mem(FarmLayout::region_bytes(size), 64);
    FarmObject obj(mem, 0, size);
    std::deque<TornEpisode> episodes;
    Tick base = 0;
    for (std::size_t e = 0; e < schedules.size(); ++e) {
      const auto& schedule = schedules[e];
      episodes.emplace_back();
      TornEpisode* ep = &episodes.back();
      const OpId subject = e + 1;
      sim.schedule(base, EventKind::Note, subject, "episode_reset",
                   [&obj, &v1, &v2, ep](Simulator&) {
                     obj.seed(1, v1);
                     ep->farm_writer.emplace(obj, 2, v2);
                     ep->farm_reader.emplace(obj);
                     ep->reader_steps_done = 0;
                   });
      Tick t = base + 1;
      for (const auto& step : schedule.steps) {
        if (step.actor == Actor::Writer) {
          sim.schedule(t, EventKind::WriterStep, subject,
                       "line=" + std::to_string(step.line_index),
                       [ep](Simulator&) {
                         ep->farm_writer->step();
                         if (ep->farm_writer->done()) {
                           ep->farm_writer->commit();
                         }
                       });
        } else {
          sim.schedule(t, EventKind::ReaderStep, subject,
                       "line=" + std::to_string(step.line_index),
                       [ep, n](Simulator&) {
                         if (ep->reader_steps_done < n) {
                           ep->farm_reader->step_pass1();
                         } else {
                           ep->farm_reader->step_pass2();
                         }
                         ep->reader_steps_done += 1;
                       });
        }
        ++t;
      }
      sim.schedule(
          t, EventKind::Note, subject, "episode_eval",
          [ep, &counters, &cfg](Simulator&) {
            counters.episodes += 1;
            FarmReader& reader = *ep->farm_reader;
            unsigned retries = 0;
            while (!reader.attempt_consistent() &&
                   retries < cfg.farm_max_retries) {
              reader.reset_attempt();
              reader.run_remaining_attempt();
              ++retries;
            }
            counters.retried += retries > 0 ? 1 : 0;
            if (!reader.attempt_consistent()) {
              counters.unresolved += 1;
              return;
            }
            if (stamps_mixed(reader.snapshot())) counters.torn += 1;
          });
      base = t + 1;
    }
    sim.run_all();
  }

  report.torn_observed = counters.torn;
  report.events = sim.events_fired();
  report.add_extra("episodes", std::to_string(counters.episodes));
  report.add_extra("raw_lines", std::to_string(raw_lines));
  report.add_extra("versioned_lines", std::to_string(versioned_lines));
  if (oae) {
    report.add_extra("committed", std::to_string(counters.committed));
    report.add_extra("committed_torn",
                     std::to_string(counters.committed_torn));
    report.add_extra("rejected_invariant",
                     std::to_string(counters.rejected_invariant));
    report.add_extra("rejected_stale",
                     std::to_string(counters.rejected_sdc));
  }
  if (farm) {
    report.add_extra("retried_episodes", std::to_string(counters.retried));
    report.add_extra("unresolved", std::to_string(counters.unresolved));
  }
  report.check();
  return RunResult{std::move(report), sim.trace()};
}

RunResult run_pfc_stall(const ScenarioConfig& cfg, bool want_trace) {
  Simulator sim;
  sim.enable_trace(want_trace);
  const std::size_t payload_len =
      static_cast<std::size_t>(cfg.partial_chunks) * cfg.mtu_bytes;
  RemoteMemory mem(payload_len * 2, 64);
  mem.register_region(0, mem.size_bytes());

  FaultPlan plan = cfg.fault;
  plan.seed = cfg.seed;
  VerbsEngine engine(sim, mem, plan, cfg.latency);
  NaiveApp app;
  app.install(engine, cfg.integrate_delay);

  for (const PauseWindow& w : plan.pauses) {
    sim.schedule(w.start, EventKind::PauseStart, 0,
                 "class=" + std::to_string(w.priority_class));
    sim.schedule(w.start + w.duration, EventKind::PauseEnd, 0,
                 "class=" + std::to_string(w.priority_class));
  }

  const QpId paused_qp = engine.create_qp(TransportMode::ReliableConnected,
                                          cfg.mtu_bytes, cfg.priority_class);
  const QpId other_qp = engine.create_qp(TransportMode::ReliableConnected,
                                         cfg.mtu_bytes,
                                         cfg.priority_class + 1);
  auto payload = seeded_payload(cfg.seed, payload_len);
  const OpId paused_op = engine.post_write(paused_qp, payload, 0);
  const OpId other_op = engine.post_write(other_qp, payload, payload_len);
  sim.run_all();
  engine.poll_cq(paused_qp);
  engine.poll_cq(other_qp);

  GapReport report;
  report.scenario = cfg.scenario;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  account_completions(engine, sim, &app, report);
  accumulate_gaps(sim, report);
  report.events = sim.events_fired();

  auto t3_t4 = [&sim](OpId op) -> std::uint64_t {
    const StageTimeline* tl = sim.find_timeline(op);
    return *tl->stage(Stage::Completion) - *tl->stage(Stage::RemotePlacement);
  };
  report.add_extra("paused_class_t3_t4_gap", std::to_string(t3_t4(paused_op)));
  report.add_extra("other_class_t3_t4_gap", std::to_string(t3_t4(other_op)));
  report.check();
  return RunResult{std::move(report), sim.trace()};
}

RunResult run_ecmp_scenario(const ScenarioConfig& cfg) {
  EcmpConfig ecfg = cfg.ecmp;
  ecfg.hash_seed = cfg.seed;
  const EcmpResult res = ecmp_load(ecfg);
  GapReport report;
  report.scenario = cfg.scenario;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  report.add_extra("flows", std::to_string(ecfg.flow_count));
  report.add_extra("paths", std::to_string(ecfg.path_count));
  report.add_extra("qps_per_flow", std::to_string(ecfg.qps_per_flow));
  report.add_extra("trials", std::to_string(ecfg.trials));
  report.add_extra("no_collision_rate", fmt("%.6f", res.no_collision_rate));
  report.add_extra("exact_no_collision", fmt("%.6f", res.exact_no_collision));
  report.add_extra("mean_max_load", fmt("%.4f", res.mean_max_load));
  report.add_extra("mean_normalized_max_load",
                   fmt("%.4f", res.mean_normalized_max_load));
  report.check();
  return RunResult{std::move(report), {}};
}

RunResult run_table1(const ScenarioConfig& cfg) {
  const GapMatrix matrix = simulate_gap_matrix(default_gap_suite(cfg.seed));
  const auto mismatches = matrix_mismatches(matrix);
  GapReport report;
  report.scenario = cfg.scenario;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  for (const auto& row : matrix.rows) {
    report.add_extra(row.profile + ".visibility",
                     gap_verdict_name(row.visibility));
    report.add_extra(row.profile + ".semantic",
                     gap_verdict_name(row.semantic));
    report.add_extra(row.profile + ".boundary", row.boundary.to_string());
    report.add_extra(row.profile + ".reflecting",
                     reflecting_phase_name(row.reflecting));
    report.add_extra(row.profile + ".sdc_detection",
                     sdc_detection_name(row.sdc_detection));
  }
  report.add_extra("mismatches", std::to_string(mismatches.size()));
  for (const auto& m : mismatches) report.add_extra("mismatch", m);
  report.check();
  return RunResult{std::move(report), {}};
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, bool want_trace) {
  if (cfg.scenario == "partial-loss") return run_partial_loss(cfg, want_trace);
  if (cfg.scenario == "sdc") return run_sdc(cfg, want_trace);
  if (cfg.scenario == "dht-torn") return run_dht_torn(cfg, want_trace);
  if (cfg.scenario == "pfc-stall") return run_pfc_stall(cfg, want_trace);
  if (cfg.scenario == "ecmp") return run_ecmp_scenario(cfg);
  if (cfg.scenario == "table1") return run_table1(cfg);
  throw ConfigError("unknown scenario: " + cfg.scenario);
}

ComparisonResult compare_modes(const ScenarioConfig& base,
                               const std::vector<std::string>& modes) {
  if (modes.size() < 2) {
    throw ConfigError("compare needs at least two modes");
  }
  ComparisonResult out;
  for (const auto& mode : modes) {
    ScenarioConfig cfg = base;
    cfg.mode = mode;
    out.reports.push_back(run_scenario(cfg, false).report);
  }
  return out;
}

std::string render_comparison(const ComparisonResult& result) {
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const std::size_t label_w = 26;
  const std::size_t col_w = 16;
  std::ostringstream out;
  out << pad("metric", label_w);
  for (const auto& r : result.reports) out << pad(r.mode, col_w);
  out << "\n";
  auto row = [&](const std::string& label, auto get) {
    out << pad(label, label_w);
    for (const auto& r : result.reports) out << pad(get(r), col_w);
    out << "\n";
  };
  row("completions", [](const GapReport& r) {
    return std::to_string(r.completions);
  });
  row("success", [](const GapReport& r) {
    return std::to_string(r.success_completions);
  });
  row("misleading", [](const GapReport& r) {
    return std::to_string(r.misleading_completions);
  });
  row("torn observed", [](const GapReport& r) {
    return std::to_string(r.torn_observed);
  });
  row("sdc detected", [](const GapReport& r) {
    return std::to_string(r.sdc_detected) + "/" +
           std::to_string(r.sdc_injected);
  });
  row("chunks retransmitted", [](const GapReport& r) {
    return std::to_string(r.chunks_retransmitted);
  });
  row("max semantic gap", [](const GapReport& r) {
    return std::to_string(r.max_semantic_gap);
  });
  return out.str();
}

double exact_no_collision_probability(std::uint32_t flows,
                                      std::uint32_t paths) {
  if (flows > paths) return 0.0;
  double p = 1.0;
  for (std::uint32_t i = 0; i < flows; ++i) {
    p *= static_cast<double>(paths - i) / paths;
  }
  return p;
}

EcmpResult ecmp_load(const EcmpConfig& cfg) {
  if (cfg.flow_count == 0 || cfg.path_count == 0 || cfg.qps_per_flow == 0 ||
      cfg.trials == 0) {
    throw ConfigError("ecmp parameters must be positive");
  }
  EcmpResult res;
  res.config = cfg;
  res.exact_no_collision =
      exact_no_collision_probability(cfg.flow_count, cfg.path_count);

  const std::uint64_t units =
      static_cast<std::uint64_t>(cfg.flow_count) * cfg.qps_per_flow;
  std::vector<std::uint32_t> loads(cfg.path_count);
  std::uint64_t no_collision = 0;
  double sum_max = 0.0;
  for (std::uint32_t trial = 0; trial < cfg.trials; ++trial) {
    std::fill(loads.begin(), loads.end(), 0u);
    for (std::uint32_t f = 0; f < cfg.flow_count; ++f) {
      for (std::uint32_t q = 0; q < cfg.qps_per_flow; ++q) {
        const std::uint64_t h = mix64(cfg.hash_seed, trial, f, q);
        loads[h % cfg.path_count] += 1;
      }
    }
    const std::uint32_t max_load =
        *std::max_element(loads.begin(), loads.end());
    sum_max += max_load;
    res.max_load_histogram[max_load] += 1;
    if (max_load <= 1) no_collision += 1;
  }
  res.no_collision_rate =
      static_cast<double>(no_collision) / cfg.trials;
  res.mean_max_load = sum_max / cfg.trials;
  const double expected_per_path =
      static_cast<double>(units) / cfg.path_count;
  res.mean_normalized_max_load = res.mean_max_load / expected_per_path;
  return res;
}

std::string render_ecmp(const EcmpResult& res) {
  std::ostringstream out;
  out << "flows:                    " << res.config.flow_count << "\n";
  out << "paths:                    " << res.config.path_count << "\n";
  out << "qps per flow:             " << res.config.qps_per_flow << "\n";
  out << "trials:                   " << res.config.trials << "\n";
  out << "no-collision rate:        " << fmt("%.6f", res.no_collision_rate)
      << "\n";
  out << "exact product formula:    " << fmt("%.6f", res.exact_no_collision)
      << "\n";
  out << "mean max path load:       " << fmt("%.4f", res.mean_max_load)
      << "\n";
  out << "mean normalized max load: "
      << fmt("%.4f", res.mean_normalized_max_load) << "\n";
  out << "max-load histogram:\n";
  for (const auto& [load, count] : res.max_load_histogram) {
    out << "  " << load << ": " << count << "\n";
  }
  return out.str();
}

IntactProbeResult message_intact_probe(std::uint64_t seed,
                                       std::uint32_t chunk_count,
                                       double loss_rate,
                                       std::uint64_t messages) {
  IntactProbeResult res;
  res.messages = messages;
  for (std::uint64_t m = 0; m < messages; ++m) {
    const auto lost = sample_lost_chunks(seed, m + 1, chunk_count, loss_rate);
    if (lost.empty()) res.intact += 1;
  }
  res.empirical = messages == 0
                      ? 0.0
                      : static_cast<double>(res.intact) / messages;
  return res;
}

GapReport run_randomized_probe(std::uint64_t seed) {
  std::uint64_t stream = mix64(seed, 0x9B0BEull);
  auto draw = [&stream](std::uint64_t bound) {
    stream = mix64(stream);
    return stream % bound;
  };

  Simulator sim;
  RemoteMemory mem(1 << 16, 64);
  mem.register_region(0, mem.size_bytes());

  FaultPlan plan;
  plan.seed = seed;
  const std::uint64_t rate_pick = draw(5);
  plan.chunk_loss_rate = rate_pick == 0 ? 0.0 : 0.04 * static_cast<double>(rate_pick);
  const Tick vis = draw(13);
  plan.visibility_delay = draw(2) == 0 ? VisibilityDelaySpec{vis, vis}
                                       : VisibilityDelaySpec{0, vis};
  if (draw(10) < 3) {
    plan.pauses.push_back(PauseWindow{0, draw(20), draw(15) + 1});
  }

  LatencyConfig lat;
  lat.ack_jitter = draw(5);
  lat.timeout = draw(8) + 1;

  VerbsEngine engine(sim, mem, plan, lat);
  NaiveApp app;
  app.install(engine, 0);

  static const TransportMode kModes[] = {TransportMode::ReliableConnected,
                                         TransportMode::UnreliableConnected,
                                         TransportMode::Connectionless};
  const TransportMode transport = kModes[draw(3)];
  const bool sdr = transport == TransportMode::UnreliableConnected &&
                   draw(2) == 0;
  const std::uint32_t mtu = 64;
  const QpId qp = engine.create_qp(transport, mtu, 0, sdr);

  const std::uint64_t n_ops = draw(3) + 1;
  std::size_t offset = 0;
  for (std::uint64_t i = 0; i < n_ops; ++i) {
    const std::size_t chunks = draw(24) + 1;
    const std::size_t len = chunks * mtu;
    engine.post_write(qp, seeded_payload(seed ^ i, len), offset);
    offset += len;
  }
  if (draw(2) == 0) {
    engine.post_atomic(qp, Verb::AtomicFaa, offset, faa_operands(draw(100)));
  }
  if (draw(2) == 0) {
    engine.post_read(qp, 0, 64);
  }
  sim.run_all();
  engine.poll_cq(qp);

  GapReport report;
  report.scenario = "randomized-probe";
  report.seed = seed;
  account_completions(engine, sim, &app, report);
  accumulate_gaps(sim, report);
  report.events = sim.events_fired();
  report.check();
  return report;
}

}  // namespace semgap
