#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semgap/faults.hpp"
#include "semgap/sdr.hpp"
#include "semgap/sim.hpp"

namespace semgap {

using QpId = std::uint32_t;

enum class TransportMode {
  ReliableConnected,
  UnreliableConnected,
  Connectionless,
};

enum class Verb { Send, Recv, Write, Read, AtomicCas, AtomicFaa };

enum class CompletionStatus { Success, Failure };

const char* transport_mode_name(TransportMode m);

struct QueuePair {
  QpId id = 0;
  TransportMode transport_mode = TransportMode::ReliableConnected;
  std::uint32_t mtu_bytes = 4096;
  int priority_class = 0;
  // Chunk-receipt bitmap and selective retransmission instead of the
  // whole-message UC failure rule.
  bool sdr_partial = false;
};

// The 1-bit completion: one status, one tick, nothing about the payload.
struct CompletionRecord {
  OpId op_id = 0;
  CompletionStatus status = CompletionStatus::Success;
  Tick at = 0;
};

// Atomic verbs carry exactly 8-byte operands.
struct AtomicOperands {
  std::vector<std::byte> expect;  // CAS
  std::vector<std::byte> swap;    // CAS
  std::vector<std::byte> addend;  // FAA
};

AtomicOperands cas_operands(std::uint64_t expect, std::uint64_t swap);
AtomicOperands faa_operands(std::uint64_t addend);

struct WorkRequest {
  OpId op_id = 0;
  Verb verb = Verb::Write;
  std::vector<std::byte> payload;
  std::size_t remote_offset = 0;
  std::optional<AtomicOperands> atomic_operands;
};

// Stage spacing in ticks. Jitter and pauses stretch the completion leg only.
struct LatencyConfig {
  Tick placement = 1;     // submission -> local placement
  Tick transmission = 1;  // local placement -> wire
  Tick wire = 1;          // wire -> first chunk arrival
  Tick per_chunk = 1;     // spacing between consecutive chunk arrivals
  Tick ack = 1;           // last arrival -> completion
  Tick ack_jitter = 0;    // max seeded extra completion delay per op
  Tick timeout = 8;       // loss detection lag before a retransmission pass
  std::uint32_t retry_rounds = 64;  // pass cap before giving up
};

// How and when placed data becomes visible to the remote CPU.
struct VisibilityPolicy {
  // Writes never self-promote; a signal completion promotes every prior
  // write in the same context at the signal's completion tick.
  bool on_signal = false;
  // Fixed lag added to every sampled visibility delay (fabric-delivery
  // completions whose coherence catches up later).
  Tick coherence_lag = 0;
  // Promote one line at a time, `per_line_spread` ticks apart.
  bool per_line = false;
  Tick per_line_spread = 1;
};

// Models the verb interface of a NIC pair over one remote memory: work
// requests in, chunked transfers through the fault plan, one-bit completion
// records out. Runs entirely inside one Simulator.
class VerbsEngine {
 public:
  VerbsEngine(Simulator& sim, RemoteMemory& mem, FaultPlan plan,
              LatencyConfig lat = {}, VisibilityPolicy vis = {});

  QpId create_qp(TransportMode mode, std::uint32_t mtu_bytes = 4096,
                 int priority_class = 0, bool sdr_partial = false);
  const QueuePair& qp(QpId id) const;

  // One-sided write: chunked by MTU, subject to the fault plan. Records t0
  // immediately; later stages arrive as events.
  OpId post_write(QpId qp, std::span<const std::byte> payload,
                  std::size_t remote_offset, std::uint32_t context = 0);

  // One-sided read, modeled as the reverse direction with its own timeline.
  OpId post_read(QpId qp, std::size_t remote_offset, std::size_t len);

  // Two-sided pair. A send with no posted receive is refused.
  void post_recv(QpId qp, std::size_t capacity);
  OpId post_send(QpId qp, std::span<const std::byte> payload);

  // 8-byte CAS / FAA executed at the simulated remote NIC against placed
  // content.
  OpId post_atomic(QpId qp, Verb kind, std::size_t remote_offset,
                   const AtomicOperands& operands);

  // Signal: completes like a write of nothing; under on_signal visibility it
  // promotes all prior writes in `context`.
  OpId post_signal(QpId qp, std::uint32_t context = 0);

  // Drains completion records posted at or before the current tick.
  std::vector<CompletionRecord> poll_cq(QpId qp);

  struct AtomicResult {
    std::uint64_t prior = 0;
    bool matched = false;
  };
  const AtomicResult* atomic_result(OpId op) const;
  const std::vector<std::byte>* read_result(OpId op) const;
  // Messages consumed by posted receives, in delivery order.
  const std::deque<std::vector<std::byte>>& received(QpId qp) const;

  const WorkRequest& request(OpId op) const;
  std::vector<OpId> op_ids() const;
  const ChunkBitmap* bitmap(OpId op) const;
  PartialCompletion partial_report(OpId op) const;

  static std::uint32_t chunk_count_for(std::size_t payload_len,
                                       std::uint32_t mtu_bytes);
  std::uint32_t chunk_count(OpId op) const;
  std::uint64_t chunks_retransmitted(OpId op) const;
  std::uint64_t total_chunks_retransmitted() const { return retransmitted_; }
  std::uint32_t passes(OpId op) const;
  bool completed(OpId op) const;
  CompletionStatus status(OpId op) const;

  // Runs after an op's data is fully visible (at its t5 tick). The scenario
  // layer hangs application integration off this.
  void set_integration_hook(
      std::function<void(Simulator&, OpId, Tick)> hook) {
    integration_hook_ = std::move(hook);
  }

  Simulator& sim() { return sim_; }
  RemoteMemory& memory() { return mem_; }
  const FaultPlan& plan() const { return plan_; }
  const LatencyConfig& latency() const { return lat_; }

 private:
  struct OpState {
    WorkRequest req;
    QpId qp = 0;
    std::uint32_t context = 0;
    bool is_signal = false;
    std::uint32_t chunk_count = 0;
    ChunkBitmap bitmap;
    std::vector<std::uint32_t> lost_this_pass;
    std::vector<std::uint32_t> sending_now;  // chunk set of the active pass
    std::uint32_t pass = 0;
    std::uint64_t retransmitted = 0;
    std::uint64_t submit_seq = 0;
    bool completed = false;
    bool completion_ready = false;
    Tick ready_at = 0;
    CompletionStatus status = CompletionStatus::Success;
    AtomicResult atomic;
    bool has_atomic = false;
    std::vector<std::byte> read_data;
    bool has_read = false;
    bool visibility_pending = false;  // awaiting a signal promotion
  };

  struct QpState {
    QueuePair qp;
    std::deque<CompletionRecord> cq;
    std::vector<OpId> submit_order;
    std::size_t next_to_post = 0;
    std::deque<std::size_t> recv_capacities;
    std::deque<std::vector<std::byte>> received;
  };

  OpState& op(OpId id);
  const OpState& op(OpId id) const;
  QpState& qps(QpId id);

  OpId new_op(QpId qp, Verb verb, std::vector<std::byte> payload,
              std::size_t remote_offset,
              std::optional<AtomicOperands> operands, std::uint32_t context);
  void start_pipeline(OpId id);
  void launch_pass(OpId id, Tick start);
  void pass_finished(OpId id);
  void deliver_chunk(OpId id, std::uint32_t chunk);
  void schedule_completion(OpId id, CompletionStatus status, Tick earliest);
  void flush_cq(QpId qp_id, Tick at);
  void after_completion(OpId id, Tick at);
  void schedule_visibility(OpId id, Tick t4);
  void promote_op(OpId id, Tick at);
  std::vector<std::byte> chunk_bytes(const OpState& st,
                                     std::uint32_t chunk) const;
  Tick jitter_for(OpId id) const;

  Simulator& sim_;
  RemoteMemory& mem_;
  FaultPlan plan_;
  LatencyConfig lat_;
  VisibilityPolicy vis_;
  std::map<QpId, QpState> qps_;
  std::map<OpId, OpState> ops_;
  std::map<std::uint32_t, std::vector<OpId>> signal_pending_;
  std::function<void(Simulator&, OpId, Tick)> integration_hook_;
  QpId next_qp_ = 1;
  OpId next_op_ = 1;
  std::uint64_t retransmitted_ = 0;
};

}  // namespace semgap
