#include "semgap/verbs.hpp"

#include <algorithm>
#include <numeric>

namespace semgap {

const char* transport_mode_name(TransportMode m) {
  switch (m) {
    case TransportMode::ReliableConnected: return "rc";
    case TransportMode::UnreliableConnected: return "uc";
    case TransportMode::Connectionless: return "connectionless";
  }
  return "unknown";
}

AtomicOperands cas_operands(std::uint64_t expect, std::uint64_t swap) {
  AtomicOperands ops;
  ops.expect.resize(8);
  ops.swap.resize(8);
  store_u64(std::span<std::byte>(ops.expect), 0, expect);
  store_u64(std::span<std::byte>(ops.swap), 0, swap);
  return ops;
}

AtomicOperands faa_operands(std::uint64_t addend) {
  AtomicOperands ops;
  ops.addend.resize(8);
  store_u64(std::span<std::byte>(ops.addend), 0, addend);
  return ops;
}

VerbsEngine::VerbsEngine(Simulator& sim, RemoteMemory& mem, FaultPlan plan,
                         LatencyConfig lat, VisibilityPolicy vis)
    : sim_(sim), mem_(mem), plan_(std::move(plan)), lat_(lat), vis_(vis) {}

QpId VerbsEngine::create_qp(TransportMode mode, std::uint32_t mtu_bytes,
                            int priority_class, bool sdr_partial) {
  if (mtu_bytes == 0) throw SimError("mtu_bytes must be positive");
  QpId id = next_qp_++;
  QpState qs;
  qs.qp = QueuePair{id, mode, mtu_bytes, priority_class, sdr_partial};
  qps_.emplace(id, std::move(qs));
  return id;
}

const QueuePair& VerbsEngine::qp(QpId id) const {
  auto it = qps_.find(id);
  if (it == qps_.end()) throw SimError("unknown QP " + std::to_string(id));
  return it->second.qp;
}

VerbsEngine::QpState& VerbsEngine::qps(QpId id) {
  auto it = qps_.find(id);
  if (it == qps_.end()) throw SimError("unknown QP " + std::to_string(id));
  return it->second;
}

VerbsEngine::OpState& VerbsEngine::op(OpId id) {
  auto it = ops_.find(id);
  if (it == ops_.end()) throw SimError("unknown op " + std::to_string(id));
  return it->second;
}

const VerbsEngine::OpState& VerbsEngine::op(OpId id) const {
  auto it = ops_.find(id);
  if (it == ops_.end()) throw SimError("unknown op " + std::to_string(id));
  return it->second;
}

std::uint32_t VerbsEngine::chunk_count_for(std::size_t payload_len,
                                           std::uint32_t mtu_bytes) {
  if (mtu_bytes == 0) throw SimError("mtu_bytes must be positive");
  return static_cast<std::uint32_t>((payload_len + mtu_bytes - 1) / mtu_bytes);
}

OpId VerbsEngine::new_op(QpId qp_id, Verb verb, std::vector<std::byte> payload,
                         std::size_t remote_offset,
                         std::optional<AtomicOperands> operands,
                         std::uint32_t context) {
  QpState& qs = qps(qp_id);
  OpId id = next_op_++;
  OpState st;
  st.req.op_id = id;
  st.req.verb = verb;
  st.req.payload = std::move(payload);
  st.req.remote_offset = remote_offset;
  st.req.atomic_operands = std::move(operands);
  st.qp = qp_id;
  st.context = context;
  st.submit_seq = qs.submit_order.size();
  qs.submit_order.push_back(id);
  ops_.emplace(id, std::move(st));
  return id;
}

OpId VerbsEngine::post_write(QpId qp_id, std::span<const std::byte> payload,
                             std::size_t remote_offset, std::uint32_t context) {
  if (payload.empty()) throw SimError("post_write: empty payload");
  if (!mem_.region_registered(remote_offset, payload.size())) {
    throw UnregisteredRegionError(
        "destination [" + std::to_string(remote_offset) + ", " +
        std::to_string(remote_offset + payload.size()) + ") not registered");
  }
  OpId id = new_op(qp_id, Verb::Write,
                   std::vector<std::byte>(payload.begin(), payload.end()),
                   remote_offset, std::nullopt, context);
  OpState& st = op(id);
  st.chunk_count = chunk_count_for(st.req.payload.size(),
                                   qp(qp_id).mtu_bytes);
  st.bitmap = ChunkBitmap(st.chunk_count);
  start_pipeline(id);
  return id;
}

OpId VerbsEngine::post_read(QpId qp_id, std::size_t remote_offset,
                            std::size_t len) {
  if (len == 0) throw SimError("post_read: empty length");
  OpId id = new_op(qp_id, Verb::Read, {}, remote_offset, std::nullopt, 0);
  op(id).chunk_count = chunk_count_for(len, qp(qp_id).mtu_bytes);
  op(id).read_data.resize(len);
  start_pipeline(id);
  return id;
}

void VerbsEngine::post_recv(QpId qp_id, std::size_t capacity) {
  qps(qp_id).recv_capacities.push_back(capacity);
}

OpId VerbsEngine::post_send(QpId qp_id, std::span<const std::byte> payload) {
  if (payload.empty()) throw SimError("post_send: empty payload");
  QpState& qs = qps(qp_id);
  if (qs.recv_capacities.empty()) {
    throw ReceiverNotReadyError("post_send: no receive buffer posted");
  }
  if (qs.recv_capacities.front() < payload.size()) {
    throw SimError("post_send: payload exceeds posted receive capacity");
  }
  qs.recv_capacities.pop_front();
  OpId id = new_op(qp_id, Verb::Send,
                   std::vector<std::byte>(payload.begin(), payload.end()), 0,
                   std::nullopt, 0);
  op(id).chunk_count = 1;
  start_pipeline(id);
  return id;
}

OpId VerbsEngine::post_atomic(QpId qp_id, Verb kind, std::size_t remote_offset,
                              const AtomicOperands& operands) {
  if (kind != Verb::AtomicCas && kind != Verb::AtomicFaa) {
    throw SimError("post_atomic: verb is not atomic");
  }
  if (kind == Verb::AtomicCas &&
      (operands.expect.size() != 8 || operands.swap.size() != 8)) {
    throw NotEightBytesError("atomic CAS operands must be exactly 8 bytes");
  }
  if (kind == Verb::AtomicFaa && operands.addend.size() != 8) {
    throw NotEightBytesError("atomic FAA addend must be exactly 8 bytes");
  }
  if (remote_offset % 8 != 0) {
    throw MisalignedAtomicError("atomic offset " +
                                std::to_string(remote_offset) +
                                " is not 8-byte aligned");
  }
  OpId id = new_op(qp_id, kind, {}, remote_offset, operands, 0);
  op(id).chunk_count = 1;
  start_pipeline(id);
  return id;
}

OpId VerbsEngine::post_signal(QpId qp_id, std::uint32_t context) {
  OpId id = new_op(qp_id, Verb::Write, {}, 0, std::nullopt, context);
  OpState& st = op(id);
  st.is_signal = true;
  st.chunk_count = 1;
  st.bitmap = ChunkBitmap(1);
  start_pipeline(id);
  return id;
}

void VerbsEngine::start_pipeline(OpId id) {
  OpState& st = op(id);
  const Tick t0 = sim_.now();
  const Tick t1 = t0 + lat_.placement;
  const Tick t2 = t1 + lat_.transmission;
  sim_.schedule_stage(t0, id, Stage::Submission);
  sim_.schedule_stage(t1, id, Stage::Placement);

  switch (st.req.verb) {
    case Verb::Write: {
      sim_.schedule_stage(t2, id, Stage::Transmission, "",
                          [this, id](Simulator& s) {
                            OpState& o = op(id);
                            o.sending_now.resize(o.chunk_count);
                            std::iota(o.sending_now.begin(),
                                      o.sending_now.end(), 0u);
                            launch_pass(id, s.now());
                          });
      break;
    }
    case Verb::Read: {
      sim_.schedule_stage(t2, id, Stage::Transmission);
      sim_.schedule(t2 + lat_.wire, EventKind::Note, id, "read_exec",
                    [this, id](Simulator& s) {
                      OpState& o = op(id);
                      o.read_data = mem_.read_placed(o.req.remote_offset,
                                                     o.read_data.size());
                      o.has_read = true;
                      s.schedule_stage(s.now(), id, Stage::RemotePlacement);
                      schedule_completion(id, CompletionStatus::Success,
                                          s.now());
                    });
      break;
    }
    case Verb::Send: {
      sim_.schedule_stage(t2, id, Stage::Transmission);
      sim_.schedule(t2 + lat_.wire, EventKind::Note, id, "send_deliver",
                    [this, id](Simulator& s) {
                      OpState& o = op(id);
                      qps(o.qp).received.push_back(o.req.payload);
                      s.schedule_stage(s.now(), id, Stage::RemotePlacement);
                      schedule_completion(id, CompletionStatus::Success,
                                          s.now());
                    });
      break;
    }
    case Verb::AtomicCas:
    case Verb::AtomicFaa: {
      sim_.schedule_stage(t2, id, Stage::Transmission);
      const char* tag = st.req.verb == Verb::AtomicCas ? "kind=cas"
                                                       : "kind=faa";
      sim_.schedule(t2 + lat_.wire, EventKind::AtomicExec, id, tag,
                    [this, id](Simulator& s) {
                      OpState& o = op(id);
                      const auto& operands = *o.req.atomic_operands;
                      const std::size_t off = o.req.remote_offset;
                      const std::uint64_t prior = mem_.read_placed_u64(off);
                      if (o.req.verb == Verb::AtomicCas) {
                        const std::uint64_t expect =
                            load_u64(operands.expect, 0);
                        o.atomic.matched = prior == expect;
                        if (o.atomic.matched) {
                          mem_.place_u64(off, load_u64(operands.swap, 0));
                        }
                      } else {
                        const std::uint64_t addend =
                            load_u64(operands.addend, 0);
                        mem_.place_u64(off, prior + addend);
                        o.atomic.matched = true;
                      }
                      o.atomic.prior = prior;
                      o.has_atomic = true;
                      // NIC atomics are coherent: the word is promoted at
                      // execution.
                      mem_.promote_range(off, 8, s.now());
                      s.schedule_stage(s.now(), id, Stage::RemotePlacement);
                      schedule_completion(id, CompletionStatus::Success,
                                          s.now());
                    });
      break;
    }
    case Verb::Recv:
      throw SimError("Recv is posted via post_recv");
  }
}

std::vector<std::byte> VerbsEngine::chunk_bytes(const OpState& st,
                                                std::uint32_t chunk) const {
  const std::uint32_t mtu = qps_.at(st.qp).qp.mtu_bytes;
  const std::size_t begin = static_cast<std::size_t>(chunk) * mtu;
  const std::size_t end = std::min(st.req.payload.size(), begin + mtu);
  std::vector<std::byte> bytes(st.req.payload.begin() + begin,
                               st.req.payload.begin() + end);
  for (const SdcFlip& flip : plan_.sdc_flips) {
    if (flip.op != st.req.op_id || flip.chunk != chunk) continue;
    corrupt(std::span<std::byte>(bytes), flip.bit);
  }
  return bytes;
}

void VerbsEngine::deliver_chunk(OpId id, std::uint32_t chunk) {
  OpState& st = op(id);
  if (!st.is_signal) {
    const std::uint32_t mtu = qps_.at(st.qp).qp.mtu_bytes;
    auto bytes = chunk_bytes(st, chunk);
    mem_.place(st.req.remote_offset + static_cast<std::size_t>(chunk) * mtu,
               bytes);
  }
  st.bitmap.mark_received(chunk);
}

void VerbsEngine::launch_pass(OpId id, Tick start) {
  OpState& st = op(id);
  const std::vector<std::uint32_t> set = st.sending_now;
  const std::uint32_t pass = st.pass;
  Tick last = start + lat_.wire;
  for (std::size_t k = 0; k < set.size(); ++k) {
    const Tick due = start + lat_.wire + k * lat_.per_chunk;
    last = due;
    const std::uint32_t chunk = set[k];
    const bool lost = st.is_signal ? false : decide_loss(plan_, id, chunk, pass);
    if (lost) {
      sim_.schedule(due, EventKind::ChunkLost, id,
                    "chunk=" + std::to_string(chunk),
                    [this, id, chunk](Simulator&) {
                      op(id).lost_this_pass.push_back(chunk);
                    });
    } else {
      sim_.schedule(due, EventKind::ChunkDeliver, id,
                    "chunk=" + std::to_string(chunk),
                    [this, id, chunk](Simulator&) {
                      deliver_chunk(id, chunk);
                    });
    }
  }
  sim_.schedule(last, EventKind::LossDetect, id,
                "pass=" + std::to_string(pass),
                [this, id](Simulator&) { pass_finished(id); });
}

void VerbsEngine::pass_finished(OpId id) {
  OpState& st = op(id);
  const QueuePair& q = qp(st.qp);
  const Tick now = sim_.now();
  const bool unreliable =
      q.transport_mode == TransportMode::UnreliableConnected;

  if (unreliable && !q.sdr_partial) {
    // Whole-message loss: one clear bit fails the entire operation.
    if (st.bitmap.complete()) {
      sim_.schedule_stage(now, id, Stage::RemotePlacement);
      schedule_completion(id, CompletionStatus::Success, now);
    } else {
      schedule_completion(id, CompletionStatus::Failure, now);
    }
    return;
  }

  if (unreliable && q.sdr_partial) {
    if (st.bitmap.complete()) {
      sim_.schedule_stage(now, id, Stage::RemotePlacement);
      schedule_completion(id, CompletionStatus::Success, now);
      return;
    }
    // The bitmap rides the return path; its own delivery is loss-exempt.
    const std::string detail =
        "delivered=" + std::to_string(st.bitmap.delivered_count()) + "/" +
        std::to_string(st.bitmap.chunk_count()) + " rle=" + st.bitmap.rle();
    sim_.schedule(
        now + lat_.ack, EventKind::PartialReport, id, detail,
        [this, id](Simulator& s) {
          OpState& o = op(id);
          if (o.pass + 1 >= lat_.retry_rounds) {
            schedule_completion(id, CompletionStatus::Failure, s.now());
            return;
          }
          auto missing = selective_retransmit_plan(o.bitmap);
          o.pass += 1;
          o.lost_this_pass.clear();
          o.retransmitted += missing.size();
          retransmitted_ += missing.size();
          o.sending_now = std::move(missing);
          s.schedule(s.now(), EventKind::Retransmit, id,
                     "pass=" + std::to_string(o.pass) +
                         " chunks=" + std::to_string(o.sending_now.size()),
                     [this, id](Simulator& s2) {
                       launch_pass(id, s2.now());
                     });
        });
    return;
  }

  // Reliable / connectionless: any loss retransmits the entire message, and
  // completion waits for a fully clean pass.
  if (st.lost_this_pass.empty()) {
    sim_.schedule_stage(now, id, Stage::RemotePlacement);
    schedule_completion(id, CompletionStatus::Success, now);
    return;
  }
  if (st.pass + 1 >= lat_.retry_rounds) {
    schedule_completion(id, CompletionStatus::Failure, now);
    return;
  }
  sim_.schedule(now + lat_.timeout, EventKind::Retransmit, id,
                "pass=" + std::to_string(st.pass + 1) +
                    " chunks=" + std::to_string(st.chunk_count),
                [this, id](Simulator& s) {
                  OpState& o = op(id);
                  o.pass += 1;
                  o.lost_this_pass.clear();
                  o.retransmitted += o.chunk_count;
                  retransmitted_ += o.chunk_count;
                  o.sending_now.resize(o.chunk_count);
                  std::iota(o.sending_now.begin(), o.sending_now.end(), 0u);
                  launch_pass(id, s.now());
                });
}

Tick VerbsEngine::jitter_for(OpId id) const {
  if (lat_.ack_jitter == 0) return 0;
  return mix64(plan_.seed ^ 0xACC7ull, id) % (lat_.ack_jitter + 1);
}

void VerbsEngine::schedule_completion(OpId id, CompletionStatus status,
                                      Tick earliest) {
  OpState& st = op(id);
  const QueuePair& q = qp(st.qp);
  Tick due = earliest + lat_.ack + jitter_for(id);
  due = pause_deferral(plan_, q.priority_class, due);
  const char* tag = status == CompletionStatus::Success
                        ? "cqe_ready status=success"
                        : "cqe_ready status=failure";
  sim_.schedule(due, EventKind::Note, id, tag,
                [this, id, status](Simulator& s) {
                  OpState& o = op(id);
                  o.completion_ready = true;
                  o.ready_at = s.now();
                  o.status = status;
                  flush_cq(o.qp, s.now());
                });
}

void VerbsEngine::flush_cq(QpId qp_id, Tick at) {
  QpState& qs = qps(qp_id);
  auto post = [this, &qs, at](OpState& st) {
    qs.cq.push_back(CompletionRecord{st.req.op_id, st.status, at});
    st.completed = true;
    const char* tag = st.status == CompletionStatus::Success
                          ? "status=success"
                          : "status=failure";
    const OpId id = st.req.op_id;
    sim_.schedule_stage(at, id, Stage::Completion, tag,
                        [this, id](Simulator& s) {
                          after_completion(id, s.now());
                        });
  };
  if (qs.qp.transport_mode == TransportMode::Connectionless) {
    // No inter-operation ordering: ready completions post immediately.
    for (OpId id : qs.submit_order) {
      OpState& st = op(id);
      if (st.completion_ready && !st.completed) post(st);
    }
    return;
  }
  // Connected modes preserve per-QP submission order.
  while (qs.next_to_post < qs.submit_order.size()) {
    OpState& st = op(qs.submit_order[qs.next_to_post]);
    if (!st.completion_ready || st.completed) break;
    post(st);
    ++qs.next_to_post;
  }
}

void VerbsEngine::after_completion(OpId id, Tick at) {
  OpState& st = op(id);
  if (st.status != CompletionStatus::Success) return;
  switch (st.req.verb) {
    case Verb::Write:
      if (st.is_signal) {
        sim_.schedule_stage(at, id, Stage::Visibility);
        auto pending = std::move(signal_pending_[st.context]);
        signal_pending_[st.context].clear();
        for (OpId waiting : pending) {
          sim_.schedule_stage(at, waiting, Stage::Visibility,
                              "by_signal=" + std::to_string(id),
                              [this, waiting](Simulator& s) {
                                promote_op(waiting, s.now());
                                if (integration_hook_) {
                                  integration_hook_(s, waiting, s.now());
                                }
                              });
        }
      } else {
        schedule_visibility(id, at);
      }
      break;
    case Verb::AtomicCas:
    case Verb::AtomicFaa:
      // Already promoted at execution; visible no later than completion.
      sim_.schedule_stage(at, id, Stage::Visibility);
      break;
    default:
      break;
  }
}

void VerbsEngine::schedule_visibility(OpId id, Tick t4) {
  OpState& st = op(id);
  if (vis_.on_signal) {
    st.visibility_pending = true;
    signal_pending_[st.context].push_back(id);
    return;
  }
  const Tick delay = vis_.coherence_lag + sample_visibility_delay(plan_, id);
  const std::size_t offset = st.req.remote_offset;
  const std::size_t len = st.req.payload.size();
  if (!vis_.per_line) {
    sim_.schedule_stage(t4 + delay, id, Stage::Visibility, "",
                        [this, id](Simulator& s) {
                          promote_op(id, s.now());
                          if (integration_hook_) {
                            integration_hook_(s, id, s.now());
                          }
                        });
    return;
  }
  const std::size_t first = offset / mem_.line_size();
  const std::size_t last = (offset + len - 1) / mem_.line_size();
  for (std::size_t i = first; i < last; ++i) {
    sim_.schedule(t4 + delay + (i - first) * vis_.per_line_spread,
                  EventKind::Note, id, "promote_line=" + std::to_string(i),
                  [this, i](Simulator& s) { mem_.promote_line(i, s.now()); });
  }
  sim_.schedule_stage(t4 + delay + (last - first) * vis_.per_line_spread, id,
                      Stage::Visibility,
                      "promote_line=" + std::to_string(last),
                      [this, id, last](Simulator& s) {
                        mem_.promote_line(last, s.now());
                        if (integration_hook_) {
                          integration_hook_(s, id, s.now());
                        }
                      });
}

void VerbsEngine::promote_op(OpId id, Tick at) {
  OpState& st = op(id);
  mem_.promote_range(st.req.remote_offset, st.req.payload.size(), at);
}

std::vector<CompletionRecord> VerbsEngine::poll_cq(QpId qp_id) {
  QpState& qs = qps(qp_id);
  std::vector<CompletionRecord> out;
  while (!qs.cq.empty() && qs.cq.front().at <= sim_.now()) {
    out.push_back(qs.cq.front());
    qs.cq.pop_front();
  }
  return out;
}

const VerbsEngine::AtomicResult* VerbsEngine::atomic_result(OpId id) const {
  const OpState& st = op(id);
  return st.has_atomic ? &st.atomic : nullptr;
}

const std::vector<std::byte>* VerbsEngine::read_result(OpId id) const {
  const OpState& st = op(id);
  return st.has_read ? &st.read_data : nullptr;
}

const std::deque<std::vector<std::byte>>& VerbsEngine::received(
    QpId qp_id) const {
  auto it = qps_.find(qp_id);
  if (it == qps_.end()) throw SimError("unknown QP " + std::to_string(qp_id));
  return it->second.received;
}

const WorkRequest& VerbsEngine::request(OpId id) const { return op(id).req; }

std::vector<OpId> VerbsEngine::op_ids() const {
  std::vector<OpId> ids;
  ids.reserve(ops_.size());
  for (const auto& [id, st] : ops_) ids.push_back(id);
  return ids;
}

const ChunkBitmap* VerbsEngine::bitmap(OpId id) const {
  const OpState& st = op(id);
  return st.bitmap.chunk_count() > 0 ? &st.bitmap : nullptr;
}

PartialCompletion VerbsEngine::partial_report(OpId id) const {
  return make_partial_completion(id, op(id).bitmap);
}

std::uint32_t VerbsEngine::chunk_count(OpId id) const {
  return op(id).chunk_count;
}

std::uint64_t VerbsEngine::chunks_retransmitted(OpId id) const {
  return op(id).retransmitted;
}

std::uint32_t VerbsEngine::passes(OpId id) const { return op(id).pass; }

bool VerbsEngine::completed(OpId id) const { return op(id).completed; }

CompletionStatus VerbsEngine::status(OpId id) const { return op(id).status; }

}  // namespace semgap
