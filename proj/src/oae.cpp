#include "semgap/oae.hpp"

#include "semgap/faults.hpp"

namespace semgap {

const char* link_phase_name(LinkPhase p) {
  switch (p) {
    case LinkPhase::Idle: return "idle";
    case LinkPhase::Tentative: return "tentative";
    case LinkPhase::Reflecting: return "reflecting";
    case LinkPhase::Committed: return "committed";
    case LinkPhase::Rejected: return "rejected";
  }
  return "unknown";
}

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::SdcDetected: return "sdc_detected";
    case RejectReason::InvariantViolation: return "invariant_violation";
    case RejectReason::SchemaMismatch: return "schema_mismatch";
    case RejectReason::ReflectTimeout: return "reflect_timeout";
  }
  return "unknown";
}

bool transition_allowed(LinkPhase from, LinkPhase to) {
  switch (from) {
    case LinkPhase::Idle: return to == LinkPhase::Tentative;
    case LinkPhase::Tentative: return to == LinkPhase::Reflecting;
    case LinkPhase::Reflecting:
      return to == LinkPhase::Committed || to == LinkPhase::Rejected;
    case LinkPhase::Committed:
    case LinkPhase::Rejected:
      return false;  // terminal
  }
  return false;
}

bool LinkMachine::try_transition(LinkPhase to) {
  if (!transition_allowed(state_, to)) return false;
  state_ = to;
  return true;
}

void LinkMachine::require_transition(LinkPhase to) {
  if (!try_transition(to)) {
    throw WrongStateError(std::string("illegal transition ") +
                          link_phase_name(state_) + " -> " +
                          link_phase_name(to));
  }
}

std::vector<bool> commit_guard(LinkMachine& machine,
                               std::span<const LinkPhase> attempts) {
  std::vector<bool> accepted;
  accepted.reserve(attempts.size());
  for (LinkPhase target : attempts) {
    accepted.push_back(machine.try_transition(target));
  }
  return accepted;
}

InvariantSpec builtin_invariant(const std::string& id) {
  InvariantSpec spec;
  spec.id = id;
  if (id == "all-versions-equal") {
    // One 8-byte stamp at the start of each line-sized slice; torn
    // assemblies mix stamps from different committed versions.
    spec.predicate = [](std::span<const std::byte> bytes,
                        const InvariantContext& ctx) {
      if (bytes.size() < 8) return false;
      const std::uint64_t first = load_u64(bytes, 0);
      for (std::size_t off = ctx.line_size; off + 8 <= bytes.size();
           off += ctx.line_size) {
        if (load_u64(bytes, off) != first) return false;
      }
      return true;
    };
  } else if (id == "status-in-set") {
    spec.predicate = [](std::span<const std::byte> bytes,
                        const InvariantContext& ctx) {
      if (bytes.size() < 8) return false;
      const std::uint64_t status = load_u64(bytes, bytes.size() - 8);
      for (std::uint64_t allowed : ctx.status_set) {
        if (status == allowed) return true;
      }
      return false;
    };
  } else if (id == "monotonic-version") {
    spec.predicate = [](std::span<const std::byte> bytes,
                        const InvariantContext& ctx) {
      if (bytes.size() < 8) return false;
      return load_u64(bytes, 0) >= ctx.min_version;
    };
  } else {
    throw SimError("unknown invariant_id: " + id);
  }
  return spec;
}

DigestResolution resolve_digest(const SemanticDigest& digest,
                                std::uint32_t expected_checksum,
                                std::uint32_t expected_schema) {
  DigestResolution res;
  // The receiver's own semantic judgment outranks the byte comparison: a
  // false verdict reports InvariantViolation even when the checksum also
  // disagrees (torn assemblies trip both).
  if (!digest.invariant_verdict) {
    res.phase = LinkPhase::Rejected;
    res.reason = RejectReason::InvariantViolation;
  } else if (digest.payload_checksum != expected_checksum) {
    res.phase = LinkPhase::Rejected;
    res.reason = RejectReason::SdcDetected;
  } else if (digest.schema_version != expected_schema) {
    res.phase = LinkPhase::Rejected;
    res.reason = RejectReason::SchemaMismatch;
  } else {
    res.phase = LinkPhase::Committed;
  }
  return res;
}

AssemblyOutcome resolve_assembly(std::span<const std::byte> assembled,
                                 std::uint32_t expected_checksum,
                                 const InvariantSpec& spec,
                                 const InvariantContext& ctx,
                                 std::uint32_t receiver_schema,
                                 std::uint32_t expected_schema) {
  AssemblyOutcome out;
  out.digest.payload_checksum = crc32(assembled);
  out.digest.invariant_verdict = spec.predicate(assembled, ctx);
  out.digest.invariant_id = spec.id;
  out.digest.schema_version = receiver_schema;
  LinkMachine machine;
  machine.require_transition(LinkPhase::Tentative);
  machine.require_transition(LinkPhase::Reflecting);
  const DigestResolution res =
      resolve_digest(out.digest, expected_checksum, expected_schema);
  machine.require_transition(res.phase);
  out.phase = machine.state();
  out.reason = res.reason;
  return out;
}

OaeLink::OaeLink(VerbsEngine& engine, OaeConfig cfg)
    : engine_(engine),
      cfg_(std::move(cfg)),
      invariant_(builtin_invariant(cfg_.invariant_id)) {}

void OaeLink::move_to(LinkPhase to, Tick at) {
  machine_.require_transition(to);
  transitions_.emplace_back(at, to);
}

OpId OaeLink::initiate(QpId qp, std::span<const std::byte> payload,
                       std::size_t remote_offset) {
  if (machine_.state() != LinkPhase::Idle) {
    throw LinkBusyError("link is " +
                        std::string(link_phase_name(machine_.state())));
  }
  expected_checksum_ = crc32(payload);
  remote_offset_ = remote_offset;
  payload_len_ = payload.size();
  op_ = engine_.post_write(qp, payload, remote_offset);
  move_to(LinkPhase::Tentative, engine_.sim().now());
  return op_;
}

SemanticDigest OaeLink::receiver_integrate() {
  const StageTimeline* tl = engine_.sim().find_timeline(op_);
  if (!tl || !tl->has(Stage::Visibility)) {
    throw NotYetVisibleError("transfer not yet visible at receiver");
  }
  if (machine_.state() != LinkPhase::Tentative) {
    throw WrongStateError("receiver_integrate off " +
                          std::string(link_phase_name(machine_.state())));
  }
  assembled_ = engine_.memory().read_visible(remote_offset_, payload_len_);
  SemanticDigest digest;
  digest.payload_checksum = crc32(assembled_);
  digest.invariant_verdict =
      invariant_.predicate(assembled_, cfg_.invariant_context);
  digest.invariant_id = invariant_.id;
  digest.schema_version = cfg_.receiver_schema;
  receiver_integrated_at_ = engine_.sim().now();
  move_to(LinkPhase::Reflecting, engine_.sim().now());
  return digest;
}

OaeLink::Resolution OaeLink::sender_resolve(const SemanticDigest& digest) {
  if (machine_.state() != LinkPhase::Reflecting) {
    throw WrongStateError("sender_resolve off " +
                          std::string(link_phase_name(machine_.state())));
  }
  const Tick now = engine_.sim().now();
  const DigestResolution resolved =
      resolve_digest(digest, expected_checksum_, cfg_.expected_schema);
  Resolution res;
  res.phase = resolved.phase;
  res.reason = resolved.reason;
  move_to(res.phase, now);
  reason_ = res.reason;
  if (res.phase == LinkPhase::Committed) committed_at_ = now;
  return res;
}

void OaeLink::on_transfer_visible(Simulator& sim) {
  SemanticDigest digest = receiver_integrate();
  const Tick now = sim.now();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "checksum=%08x verdict=%d schema=%u",
                digest.payload_checksum, digest.invariant_verdict ? 1 : 0,
                digest.schema_version);
  sim.schedule(now, EventKind::DigestSend, op_, buf);

  bool lost = false;
  if (!cfg_.reflect_loss_exempt) {
    const FaultPlan& plan = engine_.plan();
    lost = unit_double(mix64(plan.seed ^ 0x0AE1ull, op_)) <
           plan.chunk_loss_rate;
  }
  if (lost) {
    sim.schedule(now + cfg_.reflect_timeout, EventKind::ReflectTimeout, op_,
                 "", [this](Simulator& s) {
                   if (machine_.state() != LinkPhase::Reflecting) return;
                   move_to(LinkPhase::Rejected, s.now());
                   reason_ = RejectReason::ReflectTimeout;
                 });
    return;
  }
  sim.schedule(now + cfg_.reflect_latency, EventKind::DigestRecv, op_, "",
               [this, digest](Simulator& s) {
                 Resolution res = sender_resolve(digest);
                 if (res.phase == LinkPhase::Committed) {
                   s.schedule_stage(s.now(), op_, Stage::SemanticAgreement,
                                    "committed");
                 } else {
                   s.schedule(s.now(), EventKind::Note, op_,
                              std::string("rejected reason=") +
                                  reject_reason_name(*res.reason));
                 }
               });
}

const std::vector<std::byte>& OaeLink::committed_object() const {
  if (machine_.state() != LinkPhase::Committed) {
    throw WrongStateError("object is exposed only after commit");
  }
  return assembled_;
}

}  // namespace semgap
