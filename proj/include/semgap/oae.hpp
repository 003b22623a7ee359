#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semgap/checksum.hpp"
#include "semgap/sim.hpp"
#include "semgap/verbs.hpp"

namespace semgap {

enum class LinkPhase { Idle, Tentative, Reflecting, Committed, Rejected };

enum class RejectReason {
  SdcDetected,         // digest checksum disagrees with the sender's
  InvariantViolation,  // receiver-side invariant verdict is false
  SchemaMismatch,      // receiver schema differs from the expected one
  ReflectTimeout,      // digest never arrived
};

const char* link_phase_name(LinkPhase p);
const char* reject_reason_name(RejectReason r);

// Legal transitions: Idle->Tentative, Tentative->Reflecting,
// Reflecting->Committed, Reflecting->Rejected. Nothing skips Reflecting.
bool transition_allowed(LinkPhase from, LinkPhase to);

class LinkMachine {
 public:
  LinkPhase state() const { return state_; }

  // Attempts a transition; returns false (state unchanged) when illegal.
  bool try_transition(LinkPhase to);
  // Same, but throws WrongState on an illegal attempt.
  void require_transition(LinkPhase to);

 private:
  LinkPhase state_ = LinkPhase::Idle;
};

// Applies a sequence of transition attempts; element i tells whether attempt
// i was accepted. Rejected attempts leave the state unchanged.
std::vector<bool> commit_guard(LinkMachine& machine,
                               std::span<const LinkPhase> attempts);

// Parameters consulted by the built-in invariant predicates.
struct InvariantContext {
  std::size_t line_size = 64;  // version-stamp spacing (all-versions-equal)
  std::uint64_t min_version = 0;
  std::vector<std::uint64_t> status_set = {1, 2, 3};
};

// A named pure predicate over assembled object bytes.
struct InvariantSpec {
  std::string id;
  std::function<bool(std::span<const std::byte>, const InvariantContext&)>
      predicate;
};

// Built-in library: all-versions-equal, status-in-set, monotonic-version.
InvariantSpec builtin_invariant(const std::string& id);

// The structured receipt returned during reflection. Computed only from
// receiver-side visible bytes.
struct SemanticDigest {
  std::uint32_t payload_checksum = 0;
  bool invariant_verdict = false;
  std::string invariant_id;
  std::uint32_t schema_version = 0;
};

// Resolution precedence shared by every digest consumer: a false invariant
// verdict outranks a checksum mismatch, which outranks a schema mismatch.
struct DigestResolution {
  LinkPhase phase = LinkPhase::Rejected;
  std::optional<RejectReason> reason;
};
DigestResolution resolve_digest(const SemanticDigest& digest,
                                std::uint32_t expected_checksum,
                                std::uint32_t expected_schema);

// Feeds an already-assembled receiver state through the link discipline:
// Idle -> Tentative -> Reflecting -> resolution. Used where the racing
// writer is foreign to the transfer and only the assembly is on hand.
struct AssemblyOutcome {
  LinkPhase phase = LinkPhase::Rejected;
  std::optional<RejectReason> reason;
  SemanticDigest digest;
};
AssemblyOutcome resolve_assembly(std::span<const std::byte> assembled,
                                 std::uint32_t expected_checksum,
                                 const InvariantSpec& spec,
                                 const InvariantContext& ctx,
                                 std::uint32_t receiver_schema,
                                 std::uint32_t expected_schema);

struct OaeConfig {
  std::string invariant_id = "all-versions-equal";
  std::uint32_t expected_schema = 1;
  std::uint32_t receiver_schema = 1;
  bool reflect_loss_exempt = true;
  Tick reflect_timeout = 64;
  Tick reflect_latency = 1;
  InvariantContext invariant_context;
};

// One transfer over the four-state link. The data moves through the verbs
// layer; commitment additionally requires the reflecting round trip. The
// assembled object is exposed to the application only after Committed.
class OaeLink {
 public:
  OaeLink(VerbsEngine& engine, OaeConfig cfg);

  struct Resolution {
    LinkPhase phase = LinkPhase::Rejected;
    std::optional<RejectReason> reason;
  };

  // Sender: Idle -> Tentative, transfer begins. Throws LinkBusy off Idle.
  OpId initiate(QpId qp, std::span<const std::byte> payload,
                std::size_t remote_offset);

  // Receiver: requires the transfer visible (t5 set); assembles the object
  // from visible bytes, evaluates the invariant, enters Reflecting.
  SemanticDigest receiver_integrate();

  // Sender: resolves the digest. Reflecting -> Committed or Rejected.
  Resolution sender_resolve(const SemanticDigest& digest);

  // Event-driven receiver path: call from the engine's integration hook at
  // the transfer's t5. Schedules digest delivery (or its timeout).
  void on_transfer_visible(Simulator& sim);

  LinkPhase state() const { return machine_.state(); }
  std::optional<RejectReason> reject_reason() const { return reason_; }
  OpId transfer_op() const { return op_; }
  std::uint32_t expected_checksum() const { return expected_checksum_; }
  std::optional<Tick> receiver_integrated_at() const {
    return receiver_integrated_at_;
  }
  std::optional<Tick> committed_at() const { return committed_at_; }
  const std::vector<std::byte>& committed_object() const;
  const std::vector<std::pair<Tick, LinkPhase>>& transitions() const {
    return transitions_;
  }

 private:
  void move_to(LinkPhase to, Tick at);

  VerbsEngine& engine_;
  OaeConfig cfg_;
  InvariantSpec invariant_;
  LinkMachine machine_;
  OpId op_ = 0;
  std::size_t remote_offset_ = 0;
  std::size_t payload_len_ = 0;
  std::uint32_t expected_checksum_ = 0;
  std::vector<std::byte> assembled_;
  std::optional<RejectReason> reason_;
  std::optional<Tick> receiver_integrated_at_;
  std::optional<Tick> committed_at_;
  std::vector<std::pair<Tick, LinkPhase>> transitions_;
};

}  // namespace semgap
