#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semgap/sim.hpp"

namespace semgap {

// splitmix64 finalizer; the building block for every seeded decision.
std::uint64_t mix64(std::uint64_t x);
// Folds additional identifiers into a seed stream.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c);
std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                    std::uint64_t d);
// Uniform double in [0, 1) from a hashed value.
double unit_double(std::uint64_t h);

// Visibility lag applied between completion and remote visibility; constant
// when min == max, otherwise uniform per operation.
struct VisibilityDelaySpec {
  Tick min = 0;
  Tick max = 0;
};

struct PauseWindow {
  int priority_class = 0;
  Tick start = 0;
  Tick duration = 0;
};

// One deliberate single-bit corruption, applied while the chunk is placed.
struct SdcFlip {
  OpId op = 0;
  std::uint32_t chunk = 0;
  std::uint64_t bit = 0;  // relative to the chunk payload
};

// Seeded, reproducible fault decisions. Every decision is a pure function of
// (seed, identifiers); runs with equal plans make equal decisions.
struct FaultPlan {
  std::uint64_t seed = 1;
  double chunk_loss_rate = 0.0;
  std::vector<std::uint32_t> lose_chunks;  // explicit first-pass losses
  std::vector<SdcFlip> sdc_flips;
  VisibilityDelaySpec visibility_delay;
  std::vector<PauseWindow> pauses;
};

// Whether chunk `chunk_index` of `op` is lost on retransmission pass `pass`.
// Explicit lose_chunks entries force losses on pass 0 only.
bool decide_loss(const FaultPlan& plan, OpId op, std::uint32_t chunk_index,
                 std::uint32_t pass = 0);

// Lost-chunk indices for one pass over `chunk_count` chunks, produced by
// geometric skips over the same Bernoulli process decide_loss draws from.
// Cost is proportional to the number of losses, not chunk_count, which is
// what makes 10^5-message experiments at N=262144 feasible.
std::vector<std::uint32_t> sample_lost_chunks(std::uint64_t seed, OpId op,
                                              std::uint32_t chunk_count,
                                              double loss_rate,
                                              std::uint32_t pass = 0);

Tick sample_visibility_delay(const FaultPlan& plan, OpId op);

// Earliest tick at or after `due` at which a completion for `priority_class`
// may fire, given the plan's pause windows.
Tick pause_deferral(const FaultPlan& plan, int priority_class, Tick due);

// Inverts one bit in place. bit_index must address a payload bit.
void corrupt(std::span<std::byte> payload, std::uint64_t bit_index);

enum class Actor : std::uint8_t { Writer, Reader };

struct InterleavingStep {
  Actor actor;
  std::uint32_t line_index;
};

// One total order of writer line-writes against reader line-reads. The
// writer writes each line exactly once, ascending; each reader pass reads
// lines in ascending order.
struct InterleavingSchedule {
  std::vector<InterleavingStep> steps;
};

// C(n + p*n, n): the number of ways to interleave the two ordered sequences.
std::uint64_t interleaving_count(unsigned writer_lines, unsigned reader_passes);

// Every valid schedule for `writer_lines` lines and `reader_passes` full
// reader passes. Desk-scale only: writer_lines <= 6, reader_passes <= 2.
std::vector<InterleavingSchedule> enumerate_interleavings(
    unsigned writer_lines, unsigned reader_passes);

}  // namespace semgap
