#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semgap/sim.hpp"

namespace semgap {

// The 304-byte hash-table entry used throughout the torn-state experiments:
// an 8-byte version, a 32-byte key, a 256-byte value, and an 8-byte status
// word drawn from {1=valid, 2=deleted, 3=locked}. Every 64-byte line of the
// object starts with an 8-byte copy of the version, so a mixed-version
// assembly is recognizable from the bytes alone.
struct StampedObjectSpec {
  std::size_t size = 304;
  std::size_t line_size = 64;
  std::uint64_t status = 1;
};

std::vector<std::byte> make_stamped_object(std::uint64_t version,
                                           const StampedObjectSpec& spec = {});

// The version stamps at each line start (as many as fit).
std::vector<std::uint64_t> read_stamps(std::span<const std::byte> bytes,
                                       std::size_t line_size = 64);

bool stamps_mixed(std::span<const std::byte> bytes, std::size_t line_size = 64);

// A seeded bit position inside the entry's value region, avoiding the line
// stamps (and the status word): flipping it corrupts payload data without
// touching any invariant-relevant field.
std::uint64_t pick_value_region_bit(std::uint64_t seed, std::uint64_t trial);

// Offsets of the entry fields.
inline constexpr std::size_t kEntryVersionOffset = 0;
inline constexpr std::size_t kEntryKeyOffset = 8;
inline constexpr std::size_t kEntryKeyBytes = 32;
inline constexpr std::size_t kEntryValueOffset = 40;
inline constexpr std::size_t kEntryValueBytes = 256;
inline constexpr std::size_t kEntryStatusOffset = 296;
inline constexpr std::size_t kEntryBytes = 304;

}  // namespace semgap
