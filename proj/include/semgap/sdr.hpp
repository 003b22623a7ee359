#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semgap/sim.hpp"

namespace semgap {

// Per-chunk receipt record: bit i is set once chunk i has been placed at the
// receiver. Setting a bit twice is a no-op.
class ChunkBitmap {
 public:
  ChunkBitmap() = default;
  explicit ChunkBitmap(std::uint32_t chunk_count)
      : bits_(chunk_count, false) {}

  std::uint32_t chunk_count() const {
    return static_cast<std::uint32_t>(bits_.size());
  }
  std::uint32_t delivered_count() const { return delivered_; }
  bool complete() const { return delivered_ == bits_.size(); }

  bool test(std::uint32_t chunk_index) const;
  void mark_received(std::uint32_t chunk_index);

  std::vector<std::uint32_t> missing() const;

  // Run-length encoding, e.g. "511x1,1x0,512x1"; compact enough for the
  // trace detail field at large chunk counts.
  std::string rle() const;

 private:
  std::vector<bool> bits_;
  std::uint32_t delivered_ = 0;
};

// What a 1-bit completion cannot express: the actual transfer state.
struct PartialCompletion {
  OpId op = 0;
  ChunkBitmap bitmap;
  std::uint32_t delivered_count = 0;
  double delivered_fraction = 0.0;
};

PartialCompletion make_partial_completion(OpId op, const ChunkBitmap& bitmap);

// The chunks to resend: exactly the missing ones. Throws NothingMissing when
// the bitmap is already complete.
std::vector<std::uint32_t> selective_retransmit_plan(const ChunkBitmap& bitmap);

}  // namespace semgap
