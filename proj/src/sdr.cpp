#include "semgap/sdr.hpp"

namespace semgap {

bool ChunkBitmap::test(std::uint32_t chunk_index) const {
  if (chunk_index >= bits_.size()) {
    throw OutOfRangeError("chunk index " + std::to_string(chunk_index) +
                          " out of range (" + std::to_string(bits_.size()) +
                          " chunks)");
  }
  return bits_[chunk_index];
}

void ChunkBitmap::mark_received(std::uint32_t chunk_index) {
  if (chunk_index >= bits_.size()) {
    throw OutOfRangeError("chunk index " + std::to_string(chunk_index) +
                          " out of range (" + std::to_string(bits_.size()) +
                          " chunks)");
  }
  if (!bits_[chunk_index]) {
    bits_[chunk_index] = true;
    ++delivered_;
  }
}

std::vector<std::uint32_t> ChunkBitmap::missing() const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < bits_.size(); ++i) {
    if (!bits_[i]) out.push_back(i);
  }
  return out;
}

std::string ChunkBitmap::rle() const {
  if (bits_.empty()) return "0x0";
  std::string out;
  std::uint32_t run = 1;
  bool value = bits_[0];
  auto flush = [&] {
    out += std::to_string(run);
    out += 'x';
    out += value ? '1' : '0';
  };
  for (std::size_t i = 1; i < bits_.size(); ++i) {
    if (bits_[i] == value) {
      ++run;
    } else {
      flush();
      out += ',';
      value = bits_[i];
      run = 1;
    }
  }
  flush();
  return out;
}

PartialCompletion make_partial_completion(OpId op, const ChunkBitmap& bitmap) {
  PartialCompletion pc;
  pc.op = op;
  pc.bitmap = bitmap;
  pc.delivered_count = bitmap.delivered_count();
  pc.delivered_fraction =
      bitmap.chunk_count() == 0
          ? 0.0
          : static_cast<double>(pc.delivered_count) / bitmap.chunk_count();
  return pc;
}

std::vector<std::uint32_t> selective_retransmit_plan(
    const ChunkBitmap& bitmap) {
  auto missing = bitmap.missing();
  if (missing.empty()) {
    throw NothingMissingError("bitmap complete; nothing to retransmit");
  }
  return missing;
}

}  // namespace semgap
