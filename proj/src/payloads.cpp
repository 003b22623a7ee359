#include "semgap/payloads.hpp"

#include "semgap/faults.hpp"

namespace semgap {

std::vector<std::byte> make_stamped_object(std::uint64_t version,
                                           const StampedObjectSpec& spec) {
  std::vector<std::byte> bytes(spec.size);
  for (std::size_t i = 0; i < spec.size; ++i) {
    bytes[i] = std::byte{
        static_cast<unsigned char>(mix64(version, 0xB0D7ull, i))};
  }
  // Key bytes are version-independent: the same entry, updated in place.
  for (std::size_t i = kEntryKeyOffset;
       i < kEntryKeyOffset + kEntryKeyBytes && i < spec.size; ++i) {
    bytes[i] = std::byte{static_cast<unsigned char>(mix64(0x6E5ull, i))};
  }
  std::span<std::byte> view(bytes);
  for (std::size_t off = 0; off + 8 <= spec.size; off += spec.line_size) {
    store_u64(view, off, version);
  }
  if (spec.size >= 8) {
    store_u64(view, spec.size - 8, spec.status);
  }
  return bytes;
}

std::vector<std::uint64_t> read_stamps(std::span<const std::byte> bytes,
                                       std::size_t line_size) {
  std::vector<std::uint64_t> stamps;
  for (std::size_t off = 0; off + 8 <= bytes.size(); off += line_size) {
    stamps.push_back(load_u64(bytes, off));
  }
  return stamps;
}

bool stamps_mixed(std::span<const std::byte> bytes, std::size_t line_size) {
  const auto stamps = read_stamps(bytes, line_size);
  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if (stamps[i] != stamps[0]) return true;
  }
  return false;
}

std::uint64_t pick_value_region_bit(std::uint64_t seed, std::uint64_t trial) {
  static const std::vector<std::size_t> safe_bytes = [] {
    std::vector<std::size_t> bytes;
    for (std::size_t b = kEntryValueOffset;
         b < kEntryValueOffset + kEntryValueBytes; ++b) {
      const bool on_stamp = b % 64 < 8;
      if (!on_stamp) bytes.push_back(b);
    }
    return bytes;
  }();
  const std::uint64_t h = mix64(seed ^ 0x5DCull, trial);
  const std::size_t byte_index = safe_bytes[h % safe_bytes.size()];
  return byte_index * 8 + (h >> 32) % 8;
}

}  // namespace semgap
