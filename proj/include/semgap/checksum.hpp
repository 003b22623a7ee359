#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace semgap {

// CRC-32 (reflected, polynomial 0xEDB88320). Any single-bit error changes
// the checksum, which is what the reflection digest relies on.
std::uint32_t crc32(std::span<const std::byte> data);

}  // namespace semgap
