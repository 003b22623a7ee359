#include "semgap/faults.hpp"

#include <algorithm>
#include <cmath>

namespace semgap {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ b);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b) ^ c);
}

std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                    std::uint64_t d) {
  return mix64(mix64(a, b, c) ^ d);
}

double unit_double(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

namespace {
// Domain tags keep unrelated decision streams independent.
constexpr std::uint64_t kLossDomain = 0x106Cull;
constexpr std::uint64_t kVisDomain = 0x715Bull;
constexpr std::uint64_t kSkipDomain = 0x5C19ull;
}  // namespace

bool decide_loss(const FaultPlan& plan, OpId op, std::uint32_t chunk_index,
                 std::uint32_t pass) {
  if (pass == 0) {
    for (std::uint32_t forced : plan.lose_chunks) {
      if (forced == chunk_index) return true;
    }
  }
  if (plan.chunk_loss_rate <= 0.0) return false;
  if (plan.chunk_loss_rate >= 1.0) return true;
  const std::uint64_t h = mix64(plan.seed ^ kLossDomain, op, chunk_index, pass);
  return unit_double(h) < plan.chunk_loss_rate;
}

std::vector<std::uint32_t> sample_lost_chunks(std::uint64_t seed, OpId op,
                                              std::uint32_t chunk_count,
                                              double loss_rate,
                                              std::uint32_t pass) {
  std::vector<std::uint32_t> lost;
  if (loss_rate <= 0.0 || chunk_count == 0) return lost;
  if (loss_rate >= 1.0) {
    lost.resize(chunk_count);
    for (std::uint32_t i = 0; i < chunk_count; ++i) lost[i] = i;
    return lost;
  }
  // Geometric skip: the gap to the next loss is Geometric(loss_rate), so the
  // per-chunk marginal stays Bernoulli(loss_rate) and independent.
  const double denom = std::log1p(-loss_rate);
  std::uint64_t stream = mix64(seed ^ kSkipDomain, op, pass);
  double position = -1.0;
  while (true) {
    stream = mix64(stream);
    double u = unit_double(stream);
    if (u <= 0.0) u = 0x1.0p-53;
    position += 1.0 + std::floor(std::log(u) / denom);
    if (position >= static_cast<double>(chunk_count)) break;
    lost.push_back(static_cast<std::uint32_t>(position));
  }
  return lost;
}

Tick sample_visibility_delay(const FaultPlan& plan, OpId op) {
  const auto& d = plan.visibility_delay;
  if (d.max <= d.min) return d.min;
  const std::uint64_t h = mix64(plan.seed ^ kVisDomain, op);
  return d.min + h % (d.max - d.min + 1);
}

Tick pause_deferral(const FaultPlan& plan, int priority_class, Tick due) {
  bool moved = true;
  while (moved) {
    moved = false;
    for (const PauseWindow& w : plan.pauses) {
      if (w.priority_class != priority_class || w.duration == 0) continue;
      if (due >= w.start && due < w.start + w.duration) {
        due = w.start + w.duration;
        moved = true;
      }
    }
  }
  return due;
}

void corrupt(std::span<std::byte> payload, std::uint64_t bit_index) {
  if (bit_index >= payload.size() * 8ull) {
    throw OutOfRangeError("bit index " + std::to_string(bit_index) +
                          " exceeds payload of " +
                          std::to_string(payload.size()) + " bytes");
  }
  payload[bit_index / 8] ^= std::byte{
      static_cast<unsigned char>(1u << (bit_index % 8))};
}

std::uint64_t interleaving_count(unsigned writer_lines,
                                 unsigned reader_passes) {
  const std::uint64_t a = writer_lines;
  const std::uint64_t b = static_cast<std::uint64_t>(reader_passes) *
                          writer_lines;
  // C(a+b, a) built incrementally; exact at desk scale.
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= a; ++i) {
    result = result * (b + i) / i;
  }
  return result;
}

namespace {

void extend(std::vector<InterleavingSchedule>& out,
            std::vector<InterleavingStep>& prefix, unsigned writer_lines,
            unsigned reader_total, unsigned w_done, unsigned r_done) {
  if (w_done == writer_lines && r_done == reader_total) {
    out.push_back(InterleavingSchedule{prefix});
    return;
  }
  if (w_done < writer_lines) {
    prefix.push_back({Actor::Writer, w_done});
    extend(out, prefix, writer_lines, reader_total, w_done + 1, r_done);
    prefix.pop_back();
  }
  if (r_done < reader_total) {
    prefix.push_back({Actor::Reader, r_done % writer_lines});
    extend(out, prefix, writer_lines, reader_total, w_done, r_done + 1);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<InterleavingSchedule> enumerate_interleavings(
    unsigned writer_lines, unsigned reader_passes) {
  if (writer_lines > 6 || reader_passes > 2) {
    throw TooLargeError("exhaustive enumeration capped at 6 lines / 2 passes");
  }
  if (writer_lines == 0 || reader_passes == 0) {
    throw SimError("enumeration needs at least one line and one pass");
  }
  std::vector<InterleavingSchedule> out;
  out.reserve(interleaving_count(writer_lines, reader_passes));
  std::vector<InterleavingStep> prefix;
  extend(out, prefix, writer_lines, reader_passes * writer_lines, 0, 0);
  return out;
}

}  // namespace semgap
