#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semgap/sim.hpp"
#include "semgap/verbs.hpp"

namespace semgap {

// Versioned-line object layout over remote memory:
//   [committed-version word: 8 bytes][line 0][line 1]...
// Each 64-byte line carries 56 payload bytes and its version in the final
// 8 bytes, so a 304-byte object needs 6 versioned lines even though it spans
// 5 raw cache lines. Reports surface both counts.
struct FarmLayout {
  static constexpr std::size_t kLineSize = 64;
  static constexpr std::size_t kDataPerLine = 56;

  static std::size_t versioned_line_count(std::size_t object_bytes) {
    return (object_bytes + kDataPerLine - 1) / kDataPerLine;
  }
  static std::size_t raw_line_count(std::size_t object_bytes) {
    return (object_bytes + kLineSize - 1) / kLineSize;
  }
  static std::size_t region_bytes(std::size_t object_bytes) {
    return 8 + versioned_line_count(object_bytes) * kLineSize;
  }
};

// A versioned object resident in remote memory. Line accessors model
// one-sided NIC reads and writes: they see placed content.
class FarmObject {
 public:
  FarmObject(RemoteMemory& mem, std::size_t base_offset,
             std::size_t object_bytes);

  std::size_t object_bytes() const { return object_bytes_; }
  std::size_t line_count() const {
    return FarmLayout::versioned_line_count(object_bytes_);
  }
  std::size_t base_offset() const { return base_; }
  std::size_t header_offset() const { return base_; }
  std::size_t line_offset(std::size_t i) const {
    return base_ + 8 + i * FarmLayout::kLineSize;
  }
  std::size_t line_data_bytes(std::size_t i) const;

  // Installs a fully committed state: every line stamped with `version`,
  // header word set, everything promoted.
  void seed(std::uint64_t version, std::span<const std::byte> data);

  std::uint64_t committed_version() const;

  void write_line(std::size_t i, std::span<const std::byte> data,
                  std::uint64_t version);
  std::vector<std::byte> read_line_data(std::size_t i) const;
  std::uint64_t read_line_version(std::size_t i) const;

  // Direct 8-byte CAS on the header word; returns the prior value.
  std::uint64_t header_cas(std::uint64_t expect, std::uint64_t swap);

  RemoteMemory& memory() { return mem_; }

 private:
  RemoteMemory& mem_;
  std::size_t base_;
  std::size_t object_bytes_;
};

// Splits `data` into per-line payload slices for `object_bytes`.
std::vector<std::vector<std::byte>> split_farm_lines(
    std::span<const std::byte> data);

// Step-wise writer: one versioned line per step, then a commit CAS. Steps
// are interleavable with reader steps under a schedule.
class FarmWriter {
 public:
  FarmWriter(FarmObject& obj, std::uint64_t new_version,
             std::span<const std::byte> data);

  bool done() const { return next_line_ >= slices_.size(); }
  std::size_t lines_written() const { return next_line_; }
  void step();

  enum class CommitResult { Committed, CasConflict };
  CommitResult commit();
  std::uint64_t commit_prior() const { return prior_; }

 private:
  FarmObject& obj_;
  std::uint64_t version_;
  std::vector<std::vector<std::byte>> slices_;
  std::size_t next_line_ = 0;
  std::uint64_t prior_ = 0;
};

// Two-pass optimistic reader. Pass 1 reads every line (payload + version);
// pass 2 re-reads versions only. An attempt is consistent iff all 2n version
// observations are one identical value. The decision consults nothing but
// these locally read versions.
class FarmReader {
 public:
  explicit FarmReader(const FarmObject& obj);

  bool pass1_done() const { return pass1_next_ >= obj_->line_count(); }
  bool pass2_done() const { return pass2_next_ >= obj_->line_count(); }
  void step_pass1();
  void step_pass2();
  void run_remaining_attempt();  // finishes both passes uninterleaved

  bool attempt_complete() const { return pass1_done() && pass2_done(); }
  bool attempt_consistent() const;
  void reset_attempt();

  const std::vector<std::uint64_t>& pass1_versions() const {
    return pass1_versions_;
  }
  const std::vector<std::uint64_t>& pass2_versions() const {
    return pass2_versions_;
  }

  // Assembled object bytes from pass-1 data; valid once pass 1 finished.
  std::vector<std::byte> snapshot() const;

 private:
  const FarmObject* obj_;
  std::vector<std::vector<std::byte>> pass1_data_;
  std::vector<std::uint64_t> pass1_versions_;
  std::vector<std::uint64_t> pass2_versions_;
  std::size_t pass1_next_ = 0;
  std::size_t pass2_next_ = 0;
};

struct FarmReadOutcome {
  bool resolved = false;  // false: torn read unresolved after max_retries
  std::vector<std::byte> data;
  std::uint64_t version = 0;
  unsigned retries = 0;
};

// Full read loop: attempts until consistent or the retry budget runs out.
// `between_attempts` (optional) models concurrent writer activity.
FarmReadOutcome farm_read(const FarmObject& obj, unsigned max_retries = 16,
                          const std::function<void()>& between_attempts = {});

struct FarmWritePlan {
  std::vector<OpId> line_ops;
  OpId cas_op = 0;
};

// The same protocol issued through the verbs layer: one Write per versioned
// line, then an 8-byte CAS on the header word. Outcome is read from the CAS
// result after the simulation settles.
FarmWritePlan post_farm_write(VerbsEngine& engine, QpId qp, FarmObject& obj,
                              std::uint64_t new_version,
                              std::span<const std::byte> data);

}  // namespace semgap
