#include "semgap/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

namespace semgap {

const char* stage_name(Stage s) {
  static const char* names[kStageCount] = {"t0", "t1", "t2", "t3",
                                           "t4", "t5", "t6"};
  return names[static_cast<int>(s)];
}

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::StageT0: return "t0";
    case EventKind::StageT1: return "t1";
    case EventKind::StageT2: return "t2";
    case EventKind::StageT3: return "t3";
    case EventKind::StageT4: return "t4";
    case EventKind::StageT5: return "t5";
    case EventKind::StageT6: return "t6";
    case EventKind::ChunkDeliver: return "chunk_deliver";
    case EventKind::ChunkLost: return "chunk_lost";
    case EventKind::LossDetect: return "loss_detect";
    case EventKind::Retransmit: return "retransmit";
    case EventKind::PartialReport: return "partial_report";
    case EventKind::DigestSend: return "digest_send";
    case EventKind::DigestRecv: return "digest_recv";
    case EventKind::ReflectTimeout: return "reflect_timeout";
    case EventKind::PauseStart: return "pause_start";
    case EventKind::PauseEnd: return "pause_end";
    case EventKind::WriterStep: return "writer_step";
    case EventKind::ReaderStep: return "reader_step";
    case EventKind::AtomicExec: return "atomic_exec";
    case EventKind::Note: return "note";
  }
  return "unknown";
}

EventKind stage_event_kind(Stage s) {
  return static_cast<EventKind>(static_cast<int>(EventKind::StageT0) +
                                static_cast<int>(s));
}

StageGaps gaps(const StageTimeline& tl) {
  StageGaps g;
  const auto t4 = tl.stage(Stage::Completion);
  const auto t5 = tl.stage(Stage::Visibility);
  const auto t6 = tl.stage(Stage::SemanticAgreement);
  if (t4 && t5) g.visibility = *t5 - *t4;
  if (t4 && t6) g.semantic = *t6 - *t4;
  return g;
}

void Simulator::schedule(Tick fire_at, EventKind kind, OpId subject,
                         std::string detail,
                         std::function<void(Simulator&)> action) {
  if (fire_at < clock_) {
    throw PastEventError("schedule: fire_at " + std::to_string(fire_at) +
                         " is before clock " + std::to_string(clock_));
  }
  Event ev;
  ev.fire_at = fire_at;
  ev.kind = kind;
  ev.subject = subject;
  ev.detail = std::move(detail);
  ev.seq = next_seq_++;
  ev.action = std::move(action);
  queue_.push(std::move(ev));
}

void Simulator::schedule_stage(Tick fire_at, OpId op, Stage s,
                               std::string detail,
                               std::function<void(Simulator&)> after) {
  schedule(fire_at, stage_event_kind(s), op, std::move(detail),
           [op, s, after = std::move(after)](Simulator& sim) {
             sim.record_stage(op, s, sim.now());
             if (after) after(sim);
           });
}

std::size_t Simulator::run_until(Tick deadline) {
  std::size_t count = 0;
  while (!queue_.empty() && queue_.top().fire_at <= deadline) {
    Event ev = queue_.top();
    queue_.pop();
    fire(ev);
    ++count;
  }
  clock_ = std::max(clock_, deadline);
  return count;
}

std::size_t Simulator::run_all() {
  std::size_t count = 0;
  while (!queue_.empty()) {
    Event ev = queue_.top();
    queue_.pop();
    fire(ev);
    ++count;
  }
  return count;
}

void Simulator::fire(Event& ev) {
  clock_ = std::max(clock_, ev.fire_at);
  ++fired_;
  if (trace_enabled_) {
    char head[64];
    std::snprintf(head, sizeof(head), "%llu\t%llu\t",
                  static_cast<unsigned long long>(ev.fire_at),
                  static_cast<unsigned long long>(ev.subject));
    trace_ += head;
    trace_ += event_kind_name(ev.kind);
    trace_ += '\t';
    trace_ += ev.detail;
    trace_ += '\n';
  }
  if (ev.action) ev.action(*this);
}

void Simulator::record_stage(OpId op, Stage s, Tick at) {
  StageTimeline& tl = timelines_[op];
  const int idx = static_cast<int>(s);
  if (tl.at[idx].has_value()) {
    throw DuplicateStageError("stage " + std::string(stage_name(s)) +
                              " already recorded for op " +
                              std::to_string(op));
  }
  for (int i = 0; i < kStageCount; ++i) {
    if (!tl.at[i].has_value()) continue;
    const bool bad = (i < idx && *tl.at[i] > at) || (i > idx && *tl.at[i] < at);
    if (bad) {
      throw StageRegressionError(
          "op " + std::to_string(op) + ": " + stage_name(s) + "=" +
          std::to_string(at) + " conflicts with " +
          stage_name(static_cast<Stage>(i)) + "=" + std::to_string(*tl.at[i]));
    }
  }
  tl.at[idx] = at;
}

const StageTimeline* Simulator::find_timeline(OpId op) const {
  auto it = timelines_.find(op);
  return it == timelines_.end() ? nullptr : &it->second;
}

StageGaps Simulator::op_gaps(OpId op) const {
  const StageTimeline* tl = find_timeline(op);
  return tl ? gaps(*tl) : StageGaps{};
}

RemoteMemory::RemoteMemory(std::size_t size_bytes, std::size_t line_size)
    : line_size_(line_size) {
  if (line_size == 0) throw SimError("line_size must be positive");
  const std::size_t lines = (size_bytes + line_size - 1) / line_size;
  placed_.assign(lines * line_size, std::byte{0});
  visible_.assign(lines * line_size, std::byte{0});
  visible_at_.assign(lines, std::nullopt);
}

void RemoteMemory::check_range(std::size_t offset, std::size_t len) const {
  if (offset + len > placed_.size()) {
    throw OutOfRangeError("memory access [" + std::to_string(offset) + ", " +
                          std::to_string(offset + len) + ") exceeds " +
                          std::to_string(placed_.size()) + " bytes");
  }
}

void RemoteMemory::register_region(std::size_t offset, std::size_t len) {
  check_range(offset, len);
  regions_.emplace_back(offset, len);
}

bool RemoteMemory::region_registered(std::size_t offset,
                                     std::size_t len) const {
  for (const auto& [start, rlen] : regions_) {
    if (offset >= start && offset + len <= start + rlen) return true;
  }
  return false;
}

void RemoteMemory::place(std::size_t offset, std::span<const std::byte> data) {
  check_range(offset, data.size());
  std::memcpy(placed_.data() + offset, data.data(), data.size());
}

void RemoteMemory::place_u64(std::size_t offset, std::uint64_t value) {
  check_range(offset, 8);
  store_u64(std::span<std::byte>(placed_), offset, value);
}

void RemoteMemory::promote_range(std::size_t offset, std::size_t len,
                                 Tick at) {
  if (len == 0) return;
  check_range(offset, len);
  const std::size_t first = offset / line_size_;
  const std::size_t last = (offset + len - 1) / line_size_;
  for (std::size_t i = first; i <= last; ++i) promote_line(i, at);
}

void RemoteMemory::promote_line(std::size_t line_index, Tick at) {
  if (line_index >= visible_at_.size()) {
    throw OutOfRangeError("line index " + std::to_string(line_index) +
                          " out of range");
  }
  const std::size_t base = line_index * line_size_;
  std::memcpy(visible_.data() + base, placed_.data() + base, line_size_);
  visible_at_[line_index] = at;
}

std::vector<std::byte> RemoteMemory::read_visible(std::size_t offset,
                                                  std::size_t len) const {
  check_range(offset, len);
  return {visible_.begin() + static_cast<std::ptrdiff_t>(offset),
          visible_.begin() + static_cast<std::ptrdiff_t>(offset + len)};
}

std::vector<std::byte> RemoteMemory::read_placed(std::size_t offset,
                                                 std::size_t len) const {
  check_range(offset, len);
  return {placed_.begin() + static_cast<std::ptrdiff_t>(offset),
          placed_.begin() + static_cast<std::ptrdiff_t>(offset + len)};
}

std::uint64_t RemoteMemory::read_placed_u64(std::size_t offset) const {
  check_range(offset, 8);
  return load_u64(std::span<const std::byte>(placed_), offset);
}

std::uint64_t RemoteMemory::read_visible_u64(std::size_t offset) const {
  check_range(offset, 8);
  return load_u64(std::span<const std::byte>(visible_), offset);
}

CacheLineView RemoteMemory::line(std::size_t line_index) const {
  if (line_index >= visible_at_.size()) {
    throw OutOfRangeError("line index " + std::to_string(line_index) +
                          " out of range");
  }
  const std::size_t base = line_index * line_size_;
  return CacheLineView{
      std::span<const std::byte>(placed_).subspan(base, line_size_),
      std::span<const std::byte>(visible_).subspan(base, line_size_),
      visible_at_[line_index]};
}

std::uint64_t load_u64(std::span<const std::byte> bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | std::to_integer<std::uint64_t>(bytes[offset + i]);
  }
  return v;
}

void store_u64(std::span<std::byte> bytes, std::size_t offset,
               std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    bytes[offset + i] = std::byte{static_cast<unsigned char>(value >> (8 * i))};
  }
}

}  // namespace semgap
