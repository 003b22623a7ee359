#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "semgap/errors.hpp"

namespace semgap {

using Tick = std::uint64_t;
using OpId = std::uint64_t;

// The seven lifecycle points of a remote-memory write. A later stage may be
// absent while an earlier one is set; the reverse never holds.
enum class Stage : int {
  Submission = 0,
  Placement = 1,
  Transmission = 2,
  RemotePlacement = 3,
  Completion = 4,
  Visibility = 5,
  SemanticAgreement = 6,
};

inline constexpr int kStageCount = 7;

const char* stage_name(Stage s);  // "t0".."t6"

// Per-operation record of stage ticks. Monotone: for any two recorded
// stages i < j, tick(i) <= tick(j).
struct StageTimeline {
  std::array<std::optional<Tick>, kStageCount> at{};

  std::optional<Tick> stage(Stage s) const {
    return at[static_cast<int>(s)];
  }
  bool has(Stage s) const { return at[static_cast<int>(s)].has_value(); }
};

// Deltas measured from the completion signal.
struct StageGaps {
  std::optional<Tick> visibility;  // t5 - t4
  std::optional<Tick> semantic;    // t6 - t4
};

StageGaps gaps(const StageTimeline& tl);

enum class EventKind {
  StageT0,
  StageT1,
  StageT2,
  StageT3,
  StageT4,
  StageT5,
  StageT6,
  ChunkDeliver,
  ChunkLost,
  LossDetect,
  Retransmit,
  PartialReport,
  DigestSend,
  DigestRecv,
  ReflectTimeout,
  PauseStart,
  PauseEnd,
  WriterStep,
  ReaderStep,
  AtomicExec,
  Note,
};

const char* event_kind_name(EventKind k);
EventKind stage_event_kind(Stage s);

class Simulator;

// A scheduled occurrence. Events fire in (fire_at, insertion order); ties on
// fire_at always resolve to FIFO, which keeps runs reproducible.
struct Event {
  Tick fire_at = 0;
  EventKind kind = EventKind::Note;
  OpId subject = 0;
  std::string detail;
  std::uint64_t seq = 0;
  std::function<void(Simulator&)> action;
};

// Single-threaded discrete-event engine: simulated clock, event queue,
// per-operation stage timelines, and an optional line-oriented trace.
// One trace record is emitted per fired event, so a run's fired-event count
// equals its trace line count.
class Simulator {
 public:
  Simulator() = default;

  Tick now() const { return clock_; }

  void schedule(Tick fire_at, EventKind kind, OpId subject,
                std::string detail = {},
                std::function<void(Simulator&)> action = {});

  // Schedules an event whose firing records `s` for `op` at the fire tick.
  // `after` runs once the stage is recorded.
  void schedule_stage(Tick fire_at, OpId op, Stage s, std::string detail = {},
                      std::function<void(Simulator&)> after = {});

  // Fires every event with fire_at <= deadline, then advances the clock to
  // at least the deadline. Returns the number of events fired.
  std::size_t run_until(Tick deadline);

  // Fires events until the queue is empty.
  std::size_t run_all();

  void record_stage(OpId op, Stage s, Tick at);

  const StageTimeline* find_timeline(OpId op) const;
  StageGaps op_gaps(OpId op) const;
  const std::map<OpId, StageTimeline>& timelines() const { return timelines_; }

  void enable_trace(bool on) { trace_enabled_ = on; }
  bool trace_enabled() const { return trace_enabled_; }
  const std::string& trace() const { return trace_; }

  std::uint64_t events_fired() const { return fired_; }

 private:
  struct QueueOrder {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  void fire(Event& ev);

  Tick clock_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t fired_ = 0;
  std::priority_queue<Event, std::vector<Event>, QueueOrder> queue_;
  std::map<OpId, StageTimeline> timelines_;
  bool trace_enabled_ = false;
  std::string trace_;
};

// One cache line's worth of state, as seen from outside.
struct CacheLineView {
  std::span<const std::byte> placed;
  std::span<const std::byte> visible;
  std::optional<Tick> visible_at;
};

// Cache-line-granular remote memory with distinct placed and visible
// contents. DMA writes land in `placed`; the simulated remote CPU reads only
// `visible`, which catches up per line when a visibility event promotes it.
class RemoteMemory {
 public:
  explicit RemoteMemory(std::size_t size_bytes, std::size_t line_size = 64);

  std::size_t size_bytes() const { return placed_.size(); }
  std::size_t line_size() const { return line_size_; }
  std::size_t line_count() const { return visible_at_.size(); }

  void register_region(std::size_t offset, std::size_t len);
  bool region_registered(std::size_t offset, std::size_t len) const;

  void place(std::size_t offset, std::span<const std::byte> data);
  void place_u64(std::size_t offset, std::uint64_t value);

  // Promotes every line overlapping [offset, offset+len): visible := placed.
  void promote_range(std::size_t offset, std::size_t len, Tick at);
  void promote_line(std::size_t line_index, Tick at);

  std::vector<std::byte> read_visible(std::size_t offset,
                                      std::size_t len) const;
  std::vector<std::byte> read_placed(std::size_t offset,
                                     std::size_t len) const;
  std::uint64_t read_placed_u64(std::size_t offset) const;
  std::uint64_t read_visible_u64(std::size_t offset) const;

  CacheLineView line(std::size_t line_index) const;

 private:
  void check_range(std::size_t offset, std::size_t len) const;

  std::size_t line_size_;
  std::vector<std::byte> placed_;
  std::vector<std::byte> visible_;
  std::vector<std::optional<Tick>> visible_at_;
  std::vector<std::pair<std::size_t, std::size_t>> regions_;
};

std::uint64_t load_u64(std::span<const std::byte> bytes, std::size_t offset);
void store_u64(std::span<std::byte> bytes, std::size_t offset,
               std::uint64_t value);

}  // namespace semgap
