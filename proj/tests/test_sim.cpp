#include <doctest.h>

#include <vector>

#include "semgap/scenario.hpp"
#include "semgap/sim.hpp"

using namespace semgap;

TEST_CASE("events fire at their tick in insertion order") {
  Simulator sim;
  std::vector<int> order;
  sim.schedule(5, EventKind::Note, 1, "a",
               [&order](Simulator&) { order.push_back(1); });
  sim.schedule(5, EventKind::Note, 2, "b",
               [&order](Simulator&) { order.push_back(2); });
  sim.schedule(3, EventKind::Note, 3, "c",
               [&order](Simulator&) { order.push_back(3); });
  const std::size_t fired = sim.run_until(5);
  CHECK(fired == 3);
  CHECK(order == std::vector<int>{3, 1, 2});
  CHECK(sim.now() == 5);
}

TEST_CASE("scheduling into the past is refused") {
  Simulator sim;
  sim.schedule(9, EventKind::Note, 1, "");
  sim.run_until(9);
  CHECK_THROWS_AS(sim.schedule(2, EventKind::Note, 1, ""), PastEventError);
}

TEST_CASE("run_until with an empty queue still advances the clock") {
  Simulator sim;
  CHECK(sim.run_until(100) == 0);
  CHECK(sim.now() == 100);
}

TEST_CASE("run_until processes only events at or before the deadline") {
  Simulator sim;
  int hits = 0;
  for (Tick t : {1, 2, 3}) {
    sim.schedule(t, EventKind::Note, t, "", [&hits](Simulator&) { ++hits; });
  }
  CHECK(sim.run_until(2) == 2);
  CHECK(hits == 2);
}

TEST_CASE("clock never decreases") {
  Simulator sim;
  sim.run_until(50);
  sim.run_until(10);
  CHECK(sim.now() == 50);
}

TEST_CASE("stage recording enforces order") {
  Simulator sim;
  sim.record_stage(1, Stage::Submission, 0);
  sim.record_stage(1, Stage::Completion, 10);
  CHECK(sim.find_timeline(1)->stage(Stage::Completion) == 10);

  SUBCASE("an earlier stage recorded late must not exceed a later stage") {
    CHECK_THROWS_AS(sim.record_stage(1, Stage::RemotePlacement, 12),
                    StageRegressionError);
  }
  SUBCASE("a later stage cannot precede an earlier one") {
    CHECK_THROWS_AS(sim.record_stage(1, Stage::Visibility, 4),
                    StageRegressionError);
  }
  SUBCASE("a stage records once") {
    CHECK_THROWS_AS(sim.record_stage(1, Stage::Completion, 10),
                    DuplicateStageError);
  }
  SUBCASE("filling the earlier stage consistently is fine") {
    sim.record_stage(1, Stage::RemotePlacement, 8);
    CHECK(sim.find_timeline(1)->has(Stage::RemotePlacement));
  }
}

TEST_CASE("gaps measure from the completion signal") {
  StageTimeline tl;
  tl.at[4] = 10;
  tl.at[5] = 10;
  tl.at[6] = 10;
  StageGaps g = gaps(tl);
  CHECK(g.visibility == 0);
  CHECK(g.semantic == 0);

  tl.at[5] = 25;
  tl.at[6] = 40;
  g = gaps(tl);
  CHECK(g.visibility == 15);
  CHECK(g.semantic == 30);

  StageTimeline partial;
  partial.at[4] = 10;
  g = gaps(partial);
  CHECK_FALSE(g.visibility.has_value());
  CHECK_FALSE(g.semantic.has_value());
}

TEST_CASE("placed content is invisible until promoted") {
  RemoteMemory mem(256, 64);
  std::vector<std::byte> data(64, std::byte{0xAB});
  mem.place(64, data);
  auto before = mem.read_visible(64, 64);
  CHECK(before == std::vector<std::byte>(64, std::byte{0}));
  CHECK(mem.read_placed(64, 64) == data);
  CHECK_FALSE(mem.line(1).visible_at.has_value());

  mem.promote_range(64, 64, 7);
  CHECK(mem.read_visible(64, 64) == data);
  const CacheLineView line = mem.line(1);
  CHECK(line.visible_at == 7);
  CHECK(std::vector<std::byte>(line.visible.begin(), line.visible.end()) ==
        std::vector<std::byte>(line.placed.begin(), line.placed.end()));
}

TEST_CASE("region registration") {
  RemoteMemory mem(256, 64);
  CHECK_FALSE(mem.region_registered(0, 64));
  mem.register_region(0, 128);
  CHECK(mem.region_registered(0, 64));
  CHECK(mem.region_registered(64, 64));
  CHECK_FALSE(mem.region_registered(64, 128));
  CHECK_THROWS_AS(mem.register_region(200, 100), OutOfRangeError);
}

TEST_CASE("out-of-bounds access is refused") {
  RemoteMemory mem(128, 64);
  CHECK_THROWS_AS(mem.read_visible(100, 64), OutOfRangeError);
  CHECK_THROWS_AS(mem.promote_line(2, 0), OutOfRangeError);
}

TEST_CASE("u64 round trip is little-endian") {
  std::vector<std::byte> buf(16);
  store_u64(buf, 4, 0x1122334455667788ull);
  CHECK(load_u64(buf, 4) == 0x1122334455667788ull);
  CHECK(buf[4] == std::byte{0x88});
  CHECK(buf[11] == std::byte{0x11});
}

TEST_CASE("every fired event emits exactly one trace record") {
  // Full torn-enumeration scenario to quiescence; the fired-event count must
  // equal the emitted trace record count.
  ScenarioConfig cfg = default_config("dht-torn");
  cfg.seed = 3;
  RunResult result = run_scenario(cfg, true);
  std::size_t lines = 0;
  for (char c : result.trace) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == result.report.events);
  CHECK(lines > 0);
}
