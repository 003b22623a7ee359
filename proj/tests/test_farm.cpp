#include <doctest.h>

#include "semgap/farm.hpp"
#include "semgap/payloads.hpp"

using namespace semgap;

namespace {

RemoteMemory make_mem() { return RemoteMemory(1024, 64); }

std::vector<std::byte> object_bytes(std::uint64_t version) {
  return make_stamped_object(version);
}

}  // namespace

TEST_CASE("layout: 304 bytes is 5 raw lines but 6 versioned lines") {
  CHECK(FarmLayout::raw_line_count(304) == 5);
  CHECK(FarmLayout::versioned_line_count(304) == 6);
  CHECK(FarmLayout::region_bytes(304) == 8 + 6 * 64);
  CHECK(FarmLayout::versioned_line_count(56) == 1);
  CHECK(FarmLayout::versioned_line_count(57) == 2);
}

TEST_CASE("version stamps sit in the final 8 bytes of each line") {
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  obj.seed(3, object_bytes(3));
  for (std::size_t i = 0; i < obj.line_count(); ++i) {
    const std::size_t stamp_off = obj.line_offset(i) + 56;
    CHECK(mem.read_placed_u64(stamp_off) == 3);
  }
  CHECK(obj.committed_version() == 3);
}

TEST_CASE("read with no concurrent writer resolves immediately") {
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  const auto data = object_bytes(1);
  obj.seed(1, data);
  const FarmReadOutcome out = farm_read(obj);
  CHECK(out.resolved);
  CHECK(out.retries == 0);
  CHECK(out.version == 1);
  CHECK(out.data == data);
}

TEST_CASE("a stepped write followed by a read returns the new version") {
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  obj.seed(1, object_bytes(1));
  const auto v2 = object_bytes(2);
  FarmWriter writer(obj, 2, v2);
  while (!writer.done()) writer.step();
  CHECK(writer.commit() == FarmWriter::CommitResult::Committed);
  CHECK(obj.committed_version() == 2);
  const FarmReadOutcome out = farm_read(obj);
  CHECK(out.resolved);
  CHECK(out.version == 2);
  CHECK(out.data == v2);
}

TEST_CASE("a reader preempted mid-write detects mixed versions and retries") {
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  obj.seed(1, object_bytes(1));
  const auto v2 = object_bytes(2);
  FarmWriter writer(obj, 2, v2);

  FarmReader reader(obj);
  reader.step_pass1();  // sees line 0 at v1
  writer.step();
  writer.step();
  writer.step();  // lines 0..2 now at v2
  reader.run_remaining_attempt();
  CHECK(reader.attempt_complete());
  CHECK_FALSE(reader.attempt_consistent());  // retry classification

  while (!writer.done()) writer.step();
  writer.commit();
  reader.reset_attempt();
  reader.run_remaining_attempt();
  CHECK(reader.attempt_consistent());
  CHECK(reader.snapshot() == v2);
}

TEST_CASE("a permanently racing writer exhausts the retry budget") {
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  obj.seed(1, object_bytes(1));
  std::uint64_t version = 1;
  // Between attempts the racing writer bumps line 0 to a fresh version, so
  // every attempt observes mixed stamps.
  auto racing_writer = [&]() {
    version += 1;
    auto data = make_stamped_object(version);
    auto slices = split_farm_lines(data);
    obj.write_line(0, slices[0], version);
  };
  racing_writer();
  const FarmReadOutcome out = farm_read(obj, 0, racing_writer);
  CHECK_FALSE(out.resolved);  // torn read unresolved at budget 0

  const FarmReadOutcome out3 = farm_read(obj, 3, racing_writer);
  CHECK_FALSE(out3.resolved);
  CHECK(out3.retries == 3);
}

TEST_CASE("two concurrent writers: exactly one commit wins either order") {
  for (int order = 0; order < 2; ++order) {
    RemoteMemory mem = make_mem();
    FarmObject obj(mem, 0, 304);
    obj.seed(1, object_bytes(1));
    FarmWriter a(obj, 2, make_stamped_object(2));
    FarmWriter b(obj, 2, make_stamped_object(2));
    while (!a.done()) a.step();
    while (!b.done()) b.step();
    FarmWriter& first = order == 0 ? a : b;
    FarmWriter& second = order == 0 ? b : a;
    CHECK(first.commit() == FarmWriter::CommitResult::Committed);
    CHECK(second.commit() == FarmWriter::CommitResult::CasConflict);
    CHECK(second.commit_prior() == 2);  // the winner's version
    CHECK(obj.committed_version() == 2);
  }
}

TEST_CASE("writer preconditions") {
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  obj.seed(1, object_bytes(1));
  CHECK_THROWS_AS(FarmWriter(obj, 3, object_bytes(3)), SimError);
  FarmWriter w(obj, 2, object_bytes(2));
  CHECK_THROWS_AS(w.commit(), SimError);  // lines not yet written
}

TEST_CASE("the retry decision consults only locally read versions") {
  // Corrupting the header word (the acknowledgment-adjacent state) must not
  // change how the reader classifies an attempt.
  RemoteMemory mem = make_mem();
  FarmObject obj(mem, 0, 304);
  const auto data = object_bytes(4);
  obj.seed(4, data);
  mem.place_u64(obj.header_offset(), 0xDEAD);
  const FarmReadOutcome out = farm_read(obj);
  CHECK(out.resolved);
  CHECK(out.retries == 0);
  CHECK(out.version == 4);
  CHECK(out.data == data);
}

TEST_CASE("the full protocol runs through the verbs layer") {
  Simulator sim;
  RemoteMemory mem(1024, 64);
  mem.register_region(0, 1024);
  VerbsEngine engine(sim, mem, FaultPlan{});
  const QpId qp = engine.create_qp(TransportMode::ReliableConnected, 4096);

  FarmObject obj(mem, 0, 304);
  obj.seed(1, object_bytes(1));
  const auto v2 = object_bytes(2);
  const FarmWritePlan plan = post_farm_write(engine, qp, obj, 2, v2);
  CHECK(plan.line_ops.size() == 6);
  sim.run_all();

  REQUIRE(engine.atomic_result(plan.cas_op) != nullptr);
  CHECK(engine.atomic_result(plan.cas_op)->matched);
  CHECK(obj.committed_version() == 2);
  const FarmReadOutcome out = farm_read(obj);
  CHECK(out.resolved);
  CHECK(out.version == 2);
  CHECK(out.data == v2);

  // A second writer racing for the same version loses the commit CAS.
  const FarmWritePlan stale = post_farm_write(engine, qp, obj, 2, v2);
  sim.run_all();
  CHECK_FALSE(engine.atomic_result(stale.cas_op)->matched);
  CHECK(engine.atomic_result(stale.cas_op)->prior == 2);
  CHECK(obj.committed_version() == 2);
}
