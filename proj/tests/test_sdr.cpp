#include <doctest.h>

#include "semgap/sdr.hpp"

using namespace semgap;

TEST_CASE("bit marking is idempotent") {
  ChunkBitmap bm(8);
  bm.mark_received(0);
  bm.mark_received(0);
  CHECK(bm.delivered_count() == 1);
  CHECK(bm.test(0));
  CHECK_FALSE(bm.test(1));
  CHECK_THROWS_AS(bm.mark_received(8), OutOfRangeError);
}

TEST_CASE("delivered fraction is exact") {
  ChunkBitmap bm(1024);
  for (std::uint32_t i = 0; i < 1024; ++i) {
    if (i != 511) bm.mark_received(i);
  }
  PartialCompletion pc = make_partial_completion(7, bm);
  CHECK(pc.op == 7);
  CHECK(pc.delivered_count == 1023);
  CHECK(pc.delivered_fraction == doctest::Approx(1023.0 / 1024.0).epsilon(0));
  CHECK(pc.bitmap.missing() == std::vector<std::uint32_t>{511});

  bm.mark_received(511);
  CHECK(make_partial_completion(7, bm).delivered_fraction == 1.0);
}

TEST_CASE("zero chunks sent means fraction zero") {
  ChunkBitmap bm(16);
  CHECK(make_partial_completion(1, bm).delivered_fraction == 0.0);
}

TEST_CASE("run-length encoding") {
  ChunkBitmap bm(8);
  for (std::uint32_t i : {0u, 1u, 2u, 4u, 5u, 6u, 7u}) bm.mark_received(i);
  CHECK(bm.rle() == "3x1,1x0,4x1");
  ChunkBitmap empty(3);
  CHECK(empty.rle() == "3x0");
}

TEST_CASE("selective retransmission plans exactly the missing chunks") {
  ChunkBitmap bm(10);
  for (std::uint32_t i = 0; i < 10; ++i) {
    if (i != 3 && i != 7) bm.mark_received(i);
  }
  CHECK(selective_retransmit_plan(bm) == std::vector<std::uint32_t>{3, 7});
  bm.mark_received(3);
  bm.mark_received(7);
  CHECK_THROWS_AS(selective_retransmit_plan(bm), NothingMissingError);
}
