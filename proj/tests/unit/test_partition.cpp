#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "evstream/error.hpp"
#include "evstream/partition.hpp"
#include "support.hpp"

using namespace evs;

namespace {

std::vector<std::uint64_t> ids(const TrackSegment& s) {
  std::vector<std::uint64_t> out;
  for (const Event& e : s.events) out.push_back(e.t);
  return out;
}

}  // namespace

TEST_CASE("round robin assignment") {
  const EventWindow w = testing::numbered_window(7);  // e1..e7 have t = 0..6
  const Partitioned p = partition_round_robin(w, 3);
  REQUIRE(p.segments.size() == 3);
  CHECK(ids(p.segments[0]) == std::vector<std::uint64_t>{0, 3, 6});
  CHECK(ids(p.segments[1]) == std::vector<std::uint64_t>{1, 4});
  CHECK(ids(p.segments[2]) == std::vector<std::uint64_t>{2, 5});
  CHECK(p.dropped == 0);

  const Partitioned one = partition_round_robin(w, 1);
  CHECK(one.segments[0].events == w.events);
}

TEST_CASE("bucket assignment") {
  const Partitioned p = partition_bucket(testing::numbered_window(5), 2, 3);
  CHECK(ids(p.segments[0]) == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(ids(p.segments[1]) == std::vector<std::uint64_t>{3, 4});

  const Partitioned empty = partition_bucket(EventWindow{}, 3, 10);
  REQUIRE(empty.segments.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(empty.segments[t].track_id == t);
    CHECK(empty.segments[t].events.empty());
  }

  const Partitioned capped = partition_bucket(testing::numbered_window(10), 2, 3);
  CHECK(capped.dropped == 4);
  CHECK(capped.segments[0].events.size() + capped.segments[1].events.size() == 6);
}

TEST_CASE("partition config validation") {
  CHECK_THROWS_AS((PartitionConfig{PartitionStrategy::Bucket, 0, 10}.validate()), Error);
  CHECK_THROWS_AS((PartitionConfig{PartitionStrategy::Bucket, 2, 0}.validate()), Error);
  CHECK_NOTHROW((PartitionConfig{PartitionStrategy::RoundRobin, 2, 1}.validate()));
  CHECK(parse_strategy("round_robin") == PartitionStrategy::RoundRobin);
  CHECK(parse_strategy("bucket") == PartitionStrategy::Bucket);
  CHECK_THROWS_AS(parse_strategy("zigzag"), Error);
}

TEST_CASE("reconstruct examples") {
  const EventWindow w5 = testing::numbered_window(5);
  const Partitioned b = partition_bucket(w5, 2, 3);
  CHECK(reconstruct_bucket(b.segments, 1).events == std::vector<Event>(w5.events.begin(), w5.events.begin() + 3));
  CHECK(reconstruct_bucket(b.segments, 2).events == w5.events);

  const EventWindow w7 = testing::numbered_window(7);
  const Partitioned r = partition_round_robin(w7, 3);
  const std::vector<TrackId> zero{0};
  const auto only0 = reconstruct_round_robin(r.segments, zero, 3);
  CHECK(only0.events == std::vector<Event>{w7.events[0], w7.events[3], w7.events[6]});
  const std::vector<TrackId> all{0, 1, 2};
  CHECK(reconstruct_round_robin(r.segments, all, 3).events == w7.events);

  // segments arrive in any order
  std::vector<TrackSegment> shuffled{b.segments[1], b.segments[0]};
  CHECK(reconstruct_bucket(shuffled, 2).events == w5.events);

  try {
    reconstruct_bucket(std::span(b.segments).first(1), 2);
    FAIL("expected IncompleteWindow");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::IncompleteWindow);
  }
}

TEST_CASE("partition and reconstruct properties") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(0, 2'000);
  std::uniform_int_distribution<int> tracks(1, 12);
  std::uniform_int_distribution<int> per(1, 300);
  for (int i = 0; i < 1'000; ++i) {
    const EventWindow w = testing::random_window(rng, size(rng));
    const auto n = static_cast<std::uint16_t>(tracks(rng));
    const auto e = static_cast<std::uint32_t>(per(rng));

    const Partitioned rr = partition_round_robin(w, n);
    std::vector<TrackId> all(n);
    std::iota(all.begin(), all.end(), TrackId{0});
    REQUIRE(reconstruct_round_robin(rr.segments, all, n, w.start_t).events == w.events);

    const Partitioned bk = partition_bucket(w, n, e);
    std::vector<Event> previous;
    for (std::uint16_t k = 1; k <= n; ++k) {
      const auto out = reconstruct_bucket(bk.segments, k, w.start_t).events;
      const std::size_t len = std::min<std::size_t>(w.events.size(), std::size_t{k} * e);
      REQUIRE(out == std::vector<Event>(w.events.begin(), w.events.begin() + static_cast<std::ptrdiff_t>(len)));
      REQUIRE(std::equal(previous.begin(), previous.end(), out.begin()));
      REQUIRE(std::is_sorted(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.t < b.t; }));
      previous = out;
    }

    // any subset of round-robin tracks still comes out time-ordered
    std::vector<TrackId> subset;
    for (TrackId t = 0; t < n; ++t) {
      if (rng() & 1) subset.push_back(t);
    }
    const auto part = reconstruct_round_robin(rr.segments, subset, n, w.start_t).events;
    REQUIRE(std::is_sorted(part.begin(), part.end(), [](const Event& a, const Event& b) { return a.t < b.t; }));
  }
}
