#include <doctest.h>

#include <numeric>
#include <random>

#include "evstream/error.hpp"
#include "evstream/reduction.hpp"
#include "support.hpp"

using namespace evs;

namespace {

// Events spread uniformly: per_bin events inside each 5 ms bin.
EventWindow binned_window(std::size_t bins, std::size_t per_bin) {
  EventWindow w;
  for (std::size_t b = 0; b < bins; ++b) {
    for (std::size_t i = 0; i < per_bin; ++i) w.events.push_back(Event{b * 5'000 + i, 0, 0, 0});
  }
  return w;
}

std::vector<std::uint64_t> per_bin(const EventWindow& w) {
  std::vector<std::uint64_t> counts(10, 0);
  for (const Event& e : w.events) ++counts[(e.t - w.start_t) / 5'000];
  return counts;
}

bool is_subsequence(const std::vector<Event>& sub, const std::vector<Event>& of) {
  std::size_t j = 0;
  for (const Event& e : of) {
    if (j < sub.size() && sub[j] == e) ++j;
  }
  return j == sub.size();
}

}  // namespace

TEST_CASE("budget_events") {
  CHECK(budget_events(1.0) == 390);
  CHECK(budget_events(100.0) == 39'062);
  CHECK(budget_events(0.00256) == 1);
  CHECK(budget_events(Bandwidth::bits_per_second(2559)) == 0);
  CHECK(budget_events(Bandwidth::bits_per_second(25'000'000)) == 9'765);
  CHECK_THROWS_AS(budget_events(0.0), Error);
  CHECK_THROWS_AS(budget_events(-1.0), Error);
  CHECK_THROWS_AS(budget_events(Bandwidth{}), Error);
  CHECK(make_budget(Bandwidth::mbps(5)).events_per_window == 1'953);
}

TEST_CASE("truncate_tail") {
  const EventWindow w = testing::numbered_window(100);
  CHECK(truncate_tail(w, 100) == w);
  CHECK(truncate_tail(w, 500) == w);
  const EventWindow cut = truncate_tail(w, 30);
  REQUIRE(cut.events.size() == 30);
  CHECK(std::equal(cut.events.begin(), cut.events.end(), w.events.begin()));
  CHECK(truncate_tail(w, 0).events.empty());
}

TEST_CASE("sample_even examples") {
  const EventWindow uniform = binned_window(10, 10);
  CHECK(sample_even(uniform, 100) == uniform);

  const EventWindow half = sample_even(uniform, 50);
  CHECK(per_bin(half) == std::vector<std::uint64_t>(10, 5));

  // remainder goes to the earliest bins
  const EventWindow r = sample_even(uniform, 53);
  CHECK(per_bin(r) == std::vector<std::uint64_t>{6, 6, 6, 5, 5, 5, 5, 5, 5, 5});
}

TEST_CASE("even_bin_allocation donates unused quota") {
  const std::vector<std::uint64_t> counts{0, 0, 20, 20, 0, 0, 0, 0, 0, 1};
  const auto kept = even_bin_allocation(counts, 30);
  CHECK(std::accumulate(kept.begin(), kept.end(), std::uint64_t{0}) == 30);
  for (std::size_t i = 0; i < counts.size(); ++i) CHECK(kept[i] <= counts[i]);

  // all quota lands in early bins when the tail is empty
  const std::vector<std::uint64_t> front{50, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(even_bin_allocation(front, 20)[0] == 20);
}

TEST_CASE("reduction properties") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> size(0, 3'000);
  std::uniform_int_distribution<std::uint64_t> budget(0, 3'000);
  for (int i = 0; i < 500; ++i) {
    const EventWindow w = testing::random_window(rng, size(rng));
    const std::uint64_t b = budget(rng);
    const std::size_t expect = std::min<std::size_t>(w.events.size(), b);

    const EventWindow tail = truncate_tail(w, b);
    REQUIRE(tail.events.size() == expect);
    REQUIRE(std::equal(tail.events.begin(), tail.events.end(), w.events.begin()));

    const EventWindow even = sample_even(w, b);
    REQUIRE(even.events.size() == expect);
    REQUIRE(is_subsequence(even.events, w.events));

    EvenSamplingOptions seeded;
    seeded.selection = BinSelection::SeededRandom;
    seeded.seed = 9;
    const EventWindow rnd = sample_even(w, b, seeded);
    REQUIRE(rnd.events.size() == expect);
    REQUIRE(is_subsequence(rnd.events, w.events));
    REQUIRE(per_bin(rnd) == per_bin(even));
  }
}

TEST_CASE("sample_even stays within one event of the bin quota on uniform input") {
  for (std::uint64_t b : {1u, 7u, 50u, 99u, 123u, 390u}) {
    const EventWindow w = binned_window(10, 400);
    const auto counts = per_bin(sample_even(w, b));
    for (std::uint64_t c : counts) {
      CHECK(c * 10 + 10 >= b);
      CHECK(c * 10 <= b + 10);
    }
  }
}

TEST_CASE("loss_rate") {
  CHECK(loss_rate(1000, 1000) == 0.0);
  CHECK(loss_rate(1000, 0) == 1.0);
  CHECK(loss_rate(1000, 351) == doctest::Approx(0.649));
  CHECK(loss_rate(0, 0) == 0.0);
  try {
    loss_rate(10, 11);
    FAIL("expected Accounting");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Accounting);
  }
}

TEST_CASE("reduce_stream loss is non-increasing in bandwidth") {
  std::mt19937_64 rng(21);
  std::vector<EventWindow> windows;
  std::uniform_int_distribution<std::size_t> n(0, 60'000);
  for (std::uint64_t i = 0; i < 60; ++i) {
    EventWindow w = testing::random_window(rng, n(rng), i);
    windows.push_back(std::move(w));
  }
  for (ReductionMode mode : {ReductionMode::Tail, ReductionMode::Even}) {
    double previous = 1.1;
    for (double mbps : {1.0, 5.0, 25.0, 50.0, 100.0}) {
      std::vector<ReductionStats> stats;
      const auto out = reduce_stream(windows, Bandwidth::mbps(mbps), mode, &stats);
      REQUIRE(out.size() == windows.size());
      std::uint64_t src = 0, kept = 0;
      for (const auto& s : stats) {
        src += s.source_events;
        kept += s.kept_events;
        CHECK(s.kept_events <= budget_events(mbps));
      }
      const double loss = loss_rate(src, kept);
      CHECK(loss <= previous);
      previous = loss;
    }
  }
}
