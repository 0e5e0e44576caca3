#include <doctest.h>

#include "evstream/error.hpp"
#include "evstream/receiver.hpp"
#include "support.hpp"

using namespace evs;

namespace {

Announce announce(std::uint16_t n = 3, std::uint32_t e = 4) {
  return Announce{7, n, e, {}, kDefaultWindowLength, PartitionStrategy::Bucket};
}

TrackSegment seg(TrackId t, std::uint64_t w, std::size_t n, Micros sent = Micros{0}) {
  TrackSegment s{t, w, sent, {}};
  for (std::size_t i = 0; i < n; ++i) s.events.push_back(Event{w * 50'000 + t * 10 + i, 0, 0, 0});
  return s;
}

template <typename T>
std::size_t count_of(const std::vector<ControlMessage>& msgs) {
  return static_cast<std::size_t>(
      std::count_if(msgs.begin(), msgs.end(), [](const ControlMessage& m) { return std::holds_alternative<T>(m); }));
}

}  // namespace

TEST_CASE("passive receiver subscribes to everything and rebuilds windows") {
  Receiver r(announce(), ReceiverOptions{false, Micros{5'000}, 20});
  const auto start = r.start();
  CHECK(count_of<Subscribe>(start) == 3);
  for (TrackId t = 0; t < 3; ++t) r.handle_subscribe_ok(SubscribeOk{7, t, 0}, Micros{0});

  std::vector<EventWindow> windows;
  r.set_sink([&](const EventWindow& w, const WindowMetrics&) { windows.push_back(w); });
  r.handle_segment(seg(1, 0, 4), Micros{100});
  r.handle_segment(seg(0, 0, 4, Micros{50}), Micros{200});
  CHECK(windows.empty());
  r.handle_segment(seg(2, 0, 2), Micros{300});
  REQUIRE(windows.size() == 1);
  CHECK(windows[0].events.size() == 10);
  CHECK(r.metrics()[0].latency == Micros{250});

  r.handle_end(SessionEnd{7, 1}, Micros{400});
  CHECK(r.finished());
}

TEST_CASE("adaptive receiver bootstraps on track 0 and grows one track at a time") {
  Receiver r(announce(), ReceiverOptions{true, Micros{5'000}, 20});
  const auto start = r.start();
  REQUIRE(start.size() == 1);
  CHECK(std::get<Subscribe>(start[0]).track_id == 0);
  CHECK_THROWS_AS(r.handle_subscribe_ok(SubscribeOk{7, 1, 0}, Micros{0}), Error);

  r.handle_subscribe_ok(SubscribeOk{7, 0, 0}, Micros{0});
  CHECK(r.active_tracks() == 1);
  // fast windows grow the chunk: 4 -> 4.8 -> 5.76 -> 6.9 -> 8.3 (2 tracks)
  std::vector<ControlMessage> out;
  std::uint64_t w = 0;
  for (; w < 4 && out.empty(); ++w) out = r.handle_segment(seg(0, w, 4, Micros{w * 50'000}), Micros{w * 50'000 + 10});
  REQUIRE(count_of<Subscribe>(out) == 1);
  CHECK(std::get<Subscribe>(out[0]).track_id == 1);
  CHECK(r.adaptation()->pending_subscribe);
}

TEST_CASE("stale and unsubscribed segments are discarded") {
  Receiver r(announce(), ReceiverOptions{false, Micros{5'000}, 20});
  r.start();
  r.handle_subscribe_ok(SubscribeOk{7, 0, 2}, Micros{0});
  r.handle_segment(seg(0, 1, 4), Micros{0});  // before start_window
  r.handle_segment(seg(2, 2, 4), Micros{0});  // track never confirmed
  CHECK(r.counters().discarded_events == 8);
  CHECK(r.counters().windows == 2);  // windows 0 and 1 can never arrive
}

TEST_CASE("a missing segment is declared lost once the track moves past it") {
  Receiver r(announce(2), ReceiverOptions{false, Micros{5'000}, 20});
  r.start();
  r.handle_subscribe_ok(SubscribeOk{7, 0, 0}, Micros{0});
  r.handle_subscribe_ok(SubscribeOk{7, 1, 0}, Micros{0});
  r.handle_segment(seg(0, 0, 4), Micros{10});
  r.handle_segment(seg(0, 1, 4), Micros{20});
  CHECK(r.counters().windows == 0);
  r.handle_segment(seg(1, 1, 4), Micros{30});  // track 1 skipped window 0
  CHECK(r.counters().windows == 2);
  CHECK(r.counters().lost_segments == 1);
  CHECK(r.metrics()[0].received_events == 4);
}

TEST_CASE("stalled tracks are unsubscribed") {
  Receiver r(announce(3, 4), ReceiverOptions{true, Micros{5'000}, 3});
  r.start();
  r.handle_subscribe_ok(SubscribeOk{7, 0, 0}, Micros{0});
  std::uint64_t w = 0;
  std::vector<ControlMessage> out;
  while (count_of<Subscribe>(out) == 0) {
    out = r.handle_segment(seg(0, w, 4, Micros{w * 50'000}), Micros{w * 50'000 + 5});
    ++w;
  }
  r.handle_subscribe_ok(SubscribeOk{7, 1, w}, Micros{w * 50'000});
  REQUIRE(r.active_tracks() == 2);
  // track 1 never delivers; track 0 keeps going
  std::size_t unsubscribed = 0;
  for (std::uint64_t k = w; k < w + 10; ++k) {
    unsubscribed += count_of<Unsubscribe>(r.handle_segment(seg(0, k, 4, Micros{k * 50'000}), Micros{k * 50'000 + 5}));
  }
  CHECK(r.counters().stalls >= 1);
  CHECK(unsubscribed >= 1);
  CHECK(r.active_tracks() == 1);
  CHECK(r.counters().windows >= w + 5);
}

TEST_CASE("session end completes whatever is left") {
  Receiver r(announce(2), ReceiverOptions{false, Micros{5'000}, 20});
  r.start();
  r.handle_subscribe_ok(SubscribeOk{7, 0, 0}, Micros{0});
  r.handle_subscribe_ok(SubscribeOk{7, 1, 0}, Micros{0});
  r.handle_segment(seg(0, 0, 4), Micros{10});
  r.handle_end(SessionEnd{7, 3}, Micros{99});
  CHECK(r.finished());
  CHECK(r.counters().windows == 3);
  CHECK(r.counters().lost_segments == 5);
}

TEST_CASE("round-robin windows come back in source order") {
  Announce a = announce(3, 100);
  a.strategy = PartitionStrategy::RoundRobin;
  Receiver r(a, ReceiverOptions{false, Micros{5'000}, 20});
  r.start();
  for (TrackId t = 0; t < 3; ++t) r.handle_subscribe_ok(SubscribeOk{7, t, 0}, Micros{0});
  const EventWindow src = testing::numbered_window(11);
  EventWindow got;
  r.set_sink([&](const EventWindow& w, const WindowMetrics&) { got = w; });
  for (TrackSegment s : partition_round_robin(src, 3).segments) r.handle_segment(std::move(s), Micros{1});
  CHECK(got.events == src.events);
}
