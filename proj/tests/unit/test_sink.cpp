#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evstream/error.hpp"
#include "evstream/sink.hpp"
#include "support.hpp"

using namespace evs;

TEST_CASE("tensor from an empty window is all zeros") {
  const EventTensor t = build_tensor(EventWindow{}, SensorGeometry{8, 4});
  CHECK(t.cells.size() == 20 * 4 * 8);
  CHECK(t.total() == 0);
}

TEST_CASE("single event lands in the expected cell") {
  EventWindow w{3, 150'000, {Event{150'000 + 12'000, 3, 1, 1}}};
  const EventTensor t = build_tensor(w, SensorGeometry{8, 4});
  CHECK(t.at(1 * 10 + 2, 1, 3) == 1);
  CHECK(t.total() == 1);
  CHECK(t.window_index == 3);
}

TEST_CASE("tensor total matches event count") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    const EventWindow w = testing::random_window(rng, rng() % 5'000, i);
    CHECK(build_tensor(w, SensorGeometry{}).total() == w.events.size());
  }
}

TEST_CASE("out-of-range events are rejected") {
  EventWindow w{0, 0, {Event{10, 9, 0, 0}}};
  try {
    build_tensor(w, SensorGeometry{8, 4});
    FAIL("expected Data");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::Data);
  }
  EventWindow late{0, 0, {Event{50'000, 0, 0, 0}}};
  CHECK_THROWS_AS(build_tensor(late, SensorGeometry{8, 4}), Error);
}

TEST_CASE("write_tensor") {
  const auto stem = std::filesystem::temp_directory_path() / "evstream_tensor_test";
  EventWindow w{0, 0, {Event{0, 1, 1, 0}, Event{49'999, 1, 1, 1}}};
  write_tensor(build_tensor(w, SensorGeometry{2, 2}), stem);
  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), {});
  CHECK(bytes.size() == 20 * 2 * 2 * 4);
  const auto meta = nlohmann::json::parse(std::ifstream(stem.string() + ".json"));
  CHECK(meta["shape"] == nlohmann::json::array({20, 2, 2}));
  std::filesystem::remove(stem.string() + ".bin");
  std::filesystem::remove(stem.string() + ".json");
}

namespace {

WindowMetrics metric(std::uint64_t index, std::int64_t latency_us, std::uint64_t events = 0) {
  WindowMetrics m;
  m.window_index = index;
  m.latency = Micros{latency_us};
  m.received_events = events;
  m.received_bytes = events * 16;
  return m;
}

}  // namespace

TEST_CASE("summarize") {
  const std::vector<WindowMetrics> odd{metric(0, 1'000), metric(1, 3'000), metric(2, 2'000)};
  const RunSummary s = summarize(odd, Micros{150'000});
  CHECK(s.max_latency_ms == 3.0);
  CHECK(s.median_latency_ms == 2.0);
  CHECK(s.mean_latency_ms == 2.0);
  CHECK_FALSE(s.mean_loss.has_value());

  const std::vector<WindowMetrics> even{metric(0, 1'000), metric(1, 2'000), metric(2, 3'000), metric(3, 10'000)};
  CHECK(summarize(even, Micros{200'000}).median_latency_ms == 2.5);

  try {
    summarize({}, Micros{1});
    FAIL("expected NoData");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::NoData);
  }
}

TEST_CASE("summary loss and throughput") {
  std::vector<WindowMetrics> series{metric(0, 0, 300), metric(1, 0, 100)};
  series[0].source_events = 400;
  series[1].source_events = 400;
  const RunSummary s = summarize(series, Micros{100'000}, 800);
  CHECK(*s.mean_loss == doctest::Approx(0.5));
  CHECK(*s.mean_window_loss == doctest::Approx((0.25 + 0.75) / 2));
  CHECK(s.received_bytes == 6'400);
  CHECK(s.mean_throughput_mbps == doctest::Approx(6'400 * 8 / 0.1 / 1e6));
}

TEST_CASE("metrics csv round trip") {
  std::vector<WindowMetrics> series{metric(0, 1'500, 10), metric(1, 2'500, 20)};
  series[0].subscribed_tracks = 2;
  series[0].chunk_size = 512.25;
  series[1].subscribed_tracks = 3;
  series[1].chunk_size = 614.7;
  std::stringstream buf;
  write_metrics_csv(buf, series);
  CHECK(buf.str().rfind("window_index,latency_us,received_events,received_bytes,subscribed_tracks,chunk_size\n", 0) == 0);
  const auto back = read_metrics_csv(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[1].latency == Micros{2'500});
  CHECK(back[0].subscribed_tracks == 2);
  CHECK(back[1].chunk_size == doctest::Approx(614.7));

  std::istringstream bad("window_index,latency_us\nx,y\n");
  CHECK_THROWS_AS(read_metrics_csv(bad), Error);
}
