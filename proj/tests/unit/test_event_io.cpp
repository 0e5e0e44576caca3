#include <doctest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "evstream/error.hpp"
#include "evstream/event_io.hpp"
#include "support.hpp"

using namespace evs;

TEST_CASE(".evst round trip and header") {
  std::mt19937_64 rng(3);
  Recording rec{{640, 480}, testing::random_sorted_events(rng, 300, 0, 500'000, {640, 480})};
  std::stringstream buf;
  write_evst(buf, rec);
  const std::string bytes = buf.str();
  REQUIRE(bytes.size() == kEvstHeaderSize + 300 * kEventRecordSize);
  CHECK(bytes.substr(0, 4) == "EVST");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[6]) == (640 & 0xff));
  CHECK(static_cast<unsigned char>(bytes[7]) == (640 >> 8));
  CHECK(static_cast<unsigned char>(bytes[10]) == 300 % 256);

  const Recording back = read_evst(buf);
  CHECK(back.geometry == rec.geometry);
  CHECK(back.events == rec.events);
}

TEST_CASE(".evst rejects damaged input") {
  Recording rec{{}, {{1, 2, 3, 1}, {4, 5, 6, 0}}};
  std::stringstream buf;
  write_evst(buf, rec);
  const std::string good = buf.str();

  auto read = [](const std::string& s) {
    std::istringstream in(s);
    return read_evst(in);
  };
  CHECK_THROWS_AS(read("EVSX" + good.substr(4)), Error);
  CHECK_THROWS_AS(read(good.substr(0, good.size() - 3)), Error);

  std::string bad_pol = good;
  bad_pol[kEvstHeaderSize + 12] = 5;
  try {
    read(bad_pol);
    FAIL("expected CorruptRecord");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::CorruptRecord);
  }
}

TEST_CASE("text events") {
  std::istringstream in("# t,x,y,p\n10,1,2,1\n\n20,3,4,0\n");
  const auto events = read_event_text(in);
  REQUIRE(events.size() == 2);
  CHECK(events[0] == Event{10, 1, 2, 1});
  CHECK(events[1] == Event{20, 3, 4, 0});

  std::ostringstream out;
  write_event_text(out, events);
  std::istringstream again(out.str());
  CHECK(read_event_text(again) == events);

  std::istringstream unsorted("20,0,0,0\n10,0,0,0\n");
  CHECK_THROWS_AS(read_event_text(unsorted), Error);
  std::istringstream garbage("10,abc,0,0\n");
  CHECK_THROWS_AS(read_event_text(garbage), Error);
}

TEST_CASE(".evst file path") {
  const auto path = std::filesystem::temp_directory_path() / "evstream_test_io.evst";
  Recording rec{{}, {{1, 2, 3, 1}}};
  write_evst(path, rec);
  CHECK(read_evst(path).events == rec.events);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_evst(path), Error);
}
