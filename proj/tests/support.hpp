#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "evstream/event.hpp"

namespace evs::testing {

inline std::vector<Event> random_sorted_events(std::mt19937_64& rng, std::size_t n, std::uint64_t t0 = 0,
                                               std::uint64_t span = 50'000, SensorGeometry g = {}) {
  std::uniform_int_distribution<std::uint64_t> t(t0, t0 + span - 1);
  std::uniform_int_distribution<int> x(0, g.width - 1), y(0, g.height - 1), p(0, 1);
  std::vector<Event> out(n);
  for (Event& e : out) {
    e.t = t(rng);
    e.x = static_cast<std::uint16_t>(x(rng));
    e.y = static_cast<std::uint16_t>(y(rng));
    e.p = static_cast<std::uint8_t>(p(rng));
  }
  std::stable_sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
  return out;
}

inline EventWindow random_window(std::mt19937_64& rng, std::size_t n, std::uint64_t index = 0) {
  EventWindow w;
  w.index = index;
  w.start_t = index * 50'000;
  w.events = random_sorted_events(rng, n, w.start_t);
  return w;
}

// Events tagged by position so reorderings are visible: t = start + i, x = i.
inline EventWindow numbered_window(std::size_t n) {
  EventWindow w;
  for (std::size_t i = 0; i < n; ++i) {
    w.events.push_back(Event{i, static_cast<std::uint16_t>(i % 1280), static_cast<std::uint16_t>(i / 1280 % 720),
                             static_cast<std::uint8_t>(i & 1)});
  }
  return w;
}

}  // namespace evs::testing
