#include "evstream/event.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "evstream/error.hpp"

namespace evs {

namespace {

template <typename T>
void put_le(std::uint8_t* out, T value) noexcept {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
}

template <typename T>
T get_le(const std::uint8_t* in) noexcept {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<T>(in[i]) << (8 * i));
  }
  return value;
}

}  // namespace

void encode_event_into(const Event& e, std::span<std::uint8_t, kEventRecordSize> out) noexcept {
  put_le<std::uint64_t>(out.data(), e.t);
  put_le<std::uint16_t>(out.data() + 8, e.x);
  put_le<std::uint16_t>(out.data() + 10, e.y);
  out[12] = e.p;
  out[13] = out[14] = out[15] = 0;
}

EventRecord encode_event(const Event& e) noexcept {
  EventRecord record{};
  encode_event_into(e, record);
  return record;
}

Event decode_event(std::span<const std::uint8_t, kEventRecordSize> record) {
  const std::uint8_t polarity = record[12];
  if (polarity > 1) {
    fail(ErrorCategory::CorruptRecord, "event record has polarity byte " + std::to_string(polarity));
  }
  return Event{get_le<std::uint64_t>(record.data()), get_le<std::uint16_t>(record.data() + 8),
               get_le<std::uint16_t>(record.data() + 10), polarity};
}

void encode_events(std::span<const Event> events, std::vector<std::uint8_t>& out) {
  const std::size_t offset = out.size();
  out.resize(offset + events.size() * kEventRecordSize);
  std::uint8_t* cursor = out.data() + offset;
  for (const Event& e : events) {
    encode_event_into(e, std::span<std::uint8_t, kEventRecordSize>(cursor, kEventRecordSize));
    cursor += kEventRecordSize;
  }
}

std::vector<Event> decode_events(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % kEventRecordSize != 0) {
    fail(ErrorCategory::CorruptRecord,
         "payload of " + std::to_string(bytes.size()) + " bytes is not a whole number of records");
  }
  std::vector<Event> events;
  events.reserve(bytes.size() / kEventRecordSize);
  for (std::size_t off = 0; off < bytes.size(); off += kEventRecordSize) {
    events.push_back(decode_event(bytes.subspan(off).first<kEventRecordSize>()));
  }
  return events;
}

std::vector<EventWindow> window_split(std::span<const Event> events, Micros window_length,
                                      std::uint64_t min_windows) {
  if (window_length.count() <= 0) {
    fail(ErrorCategory::Parameter, "window length must be positive");
  }
  const auto length = static_cast<std::uint64_t>(window_length.count());
  std::uint64_t window_count = min_windows;
  if (!events.empty()) {
    window_count = std::max(window_count, events.back().t / length + 1);
  }

  std::vector<EventWindow> windows(window_count);
  for (std::uint64_t i = 0; i < window_count; ++i) {
    windows[i].index = i;
    windows[i].start_t = i * length;
  }

  std::uint64_t previous = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.t < previous) {
      fail(ErrorCategory::Ordering, "event " + std::to_string(i) + " has timestamp " + std::to_string(e.t) +
                                        " earlier than its predecessor " + std::to_string(previous));
    }
    previous = e.t;
    windows[e.t / length].events.push_back(e);
  }
  return windows;
}

Micros replay_deadline(std::uint64_t window_index, Micros session_start, Micros window_length) noexcept {
  return session_start + window_length * static_cast<std::int64_t>(window_index);
}

std::vector<ScheduledWindow> replay_schedule(std::span<const EventWindow> windows, Micros session_start,
                                             Micros window_length) {
  std::vector<ScheduledWindow> schedule;
  schedule.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].index != i) {
      fail(ErrorCategory::Ordering, "replay requires consecutive windows from 0");
    }
    schedule.push_back({replay_deadline(i, session_start, window_length), &windows[i]});
  }
  return schedule;
}

std::vector<Event> generate_synthetic(SensorGeometry geometry, std::span<const std::uint64_t> rate_profile,
                                      std::uint64_t seed, Micros window_length) {
  if (geometry.width == 0 || geometry.height == 0) {
    fail(ErrorCategory::Parameter, "sensor geometry must be at least 1x1");
  }
  const auto length = static_cast<std::uint64_t>(window_length.count());
  std::uint64_t total = 0;
  for (std::uint64_t count : rate_profile) total += count;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint16_t> column(0, geometry.width - 1);
  std::uniform_int_distribution<std::uint16_t> row(0, geometry.height - 1);
  std::uniform_int_distribution<std::uint64_t> offset(0, length - 1);
  std::bernoulli_distribution polarity(0.5);

  std::vector<Event> events;
  events.reserve(total);
  std::vector<std::uint64_t> stamps;
  for (std::size_t w = 0; w < rate_profile.size(); ++w) {
    const std::uint64_t start = w * length;
    stamps.resize(rate_profile[w]);
    for (auto& stamp : stamps) stamp = start + offset(rng);
    std::sort(stamps.begin(), stamps.end());
    for (std::uint64_t stamp : stamps) {
      // Draw order is fixed (x, y, p) so output depends only on the seed.
      const std::uint16_t x = column(rng);
      const std::uint16_t y = row(rng);
      const auto p = static_cast<std::uint8_t>(polarity(rng) ? 1 : 0);
      events.push_back(Event{stamp, x, y, p});
    }
  }
  return events;
}

std::vector<Event> concat_windows(std::span<const EventWindow> windows) {
  std::size_t total = 0;
  for (const auto& w : windows) total += w.events.size();
  std::vector<Event> events;
  events.reserve(total);
  for (const auto& w : windows) events.insert(events.end(), w.events.begin(), w.events.end());
  return events;
}

}  // namespace evs
