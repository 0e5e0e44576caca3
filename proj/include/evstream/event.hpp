#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace evs {

using Micros = std::chrono::microseconds;

inline constexpr Micros kDefaultWindowLength{50'000};
inline constexpr std::size_t kEventRecordSize = 16;
inline constexpr std::uint64_t kEventBits = kEventRecordSize * 8;

// One DVS event. Polarity is 0 (darker) or 1 (brighter).
struct Event {
  std::uint64_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;

  friend bool operator==(const Event&, const Event&) = default;
};

struct SensorGeometry {
  std::uint16_t width = 1280;
  std::uint16_t height = 720;

  bool contains(const Event& e) const noexcept { return e.x < width && e.y < height; }
  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

struct EventWindow {
  std::uint64_t index = 0;
  std::uint64_t start_t = 0;
  std::vector<Event> events;

  friend bool operator==(const EventWindow&, const EventWindow&) = default;
};

using EventRecord = std::array<std::uint8_t, kEventRecordSize>;

// Little-endian layout: t (8), x (2), y (2), p (1), three reserved zero bytes.
EventRecord encode_event(const Event& e) noexcept;
void encode_event_into(const Event& e, std::span<std::uint8_t, kEventRecordSize> out) noexcept;

// Throws CorruptRecord when the polarity byte is not 0 or 1. Reserved bytes are ignored.
Event decode_event(std::span<const std::uint8_t, kEventRecordSize> record);

void encode_events(std::span<const Event> events, std::vector<std::uint8_t>& out);
std::vector<Event> decode_events(std::span<const std::uint8_t> bytes);

// Groups a time-ordered stream into consecutive windows 0..floor(max_t / length).
// Empty windows are kept, and trailing empty windows are added up to min_windows.
// Throws Ordering on a decreasing timestamp.
std::vector<EventWindow> window_split(std::span<const Event> events,
                                      Micros window_length = kDefaultWindowLength,
                                      std::uint64_t min_windows = 0);

struct ScheduledWindow {
  Micros send_deadline;
  const EventWindow* window;
};

// Deadline of window i is session_start + i * window_length.
Micros replay_deadline(std::uint64_t window_index, Micros session_start,
                       Micros window_length = kDefaultWindowLength) noexcept;

std::vector<ScheduledWindow> replay_schedule(std::span<const EventWindow> windows,
                                             Micros session_start,
                                             Micros window_length = kDefaultWindowLength);

// Deterministic for a fixed seed. rate_profile[i] events land in window i, with uniform
// coordinates and sorted uniform timestamps.
std::vector<Event> generate_synthetic(SensorGeometry geometry, std::span<const std::uint64_t> rate_profile,
                                      std::uint64_t seed, Micros window_length = kDefaultWindowLength);

// Flattens windows back into a single stream.
std::vector<Event> concat_windows(std::span<const EventWindow> windows);

}  // namespace evs
