#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "evstream/event.hpp"

namespace evs {

inline constexpr char kEvstMagic[4] = {'E', 'V', 'S', 'T'};
inline constexpr std::uint16_t kEvstVersion = 1;
inline constexpr std::size_t kEvstHeaderSize = 18;

struct EventStreamHeader {
  std::uint16_t version = kEvstVersion;
  SensorGeometry geometry;
  std::uint64_t event_count = 0;
};

struct Recording {
  SensorGeometry geometry;
  std::vector<Event> events;
};

// .evst: "EVST", u16 version, u16 width, u16 height, u64 event_count, then packed
// 16-byte records. Everything little-endian.
void write_evst(std::ostream& out, const Recording& recording);
void write_evst(const std::filesystem::path& path, const Recording& recording);
Recording read_evst(std::istream& in);
Recording read_evst(const std::filesystem::path& path);

// Plain text, one "t,x,y,p" per line. Blank lines and lines starting with '#' are skipped.
std::vector<Event> read_event_text(std::istream& in);
std::vector<Event> read_event_text(const std::filesystem::path& path);
void write_event_text(std::ostream& out, std::span<const Event> events);

}  // namespace evs
