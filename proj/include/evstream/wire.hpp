#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "evstream/event.hpp"
#include "evstream/partition.hpp"

namespace evs {

enum class MessageType : std::uint8_t {
  Announce = 1,
  Subscribe = 2,
  SubscribeOk = 3,
  Unsubscribe = 4,
  Segment = 5,
  SessionEnd = 6,
};

struct Announce {
  std::uint64_t session_id = 0;
  std::uint16_t track_count = 0;
  std::uint32_t events_per_track = 0;
  SensorGeometry geometry;
  Micros window_length = kDefaultWindowLength;
  PartitionStrategy strategy = PartitionStrategy::Bucket;

  friend bool operator==(const Announce&, const Announce&) = default;
};

struct Subscribe {
  std::uint64_t session_id = 0;
  TrackId track_id = 0;
  friend bool operator==(const Subscribe&, const Subscribe&) = default;
};

// start_window is the first window the relay will forward on this track.
struct SubscribeOk {
  std::uint64_t session_id = 0;
  TrackId track_id = 0;
  std::uint64_t start_window = 0;
  friend bool operator==(const SubscribeOk&, const SubscribeOk&) = default;
};

struct Unsubscribe {
  std::uint64_t session_id = 0;
  TrackId track_id = 0;
  friend bool operator==(const Unsubscribe&, const Unsubscribe&) = default;
};

// Publisher is done; window_count windows were published.
struct SessionEnd {
  std::uint64_t session_id = 0;
  std::uint64_t window_count = 0;
  friend bool operator==(const SessionEnd&, const SessionEnd&) = default;
};

struct SegmentFrame {
  TrackId track_id = 0;
  std::uint64_t window_index = 0;
  std::uint64_t send_time = 0;
  std::uint64_t event_count = 0;
  std::vector<std::uint8_t> payload;  // event_count * 16 bytes

  friend bool operator==(const SegmentFrame&, const SegmentFrame&) = default;
};

using ControlMessage = std::variant<Announce, Subscribe, SubscribeOk, Unsubscribe, SessionEnd>;
using Message = std::variant<Announce, Subscribe, SubscribeOk, Unsubscribe, SessionEnd, SegmentFrame>;

inline constexpr std::size_t kFramePrefixSize = 5;  // u8 tag + u32 body length
inline constexpr std::size_t kSegmentHeaderSize = 26;
inline constexpr std::uint32_t kMaxBodySize = 64u << 20;

constexpr std::size_t segment_frame_size(std::size_t event_count) noexcept {
  return kFramePrefixSize + kSegmentHeaderSize + event_count * kEventRecordSize;
}

MessageType message_type(const Message& message) noexcept;

void frame_encode(const Message& message, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> frame_encode(const Message& message);

struct Decoded {
  Message message;
  std::size_t consumed = 0;
};

// Decodes one frame from the front of bytes. Returns nullopt when more bytes are needed.
// Throws Framing on an unknown tag, an oversized or inconsistent body.
std::optional<Decoded> try_frame_decode(std::span<const std::uint8_t> bytes);

// Strict variant: throws Framing if the frame is truncated.
Decoded frame_decode(std::span<const std::uint8_t> bytes);

// Reassembles frames from an ordered byte stream delivered in arbitrary pieces.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();
  // Call at end of stream; throws Framing if a partial frame is pending.
  void finish() const;
  std::size_t buffered() const noexcept { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

SegmentFrame to_frame(const TrackSegment& segment);
TrackSegment to_segment(const SegmentFrame& frame);

}  // namespace evs
