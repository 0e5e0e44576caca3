#include "evstream/wire.hpp"

#include <string>

#include "evstream/error.hpp"

namespace evs {

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> data) { out_.insert(out_.end(), data.begin(), data.end()); }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto view = in_.subspan(pos_, n);
    pos_ += n;
    return view;
  }
  bool done() const noexcept { return pos_ == in_.size(); }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail(ErrorCategory::Framing, "frame body shorter than its fields");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void encode_body(const Announce& m, Writer& w) {
  w.put<std::uint64_t>(m.session_id);
  w.put<std::uint16_t>(m.track_count);
  w.put<std::uint32_t>(m.events_per_track);
  w.put<std::uint16_t>(m.geometry.width);
  w.put<std::uint16_t>(m.geometry.height);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.window_length.count()));
  w.put<std::uint8_t>(m.strategy == PartitionStrategy::Bucket ? 0 : 1);
}
void encode_body(const Subscribe& m, Writer& w) {
  w.put<std::uint64_t>(m.session_id);
  w.put<std::uint16_t>(m.track_id);
}
void encode_body(const SubscribeOk& m, Writer& w) {
  w.put<std::uint64_t>(m.session_id);
  w.put<std::uint16_t>(m.track_id);
  w.put<std::uint64_t>(m.start_window);
}
void encode_body(const Unsubscribe& m, Writer& w) {
  w.put<std::uint64_t>(m.session_id);
  w.put<std::uint16_t>(m.track_id);
}
void encode_body(const SessionEnd& m, Writer& w) {
  w.put<std::uint64_t>(m.session_id);
  w.put<std::uint64_t>(m.window_count);
}
void encode_body(const SegmentFrame& m, Writer& w) {
  w.put<std::uint16_t>(m.track_id);
  w.put<std::uint64_t>(m.window_index);
  w.put<std::uint64_t>(m.send_time);
  w.put<std::uint64_t>(m.event_count);
  w.bytes(m.payload);
}

Message decode_body(MessageType type, Reader& r) {
  switch (type) {
    case MessageType::Announce: {
      Announce m;
      m.session_id = r.get<std::uint64_t>();
      m.track_count = r.get<std::uint16_t>();
      m.events_per_track = r.get<std::uint32_t>();
      m.geometry.width = r.get<std::uint16_t>();
      m.geometry.height = r.get<std::uint16_t>();
      m.window_length = Micros(static_cast<std::int64_t>(r.get<std::uint64_t>()));
      const auto strategy = r.get<std::uint8_t>();
      if (strategy > 1) fail(ErrorCategory::Framing, "unknown partition strategy code");
      m.strategy = strategy == 0 ? PartitionStrategy::Bucket : PartitionStrategy::RoundRobin;
      return m;
    }
    case MessageType::Subscribe: {
      Subscribe m;
      m.session_id = r.get<std::uint64_t>();
      m.track_id = r.get<std::uint16_t>();
      return m;
    }
    case MessageType::SubscribeOk: {
      SubscribeOk m;
      m.session_id = r.get<std::uint64_t>();
      m.track_id = r.get<std::uint16_t>();
      m.start_window = r.get<std::uint64_t>();
      return m;
    }
    case MessageType::Unsubscribe: {
      Unsubscribe m;
      m.session_id = r.get<std::uint64_t>();
      m.track_id = r.get<std::uint16_t>();
      return m;
    }
    case MessageType::SessionEnd: {
      SessionEnd m;
      m.session_id = r.get<std::uint64_t>();
      m.window_count = r.get<std::uint64_t>();
      return m;
    }
    case MessageType::Segment: {
      SegmentFrame m;
      m.track_id = r.get<std::uint16_t>();
      m.window_index = r.get<std::uint64_t>();
      m.send_time = r.get<std::uint64_t>();
      m.event_count = r.get<std::uint64_t>();
      if (m.event_count > r.remaining() / kEventRecordSize) {
        fail(ErrorCategory::Framing, "segment event_count exceeds frame body");
      }
      const auto payload = r.bytes(static_cast<std::size_t>(m.event_count) * kEventRecordSize);
      m.payload.assign(payload.begin(), payload.end());
      return m;
    }
  }
  fail(ErrorCategory::Framing, "unknown message type");
}

}  // namespace

MessageType message_type(const Message& message) noexcept {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Announce>) return MessageType::Announce;
        else if constexpr (std::is_same_v<T, Subscribe>) return MessageType::Subscribe;
        else if constexpr (std::is_same_v<T, SubscribeOk>) return MessageType::SubscribeOk;
        else if constexpr (std::is_same_v<T, Unsubscribe>) return MessageType::Unsubscribe;
        else if constexpr (std::is_same_v<T, SessionEnd>) return MessageType::SessionEnd;
        else return MessageType::Segment;
      },
      message);
}

void frame_encode(const Message& message, std::vector<std::uint8_t>& out) {
  const std::size_t start = out.size();
  Writer w(out);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(message_type(message)));
  w.put<std::uint32_t>(0);
  std::visit([&](const auto& m) { encode_body(m, w); }, message);
  const auto body = static_cast<std::uint32_t>(out.size() - start - kFramePrefixSize);
  for (std::size_t i = 0; i < 4; ++i) out[start + 1 + i] = static_cast<std::uint8_t>(body >> (8 * i));
}

std::vector<std::uint8_t> frame_encode(const Message& message) {
  std::vector<std::uint8_t> out;
  frame_encode(message, out);
  return out;
}

std::optional<Decoded> try_frame_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFramePrefixSize) return std::nullopt;
  const auto tag = bytes[0];
  if (tag < static_cast<std::uint8_t>(MessageType::Announce) || tag > static_cast<std::uint8_t>(MessageType::SessionEnd)) {
    fail(ErrorCategory::Framing, "unknown message tag " + std::to_string(tag));
  }
  std::uint32_t body = 0;
  for (std::size_t i = 0; i < 4; ++i) body |= static_cast<std::uint32_t>(bytes[1 + i]) << (8 * i);
  if (body > kMaxBodySize) fail(ErrorCategory::Framing, "frame body of " + std::to_string(body) + " bytes too large");
  if (bytes.size() < kFramePrefixSize + body) return std::nullopt;

  Reader r(bytes.subspan(kFramePrefixSize, body));
  Message message = decode_body(static_cast<MessageType>(tag), r);
  if (!r.done()) fail(ErrorCategory::Framing, "frame body longer than its fields");
  return Decoded{std::move(message), kFramePrefixSize + body};
}

Decoded frame_decode(std::span<const std::uint8_t> bytes) {
  auto decoded = try_frame_decode(bytes);
  if (!decoded) fail(ErrorCategory::Framing, "truncated frame");
  return std::move(*decoded);
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  } else if (offset_ > (1u << 20)) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> FrameReader::next() {
  auto decoded = try_frame_decode(std::span<const std::uint8_t>(buffer_).subspan(offset_));
  if (!decoded) return std::nullopt;
  offset_ += decoded->consumed;
  return std::move(decoded->message);
}

void FrameReader::finish() const {
  if (buffered() != 0) {
    fail(ErrorCategory::Framing, "stream ended inside a frame (" + std::to_string(buffered()) + " bytes pending)");
  }
}

SegmentFrame to_frame(const TrackSegment& segment) {
  SegmentFrame frame;
  frame.track_id = segment.track_id;
  frame.window_index = segment.window_index;
  frame.send_time = static_cast<std::uint64_t>(segment.send_time.count());
  frame.event_count = segment.events.size();
  encode_events(segment.events, frame.payload);
  return frame;
}

TrackSegment to_segment(const SegmentFrame& frame) {
  if (frame.payload.size() != static_cast<std::size_t>(frame.event_count) * kEventRecordSize) {
    fail(ErrorCategory::Framing, "segment payload length does not match event_count");
  }
  TrackSegment segment;
  segment.track_id = frame.track_id;
  segment.window_index = frame.window_index;
  segment.send_time = Micros(static_cast<std::int64_t>(frame.send_time));
  segment.events = decode_events(frame.payload);
  return segment;
}

}  // namespace evs
