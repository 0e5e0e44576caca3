#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "evstream/partition.hpp"
#include "evstream/wire.hpp"

namespace evs {

using SubscriberId = std::uint32_t;

inline constexpr std::size_t kDefaultQueueCapacity = 64;

// A published segment as the relay sees it. The simulator carries the decoded segment; the
// socket relay carries the already-encoded frame so fan-out does not re-encode.
struct RelayFrame {
  TrackId track_id = 0;
  std::uint64_t window_index = 0;
  std::uint64_t event_count = 0;
  std::size_t wire_bytes = 0;
  std::shared_ptr<const TrackSegment> segment;
  std::shared_ptr<const std::vector<std::uint8_t>> encoded;
};

RelayFrame make_relay_frame(TrackSegment segment);
RelayFrame make_relay_frame(const SegmentFrame& frame);

using RelayItem = std::variant<RelayFrame, SessionEnd>;

struct SubscriberStats {
  std::uint64_t forwarded_frames = 0;
  std::uint64_t forwarded_events = 0;
  std::uint64_t dropped_frames = 0;   // queue full
  std::uint64_t dropped_events = 0;
  std::uint64_t flushed_events = 0;   // still queued when the track was unsubscribed
  std::uint64_t skipped_events = 0;   // published while not subscribed (or before start_window)
  std::uint64_t duplicate_subscribes = 0;
};

struct ForwardResult {
  std::size_t deliveries = 0;
  std::size_t drops = 0;
};

struct SubscribeResult {
  SubscribeOk ok;
  bool duplicate = false;
};

// Fan-out state of one relay session. Not thread-safe; the socket server guards it with a mutex
// and the simulator drives it from a single event loop.
class RelayState {
 public:
  explicit RelayState(std::size_t queue_capacity = kDefaultQueueCapacity);

  void announce(const Announce& announcement);
  const std::optional<Announce>& announcement() const noexcept { return announcement_; }

  SubscriberId add_subscriber();
  void remove_subscriber(SubscriberId id);

  // Throws Protocol for an unknown track or an unannounced session. A repeated subscribe is
  // a no-op reported through SubscribeResult::duplicate.
  SubscribeResult subscribe(SubscriberId id, TrackId track);
  void unsubscribe(SubscriberId id, TrackId track);

  // Enqueues the frame for every subscriber of its track. Drops the new frame for a
  // subscriber whose queue on that track is full. Throws Protocol for an unknown track.
  ForwardResult forward(const RelayFrame& frame);

  // Queues an end marker behind everything already queued, for every subscriber.
  void end_session(const SessionEnd& end);

  // Next item for a subscriber, in the order the relay accepted them across tracks.
  std::optional<RelayItem> pop(SubscriberId id);
  bool has_pending(SubscriberId id) const;
  std::size_t queued(SubscriberId id, TrackId track) const;

  bool is_subscribed(SubscriberId id, TrackId track) const;
  const SubscriberStats& stats(SubscriberId id) const;
  std::uint64_t next_window() const noexcept { return next_window_; }
  std::size_t queue_capacity() const noexcept { return queue_capacity_; }

 private:
  struct Entry {
    std::uint64_t seq;
    RelayItem item;
  };
  struct TrackQueue {
    bool subscribed = false;
    std::uint64_t start_window = 0;
    std::deque<Entry> entries;
  };
  struct Subscriber {
    std::vector<TrackQueue> tracks;
    std::deque<Entry> control;
    SubscriberStats stats;
  };

  Subscriber& subscriber(SubscriberId id);
  const Subscriber& subscriber(SubscriberId id) const;
  void check_track(TrackId track) const;

  std::size_t queue_capacity_;
  std::optional<Announce> announcement_;
  std::map<SubscriberId, Subscriber> subscribers_;
  SubscriberId next_id_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t next_window_ = 0;
};

}  // namespace evs
