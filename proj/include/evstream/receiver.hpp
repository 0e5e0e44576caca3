#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "evstream/adaptation.hpp"
#include "evstream/partition.hpp"
#include "evstream/wire.hpp"

namespace evs {

struct ReceiverOptions {
  // Adaptive receivers run the latency controller; passive ones subscribe to every track.
  bool adaptive = true;
  Micros target_latency{5'000};
  // A subscribed track that lags this many windows behind the others is treated as stalled.
  std::uint64_t stall_windows = 20;
};

struct ReceiverCounters {
  std::uint64_t windows = 0;
  std::uint64_t received_events = 0;
  std::uint64_t discarded_events = 0;  // arrived for an unsubscribed track or a finished window
  std::uint64_t lost_segments = 0;     // windows completed without a required segment
  std::uint64_t stalls = 0;
};

// Receiver coordinator: the single owner of window assembly and adaptation state. Transport
// handlers feed it messages; it answers with control messages to send to the relay.
class Receiver {
 public:
  using WindowSink = std::function<void(const EventWindow&, const WindowMetrics&)>;

  Receiver(const Announce& announcement, ReceiverOptions options);

  void set_sink(WindowSink sink) { sink_ = std::move(sink); }

  std::vector<ControlMessage> start();
  std::vector<ControlMessage> handle_subscribe_ok(const SubscribeOk& ok, Micros now);
  std::vector<ControlMessage> handle_segment(TrackSegment segment, Micros now);
  std::vector<ControlMessage> handle_end(const SessionEnd& end, Micros now);

  bool finished() const noexcept;
  std::uint64_t next_window() const noexcept { return head_; }
  const std::vector<WindowMetrics>& metrics() const noexcept { return metrics_; }
  const ReceiverCounters& counters() const noexcept { return counters_; }
  const std::optional<AdaptationState>& adaptation() const noexcept { return adaptation_; }
  const Announce& announcement() const noexcept { return announce_; }
  // Tracks whose segments currently count toward reconstruction.
  std::uint16_t active_tracks() const noexcept;

 private:
  struct TrackStatus {
    bool active = false;
    bool requested = false;
    std::uint64_t start_window = 0;
    std::uint64_t watermark = 0;  // one past the highest window received on this track
  };

  std::vector<ControlMessage> try_complete(Micros now, bool force);
  void complete_head(Micros now, std::vector<ControlMessage>& out);
  void apply(const std::vector<SubscriptionAction>& actions, std::vector<ControlMessage>& out);
  void deactivate(TrackId track);
  bool required(TrackId track, std::uint64_t window) const;

  Announce announce_;
  ReceiverOptions options_;
  std::vector<TrackStatus> tracks_;
  std::optional<AdaptationState> adaptation_;
  std::map<std::uint64_t, std::map<TrackId, TrackSegment>> pending_;
  std::uint64_t head_ = 0;
  std::optional<std::uint64_t> end_window_;
  std::optional<Micros> last_send_time_;
  std::uint64_t last_send_window_ = 0;
  std::vector<WindowMetrics> metrics_;
  ReceiverCounters counters_;
  WindowSink sink_;
};

}  // namespace evs
