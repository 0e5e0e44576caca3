#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "evstream/event.hpp"
#include "evstream/partition.hpp"

namespace evs {

inline constexpr double kChunkDecrease = 0.8;
inline constexpr double kChunkIncrease = 1.2;

// Receiver-side controller state. Subscriptions are always the prefix {0..subscribed-1}.
struct AdaptationState {
  double chunk_size = 0.0;  // events per window, kept real so repeated steps compose exactly
  Micros target_latency{0};
  std::uint32_t events_per_track = 0;
  std::uint16_t track_count = 0;
  std::uint16_t subscribed = 1;
  bool pending_subscribe = false;
  TrackId pending_track = 0;
  // The pending subscription was overtaken by an unsubscribe; its OK must not grow the set.
  bool pending_cancelled = false;

  // Starts at one track with chunk_size = E.
  static AdaptationState initial(std::uint16_t track_count, std::uint32_t events_per_track, Micros target_latency);

  double min_chunk() const noexcept { return events_per_track; }
  double max_chunk() const noexcept { return static_cast<double>(track_count) * events_per_track; }
  // Checks the clamp, prefix and pending invariants.
  bool valid() const noexcept;
};

// Above target: x0.8, below: x1.2, equal: unchanged. Clamped to [E, N*E].
double adapt_chunk(const AdaptationState& state, Micros latency);

// max(1, floor(chunk / E)), capped at N.
std::uint16_t target_tracks(double chunk_size, std::uint32_t events_per_track, std::uint16_t track_count);

struct SubscriptionAction {
  enum class Kind { Subscribe, Unsubscribe };
  Kind kind;
  TrackId track;

  friend bool operator==(const SubscriptionAction&, const SubscriptionAction&) = default;
};

// Shrinking unsubscribes every surplus track at once. Growing subscribes exactly one track,
// and only when no subscribe is awaiting its OK. Mutates the state to reflect what was sent.
std::vector<SubscriptionAction> subscription_actions(AdaptationState& state, std::uint16_t target);

// Throws Protocol when no subscribe is pending or the OK is for another track.
void on_subscribe_ok(AdaptationState& state, TrackId track);

// adapt_chunk + target_tracks + subscription_actions in one step.
std::vector<SubscriptionAction> adaptation_tick(AdaptationState& state, Micros latency);

struct WindowMetrics {
  std::uint64_t window_index = 0;
  Micros first_send_time{0};
  Micros reconstruct_time{0};
  Micros latency{0};
  std::uint64_t received_events = 0;
  std::uint64_t received_bytes = 0;
  std::optional<std::uint64_t> source_events;
  std::uint16_t subscribed_tracks = 0;
  double chunk_size = 0.0;

  friend bool operator==(const WindowMetrics&, const WindowMetrics&) = default;
};

// Latency runs from the send time of the lowest-numbered segment present to reconstruction.
// With no segments, fallback_send_time stands in.
WindowMetrics measure_latency(std::span<const TrackSegment> segments, Micros reconstruct_time,
                              std::optional<Micros> fallback_send_time = std::nullopt);

}  // namespace evs
