#include "evstream/adaptation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evstream/error.hpp"

namespace evs {

AdaptationState AdaptationState::initial(std::uint16_t track_count, std::uint32_t events_per_track,
                                         Micros target_latency) {
  if (track_count == 0 || events_per_track == 0) {
    fail(ErrorCategory::Config, "adaptation needs at least one track and one event per track");
  }
  AdaptationState state;
  state.chunk_size = events_per_track;
  state.target_latency = target_latency;
  state.events_per_track = events_per_track;
  state.track_count = track_count;
  state.subscribed = 1;
  return state;
}

bool AdaptationState::valid() const noexcept {
  if (chunk_size < min_chunk() || chunk_size > max_chunk()) return false;
  if (subscribed < 1 || subscribed > track_count) return false;
  if (pending_subscribe) {
    if (pending_track >= track_count) return false;
    if (!pending_cancelled && pending_track != subscribed) return false;
  }
  return true;
}

double adapt_chunk(const AdaptationState& state, Micros latency) {
  double chunk = state.chunk_size;
  if (latency > state.target_latency) {
    chunk *= kChunkDecrease;
  } else if (latency < state.target_latency) {
    chunk *= kChunkIncrease;
  }
  return std::clamp(chunk, state.min_chunk(), state.max_chunk());
}

std::uint16_t target_tracks(double chunk_size, std::uint32_t events_per_track, std::uint16_t track_count) {
  if (events_per_track == 0) fail(ErrorCategory::Parameter, "events per track must be positive");
  const double tracks = std::floor(chunk_size / events_per_track);
  if (!(tracks >= 1.0)) return 1;
  return static_cast<std::uint16_t>(std::min<double>(tracks, track_count));
}

std::vector<SubscriptionAction> subscription_actions(AdaptationState& state, std::uint16_t target) {
  target = std::clamp<std::uint16_t>(target, 1, state.track_count);
  std::vector<SubscriptionAction> actions;
  if (target < state.subscribed) {
    for (std::uint16_t t = target; t < state.subscribed; ++t) {
      actions.push_back({SubscriptionAction::Kind::Unsubscribe, t});
    }
    if (state.pending_subscribe && !state.pending_cancelled) {
      actions.push_back({SubscriptionAction::Kind::Unsubscribe, state.pending_track});
      state.pending_cancelled = true;
    }
    state.subscribed = target;
  } else if (target > state.subscribed && !state.pending_subscribe) {
    actions.push_back({SubscriptionAction::Kind::Subscribe, state.subscribed});
    state.pending_subscribe = true;
    state.pending_cancelled = false;
    state.pending_track = state.subscribed;
  }
  return actions;
}

void on_subscribe_ok(AdaptationState& state, TrackId track) {
  if (!state.pending_subscribe) {
    fail(ErrorCategory::Protocol, "SUBSCRIBE_OK for track " + std::to_string(track) + " with no subscribe pending");
  }
  if (track != state.pending_track) {
    fail(ErrorCategory::Protocol, "SUBSCRIBE_OK for track " + std::to_string(track) + " while pending on track " +
                                      std::to_string(state.pending_track));
  }
  state.pending_subscribe = false;
  if (state.pending_cancelled) {
    state.pending_cancelled = false;
    return;
  }
  state.subscribed = static_cast<std::uint16_t>(track + 1);
}

std::vector<SubscriptionAction> adaptation_tick(AdaptationState& state, Micros latency) {
  state.chunk_size = adapt_chunk(state, latency);
  return subscription_actions(state, target_tracks(state.chunk_size, state.events_per_track, state.track_count));
}

WindowMetrics measure_latency(std::span<const TrackSegment> segments, Micros reconstruct_time,
                              std::optional<Micros> fallback_send_time) {
  WindowMetrics metrics;
  metrics.reconstruct_time = reconstruct_time;
  const TrackSegment* first = nullptr;
  for (const TrackSegment& s : segments) {
    if (!first || s.track_id < first->track_id) first = &s;
    metrics.received_events += s.events.size();
  }
  metrics.received_bytes = metrics.received_events * kEventRecordSize;
  if (first) {
    metrics.window_index = first->window_index;
    metrics.first_send_time = first->send_time;
  } else {
    metrics.first_send_time = fallback_send_time.value_or(reconstruct_time);
  }
  metrics.latency = std::max(Micros{0}, reconstruct_time - metrics.first_send_time);
  return metrics;
}

}  // namespace evs
