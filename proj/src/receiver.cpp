#include "evstream/receiver.hpp"

#include <algorithm>
#include <string>

#include "evstream/error.hpp"

namespace evs {

Receiver::Receiver(const Announce& announcement, ReceiverOptions options)
    : announce_(announcement), options_(options), tracks_(announcement.track_count) {
  if (announcement.track_count == 0) fail(ErrorCategory::Protocol, "ANNOUNCE with zero tracks");
}

std::uint16_t Receiver::active_tracks() const noexcept {
  return static_cast<std::uint16_t>(
      std::count_if(tracks_.begin(), tracks_.end(), [](const TrackStatus& s) { return s.active; }));
}

bool Receiver::finished() const noexcept { return end_window_ && head_ >= *end_window_; }

bool Receiver::required(TrackId track, std::uint64_t window) const {
  return tracks_[track].active && tracks_[track].start_window <= window;
}

std::vector<ControlMessage> Receiver::start() {
  std::vector<ControlMessage> out;
  const TrackId last = options_.adaptive ? 1 : announce_.track_count;
  for (TrackId t = 0; t < last; ++t) {
    tracks_[t].requested = true;
    out.push_back(Subscribe{announce_.session_id, t});
  }
  return out;
}

std::vector<ControlMessage> Receiver::handle_subscribe_ok(const SubscribeOk& ok, Micros now) {
  if (ok.track_id >= tracks_.size()) {
    fail(ErrorCategory::Protocol, "SUBSCRIBE_OK for unknown track " + std::to_string(ok.track_id));
  }
  bool activate = false;
  if (!options_.adaptive) {
    activate = tracks_[ok.track_id].requested;
  } else if (!adaptation_) {
    if (ok.track_id != 0) fail(ErrorCategory::Protocol, "first SUBSCRIBE_OK must be for track 0");
    adaptation_ = AdaptationState::initial(announce_.track_count, announce_.events_per_track, options_.target_latency);
    activate = true;
  } else {
    const std::uint16_t before = adaptation_->subscribed;
    on_subscribe_ok(*adaptation_, ok.track_id);
    activate = adaptation_->subscribed > before;
  }

  if (activate) {
    TrackStatus& status = tracks_[ok.track_id];
    status.active = true;
    status.requested = false;
    status.start_window = ok.start_window;
    status.watermark = std::max(status.watermark, ok.start_window);
  }
  return try_complete(now, false);
}

std::vector<ControlMessage> Receiver::handle_segment(TrackSegment segment, Micros now) {
  if (segment.track_id >= tracks_.size()) {
    fail(ErrorCategory::Protocol, "segment for unknown track " + std::to_string(segment.track_id));
  }
  TrackStatus& status = tracks_[segment.track_id];
  if (!status.active || segment.window_index < status.start_window || segment.window_index < head_ ||
      (end_window_ && segment.window_index >= *end_window_)) {
    counters_.discarded_events += segment.events.size();
    return {};
  }
  status.watermark = std::max(status.watermark, segment.window_index + 1);
  auto& slot = pending_[segment.window_index];
  if (auto it = slot.find(segment.track_id); it != slot.end()) {
    counters_.discarded_events += it->second.events.size();
  }
  slot.insert_or_assign(segment.track_id, std::move(segment));
  return try_complete(now, false);
}

std::vector<ControlMessage> Receiver::handle_end(const SessionEnd& end, Micros now) {
  end_window_ = end.window_count;
  for (auto it = pending_.lower_bound(end.window_count); it != pending_.end();) {
    for (const auto& [t, s] : it->second) counters_.discarded_events += s.events.size();
    it = pending_.erase(it);
  }
  return try_complete(now, true);
}

std::vector<ControlMessage> Receiver::try_complete(Micros now, bool force) {
  std::vector<ControlMessage> out;
  while (!(end_window_ && head_ >= *end_window_)) {
    if (force && end_window_) {
      // The end marker trails every segment on the link, so nothing else is coming.
      complete_head(now, out);
      continue;
    }

    const auto slot = pending_.find(head_);
    bool any_required = false;
    bool ready = true;
    std::optional<TrackId> first_missing;
    std::uint64_t frontier = 0;
    for (TrackId t = 0; t < tracks_.size(); ++t) {
      if (tracks_[t].active) frontier = std::max(frontier, tracks_[t].watermark);
      if (!required(t, head_)) continue;
      any_required = true;
      const bool present = slot != pending_.end() && slot->second.contains(t);
      if (!present && tracks_[t].watermark <= head_) {
        ready = false;
        if (!first_missing) first_missing = t;
      }
    }
    if (!any_required) {
      // Windows published before the first subscription took effect will never arrive.
      const bool later = std::any_of(tracks_.begin(), tracks_.end(),
                                     [&](const TrackStatus& st) { return st.active && st.start_window > head_; });
      if (!later) break;
      complete_head(now, out);
      continue;
    }

    if (!ready) {
      if (frontier <= head_ + options_.stall_windows) break;
      ++counters_.stalls;
      if (adaptation_ && *first_missing >= 1) {
        // Keep the subscription a prefix: drop the stalled track and everything above it.
        apply(subscription_actions(*adaptation_, *first_missing), out);
        adaptation_->chunk_size =
            std::clamp(std::min(adaptation_->chunk_size, static_cast<double>(*first_missing) * announce_.events_per_track),
                       adaptation_->min_chunk(), adaptation_->max_chunk());
      }
    }
    complete_head(now, out);
  }
  return out;
}

void Receiver::complete_head(Micros now, std::vector<ControlMessage>& out) {
  std::vector<TrackSegment> segments;
  std::uint16_t required_count = 0;
  auto slot = pending_.find(head_);
  for (TrackId t = 0; t < tracks_.size(); ++t) {
    if (!required(t, head_)) continue;
    ++required_count;
    if (slot != pending_.end()) {
      if (auto it = slot->second.find(t); it != slot->second.end()) {
        segments.push_back(std::move(it->second));
        slot->second.erase(it);
        continue;
      }
    }
    ++counters_.lost_segments;
  }
  if (slot != pending_.end()) {
    for (const auto& [t, s] : slot->second) counters_.discarded_events += s.events.size();
    pending_.erase(slot);
  }

  const std::uint64_t start_t = head_ * static_cast<std::uint64_t>(announce_.window_length.count());
  EventWindow window;
  if (announce_.strategy == PartitionStrategy::RoundRobin) {
    std::vector<TrackId> ids;
    for (const auto& s : segments) ids.push_back(s.track_id);
    window = reconstruct_round_robin(segments, ids, announce_.track_count, start_t);
  } else {
    bool prefix = true;
    for (std::size_t i = 0; i < segments.size(); ++i) prefix = prefix && segments[i].track_id == i;
    if (prefix) {
      window = reconstruct_bucket(segments, static_cast<std::uint16_t>(segments.size()), start_t);
    } else {
      window.start_t = start_t;
      for (const auto& s : segments) window.events.insert(window.events.end(), s.events.begin(), s.events.end());
    }
  }
  window.index = head_;

  std::optional<Micros> fallback;
  if (last_send_time_) {
    fallback = *last_send_time_ + announce_.window_length * static_cast<std::int64_t>(head_ - last_send_window_);
  }
  WindowMetrics metrics = measure_latency(segments, now, fallback);
  metrics.window_index = head_;
  metrics.subscribed_tracks = required_count;
  if (!segments.empty()) {
    last_send_time_ = metrics.first_send_time;
    last_send_window_ = head_;
  }

  if (adaptation_ && required_count > 0) {
    apply(adaptation_tick(*adaptation_, metrics.latency), out);
  }
  if (adaptation_) metrics.chunk_size = adaptation_->chunk_size;

  ++counters_.windows;
  counters_.received_events += metrics.received_events;
  if (sink_) sink_(window, metrics);
  metrics_.push_back(metrics);
  ++head_;
}

void Receiver::apply(const std::vector<SubscriptionAction>& actions, std::vector<ControlMessage>& out) {
  for (const SubscriptionAction& action : actions) {
    if (action.kind == SubscriptionAction::Kind::Subscribe) {
      tracks_[action.track].requested = true;
      out.push_back(Subscribe{announce_.session_id, action.track});
    } else {
      deactivate(action.track);
      out.push_back(Unsubscribe{announce_.session_id, action.track});
    }
  }
}

void Receiver::deactivate(TrackId track) {
  tracks_[track].active = false;
  tracks_[track].requested = false;
  for (auto& [window, slot] : pending_) {
    if (auto it = slot.find(track); it != slot.end()) {
      counters_.discarded_events += it->second.events.size();
      slot.erase(it);
    }
  }
}

}  // namespace evs
