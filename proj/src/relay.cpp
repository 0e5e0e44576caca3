#include "evstream/relay.hpp"

#include <string>

#include <spdlog/spdlog.h>

#include "evstream/error.hpp"

namespace evs {

RelayFrame make_relay_frame(TrackSegment segment) {
  RelayFrame frame;
  frame.track_id = segment.track_id;
  frame.window_index = segment.window_index;
  frame.event_count = segment.events.size();
  frame.wire_bytes = segment_frame_size(segment.events.size());
  frame.segment = std::make_shared<const TrackSegment>(std::move(segment));
  return frame;
}

RelayFrame make_relay_frame(const SegmentFrame& segment) {
  RelayFrame frame;
  frame.track_id = segment.track_id;
  frame.window_index = segment.window_index;
  frame.event_count = segment.event_count;
  frame.wire_bytes = segment_frame_size(segment.event_count);
  frame.encoded = std::make_shared<const std::vector<std::uint8_t>>(frame_encode(segment));
  return frame;
}

RelayState::RelayState(std::size_t queue_capacity) : queue_capacity_(queue_capacity) {
  if (queue_capacity == 0) fail(ErrorCategory::Config, "relay queue capacity must be at least 1");
}

void RelayState::announce(const Announce& announcement) {
  if (announcement.track_count == 0) fail(ErrorCategory::Protocol, "ANNOUNCE with zero tracks");
  announcement_ = announcement;
  next_window_ = 0;
  for (auto& [id, sub] : subscribers_) sub.tracks.assign(announcement.track_count, TrackQueue{});
}

SubscriberId RelayState::add_subscriber() {
  const SubscriberId id = next_id_++;
  Subscriber& sub = subscribers_[id];
  if (announcement_) sub.tracks.resize(announcement_->track_count);
  return id;
}

void RelayState::remove_subscriber(SubscriberId id) { subscribers_.erase(id); }

RelayState::Subscriber& RelayState::subscriber(SubscriberId id) {
  auto it = subscribers_.find(id);
  if (it == subscribers_.end()) fail(ErrorCategory::Protocol, "unknown subscriber " + std::to_string(id));
  return it->second;
}

const RelayState::Subscriber& RelayState::subscriber(SubscriberId id) const {
  auto it = subscribers_.find(id);
  if (it == subscribers_.end()) fail(ErrorCategory::Protocol, "unknown subscriber " + std::to_string(id));
  return it->second;
}

void RelayState::check_track(TrackId track) const {
  if (!announcement_) fail(ErrorCategory::Protocol, "no session announced");
  if (track >= announcement_->track_count) {
    fail(ErrorCategory::Protocol, "track " + std::to_string(track) + " not announced (session has " +
                                      std::to_string(announcement_->track_count) + " tracks)");
  }
}

SubscribeResult RelayState::subscribe(SubscriberId id, TrackId track) {
  check_track(track);
  Subscriber& sub = subscriber(id);
  TrackQueue& queue = sub.tracks[track];
  SubscribeResult result;
  result.ok.session_id = announcement_->session_id;
  result.ok.track_id = track;
  if (queue.subscribed) {
    ++sub.stats.duplicate_subscribes;
    spdlog::warn("duplicate SUBSCRIBE for track {} from subscriber {} ignored", track, id);
    result.duplicate = true;
    result.ok.start_window = queue.start_window;
    return result;
  }
  queue.subscribed = true;
  queue.start_window = next_window_;
  result.ok.start_window = queue.start_window;
  return result;
}

void RelayState::unsubscribe(SubscriberId id, TrackId track) {
  check_track(track);
  Subscriber& sub = subscriber(id);
  TrackQueue& queue = sub.tracks[track];
  for (const Entry& e : queue.entries) {
    sub.stats.flushed_events += std::get<RelayFrame>(e.item).event_count;
  }
  queue.entries.clear();
  queue.subscribed = false;
}

ForwardResult RelayState::forward(const RelayFrame& frame) {
  check_track(frame.track_id);
  if (frame.window_index + 1 > next_window_) next_window_ = frame.window_index + 1;

  ForwardResult result;
  for (auto& [id, sub] : subscribers_) {
    TrackQueue& queue = sub.tracks[frame.track_id];
    if (!queue.subscribed || frame.window_index < queue.start_window) {
      sub.stats.skipped_events += frame.event_count;
      continue;
    }
    if (queue.entries.size() >= queue_capacity_) {
      ++sub.stats.dropped_frames;
      sub.stats.dropped_events += frame.event_count;
      ++result.drops;
      continue;
    }
    queue.entries.push_back({next_seq_++, frame});
    ++sub.stats.forwarded_frames;
    sub.stats.forwarded_events += frame.event_count;
    ++result.deliveries;
  }
  return result;
}

void RelayState::end_session(const SessionEnd& end) {
  for (auto& [id, sub] : subscribers_) sub.control.push_back({next_seq_++, end});
}

std::optional<RelayItem> RelayState::pop(SubscriberId id) {
  Subscriber& sub = subscriber(id);
  std::deque<Entry>* best = sub.control.empty() ? nullptr : &sub.control;
  for (TrackQueue& queue : sub.tracks) {
    if (!queue.entries.empty() && (!best || queue.entries.front().seq < best->front().seq)) best = &queue.entries;
  }
  if (!best) return std::nullopt;
  RelayItem item = std::move(best->front().item);
  best->pop_front();
  return item;
}

bool RelayState::has_pending(SubscriberId id) const {
  const Subscriber& sub = subscriber(id);
  if (!sub.control.empty()) return true;
  for (const TrackQueue& queue : sub.tracks) {
    if (!queue.entries.empty()) return true;
  }
  return false;
}

std::size_t RelayState::queued(SubscriberId id, TrackId track) const {
  const Subscriber& sub = subscriber(id);
  return track < sub.tracks.size() ? sub.tracks[track].entries.size() : 0;
}

bool RelayState::is_subscribed(SubscriberId id, TrackId track) const {
  const Subscriber& sub = subscriber(id);
  return track < sub.tracks.size() && sub.tracks[track].subscribed;
}

const SubscriberStats& RelayState::stats(SubscriberId id) const { return subscriber(id).stats; }

}  // namespace evs
