#include "evstream/partition.hpp"

#include <algorithm>
#include <string>

#include "evstream/error.hpp"

namespace evs {

const char* to_string(PartitionStrategy strategy) noexcept {
  return strategy == PartitionStrategy::Bucket ? "bucket" : "round_robin";
}

PartitionStrategy parse_strategy(std::string_view name) {
  if (name == "bucket") return PartitionStrategy::Bucket;
  if (name == "round_robin" || name == "round-robin" || name == "even") return PartitionStrategy::RoundRobin;
  fail(ErrorCategory::Config, "unknown partition strategy '" + std::string(name) + "'");
}

void PartitionConfig::validate() const {
  if (track_count == 0) fail(ErrorCategory::Config, "track count must be at least 1");
  if (strategy == PartitionStrategy::Bucket && events_per_track == 0) {
    fail(ErrorCategory::Config, "events per track must be at least 1");
  }
}

namespace {

std::vector<TrackSegment> empty_segments(std::uint64_t window_index, std::uint16_t track_count) {
  std::vector<TrackSegment> segments(track_count);
  for (std::uint16_t k = 0; k < track_count; ++k) {
    segments[k].track_id = k;
    segments[k].window_index = window_index;
  }
  return segments;
}

// Index segments by track id; throws if a wanted track is absent or duplicated.
std::vector<const TrackSegment*> index_segments(std::span<const TrackSegment> segments, std::size_t slots) {
  std::vector<const TrackSegment*> by_track(slots, nullptr);
  for (const TrackSegment& s : segments) {
    if (s.track_id >= slots) continue;
    if (by_track[s.track_id]) {
      fail(ErrorCategory::IncompleteWindow, "duplicate segment for track " + std::to_string(s.track_id));
    }
    by_track[s.track_id] = &s;
  }
  return by_track;
}

}  // namespace

Partitioned partition_round_robin(const EventWindow& window, std::uint16_t track_count) {
  if (track_count == 0) fail(ErrorCategory::Parameter, "track count must be at least 1");
  Partitioned out{empty_segments(window.index, track_count), 0};
  const std::size_t per_track = (window.events.size() + track_count - 1) / track_count;
  for (auto& s : out.segments) s.events.reserve(per_track);
  for (std::size_t n = 0; n < window.events.size(); ++n) {
    out.segments[n % track_count].events.push_back(window.events[n]);
  }
  return out;
}

Partitioned partition_bucket(const EventWindow& window, std::uint16_t track_count, std::uint32_t events_per_track) {
  if (track_count == 0 || events_per_track == 0) {
    fail(ErrorCategory::Parameter, "bucket partitioning needs N >= 1 and E >= 1");
  }
  Partitioned out{empty_segments(window.index, track_count), 0};
  const std::size_t total = window.events.size();
  for (std::size_t k = 0; k < track_count; ++k) {
    const std::size_t begin = std::min(total, k * events_per_track);
    const std::size_t end = std::min(total, begin + events_per_track);
    out.segments[k].events.assign(window.events.begin() + static_cast<std::ptrdiff_t>(begin),
                                  window.events.begin() + static_cast<std::ptrdiff_t>(end));
  }
  const std::size_t cap = static_cast<std::size_t>(track_count) * events_per_track;
  out.dropped = total > cap ? total - cap : 0;
  return out;
}

Partitioned partition(const EventWindow& window, const PartitionConfig& config) {
  config.validate();
  return config.strategy == PartitionStrategy::Bucket
             ? partition_bucket(window, config.track_count, config.events_per_track)
             : partition_round_robin(window, config.track_count);
}

EventWindow reconstruct_bucket(std::span<const TrackSegment> segments, std::uint16_t subscribed,
                               std::uint64_t start_t) {
  const auto by_track = index_segments(segments, subscribed);
  std::size_t total = 0;
  std::uint64_t window_index = 0;
  for (std::uint16_t k = 0; k < subscribed; ++k) {
    if (!by_track[k]) fail(ErrorCategory::IncompleteWindow, "missing segment for track " + std::to_string(k));
    if (k > 0 && by_track[k]->window_index != window_index) {
      fail(ErrorCategory::IncompleteWindow, "segments belong to different windows");
    }
    window_index = by_track[k]->window_index;
    total += by_track[k]->events.size();
  }

  EventWindow out{window_index, start_t, {}};
  out.events.reserve(total);
  for (std::uint16_t k = 0; k < subscribed; ++k) {
    out.events.insert(out.events.end(), by_track[k]->events.begin(), by_track[k]->events.end());
  }
  return out;
}

EventWindow reconstruct_round_robin(std::span<const TrackSegment> segments, std::span<const TrackId> subscribed,
                                    std::uint16_t track_count, std::uint64_t start_t) {
  if (track_count == 0) fail(ErrorCategory::Parameter, "track count must be at least 1");
  const auto by_track = index_segments(segments, track_count);

  std::vector<TrackId> tracks(subscribed.begin(), subscribed.end());
  std::sort(tracks.begin(), tracks.end());
  tracks.erase(std::unique(tracks.begin(), tracks.end()), tracks.end());

  std::size_t total = 0;
  std::size_t rounds = 0;
  for (TrackId t : tracks) {
    if (t >= track_count || !by_track[t]) {
      fail(ErrorCategory::IncompleteWindow, "missing segment for track " + std::to_string(t));
    }
    total += by_track[t]->events.size();
    rounds = std::max(rounds, by_track[t]->events.size());
  }

  EventWindow out{tracks.empty() ? 0 : by_track[tracks.front()]->window_index, start_t, {}};
  out.events.reserve(total);
  // Source position of (track t, index i) is i * N + t, so visiting rounds in order and
  // tracks ascending within a round yields ascending source positions.
  for (std::size_t i = 0; i < rounds; ++i) {
    for (TrackId t : tracks) {
      const auto& events = by_track[t]->events;
      if (i < events.size()) out.events.push_back(events[i]);
    }
  }
  return out;
}

}  // namespace evs
