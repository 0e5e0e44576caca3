#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "evstream/event.hpp"

namespace evs {

using TrackId = std::uint16_t;

// One track's share of one window; the unit carried on the wire.
struct TrackSegment {
  TrackId track_id = 0;
  std::uint64_t window_index = 0;
  Micros send_time{0};
  std::vector<Event> events;

  friend bool operator==(const TrackSegment&, const TrackSegment&) = default;
};

enum class PartitionStrategy { RoundRobin, Bucket };

const char* to_string(PartitionStrategy strategy) noexcept;
PartitionStrategy parse_strategy(std::string_view name);

struct PartitionConfig {
  PartitionStrategy strategy = PartitionStrategy::Bucket;
  std::uint16_t track_count = 5;
  std::uint32_t events_per_track = 250;

  void validate() const;
};

struct Partitioned {
  std::vector<TrackSegment> segments;  // exactly track_count, ascending track_id
  std::uint64_t dropped = 0;           // publisher-side cap losses (bucket only)
};

// Event n (1-indexed) goes to track (n - 1) mod N.
Partitioned partition_round_robin(const EventWindow& window, std::uint16_t track_count);

// Track k gets source positions [kE, (k+1)E). Positions >= N*E are dropped.
Partitioned partition_bucket(const EventWindow& window, std::uint16_t track_count, std::uint32_t events_per_track);

Partitioned partition(const EventWindow& window, const PartitionConfig& config);

// Concatenates segments for tracks 0..subscribed-1 in track order. Segments may come in any
// order; each subscribed track must appear exactly once, otherwise IncompleteWindow.
EventWindow reconstruct_bucket(std::span<const TrackSegment> segments, std::uint16_t subscribed,
                               std::uint64_t start_t = 0);

// Rebuilds source order from (within-track index * N + track_id) for the given subscribed set.
EventWindow reconstruct_round_robin(std::span<const TrackSegment> segments, std::span<const TrackId> subscribed,
                                    std::uint16_t track_count, std::uint64_t start_t = 0);

}  // namespace evs
