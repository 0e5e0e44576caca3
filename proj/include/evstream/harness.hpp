#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evstream/adaptation.hpp"
#include "evstream/event.hpp"
#include "evstream/partition.hpp"
#include "evstream/receiver.hpp"
#include "evstream/relay.hpp"
#include "evstream/sink.hpp"

namespace evs {

// Full-track data rate: E * 128 bits per window, in bits per second.
double track_rate(std::uint32_t events_per_track, Micros window_length = kDefaultWindowLength);

// Per-window source event counts for synthetic runs.
//   constant:<events>
//   surge:<base>[:<factor>[:<start_fraction>[:<length_fraction>]]]   (factor defaults to 5)
struct RateProfile {
  enum class Kind { Constant, Surge };
  Kind kind = Kind::Constant;
  std::uint64_t base = 2000;
  double factor = 5.0;
  double surge_start = 0.5;
  double surge_length = 0.25;

  static RateProfile parse(std::string_view text);
  std::string to_string() const;
  std::vector<std::uint64_t> expand(std::uint64_t window_count) const;
};

enum class RunMode { Simulated, Sockets };

struct ExperimentConfig {
  std::optional<std::filesystem::path> input;  // .evst or t,x,y,p text; otherwise synthetic
  RateProfile profile;
  double duration_s = 30.0;
  SensorGeometry geometry;
  Micros window_length = kDefaultWindowLength;
  PartitionStrategy strategy = PartitionStrategy::Bucket;
  std::uint16_t tracks = 5;
  std::uint32_t events_per_track = 250;
  double bandwidth_mbps = 100.0;
  double burst_ms = 100.0;  // bucket depth as milliseconds of traffic at the shaped rate
  double latency_target_ms = 5.0;
  std::size_t queue_capacity = kDefaultQueueCapacity;
  Micros link_delay{250};  // one-way, per hop
  Micros session_start{20'000};
  std::uint64_t stall_windows = 20;
  RunMode mode = RunMode::Simulated;
  std::uint64_t seed = 1;
  bool passive_receiver = false;  // add a second, full-subscription receiver
  bool keep_streams = false;      // retain published and reconstructed events in the result
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
  std::uint64_t burst_bits() const;
};

struct AuditEntry {
  enum class Kind { SubscribeSent, SubscribeOkReceived, UnsubscribeSent };
  Micros at{0};
  SubscriberId subscriber = 0;
  Kind kind = Kind::SubscribeSent;
  TrackId track = 0;
};

// True when the subscriber never had two SUBSCRIBEs awaiting SUBSCRIBE_OK at once.
bool single_subscribe_in_flight(std::span<const AuditEntry> audit, SubscriberId subscriber);

// One frame leaving the shaped downlink (simulated mode).
struct LinkDelivery {
  Micros at{0};
  std::uint64_t wire_bytes = 0;
};

struct ReceiverReport {
  SubscriberId subscriber = 0;
  bool adaptive = true;
  bool finished = false;
  std::vector<WindowMetrics> series;
  std::optional<RunSummary> summary;
  ReceiverCounters counters;
  SubscriberStats relay;
  std::vector<Event> reconstructed;  // only with keep_streams
  std::vector<LinkDelivery> link_log;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::uint64_t windows = 0;
  std::uint64_t source_events = 0;
  std::uint64_t published_events = 0;
  std::uint64_t publisher_dropped = 0;  // bucket cap N*E
  std::vector<Event> published;         // only with keep_streams
  ReceiverReport receiver;
  std::optional<ReceiverReport> passive;
  std::vector<AuditEntry> audit;
  bool aborted = false;
  std::string abort_reason;
};

struct SourceStream {
  SensorGeometry geometry;
  std::vector<EventWindow> windows;
  std::uint64_t event_count() const noexcept;
};

SourceStream load_source(const ExperimentConfig& config);

// Runs publisher, relay and receiver(s) end to end. Simulated mode is single-threaded on a
// virtual clock and bit-deterministic for a given config. Transport or protocol failures do not
// throw: the result is flagged aborted with whatever metrics were collected.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const SourceStream& source);

nlohmann::json summary_json(const ExperimentResult& result);
// metrics.csv, summary.json, and with keep_streams reconstructed.evst (+ passive_*).
void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir);

struct SweepRow {
  double bandwidth_mbps = 0.0;
  std::uint16_t tracks = 0;
  std::uint32_t events_per_track = 0;
  double latency_target_ms = 0.0;
  RunSummary summary;
  bool aborted = false;
};

// One row per config, ordered by (bandwidth, tracks).
std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

}  // namespace evs
