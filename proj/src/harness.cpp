#include "evstream/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evstream/error.hpp"
#include "evstream/event_io.hpp"
#include "evstream/token_bucket.hpp"

namespace evs {

double track_rate(std::uint32_t events_per_track, Micros window_length) {
  if (events_per_track == 0) fail(ErrorCategory::Parameter, "events per track must be at least 1");
  if (window_length.count() <= 0) fail(ErrorCategory::Parameter, "window length must be positive");
  return static_cast<double>(events_per_track) * static_cast<double>(kEventBits) * 1e6 /
         static_cast<double>(window_length.count());
}

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto pos = text.find(sep);
    parts.push_back(text.substr(0, pos));
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(ErrorCategory::Config, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

RateProfile RateProfile::parse(std::string_view text) {
  const auto parts = split(text, ':');
  RateProfile profile;
  if (parts[0] == "constant" && parts.size() == 2) {
    profile.kind = Kind::Constant;
    profile.base = parse_number<std::uint64_t>(parts[1], "event rate");
    return profile;
  }
  if (parts[0] == "surge" && parts.size() >= 2 && parts.size() <= 5) {
    profile.kind = Kind::Surge;
    profile.base = parse_number<std::uint64_t>(parts[1], "event rate");
    if (parts.size() > 2) profile.factor = parse_number<double>(parts[2], "surge factor");
    if (parts.size() > 3) profile.surge_start = parse_number<double>(parts[3], "surge start");
    if (parts.size() > 4) profile.surge_length = parse_number<double>(parts[4], "surge length");
    if (!(profile.factor > 0) || profile.surge_start < 0 || profile.surge_start > 1 || profile.surge_length < 0) {
      fail(ErrorCategory::Config, "surge parameters out of range: " + std::string(text));
    }
    return profile;
  }
  fail(ErrorCategory::Config, "unknown rate profile '" + std::string(text) + "'");
}

std::string RateProfile::to_string() const {
  std::ostringstream out;
  if (kind == Kind::Constant) {
    out << "constant:" << base;
  } else {
    out << "surge:" << base << ':' << factor << ':' << surge_start << ':' << surge_length;
  }
  return out.str();
}

std::vector<std::uint64_t> RateProfile::expand(std::uint64_t window_count) const {
  std::vector<std::uint64_t> counts(window_count, base);
  if (kind == Kind::Surge) {
    const auto first = static_cast<std::uint64_t>(std::floor(surge_start * static_cast<double>(window_count)));
    const auto last = std::min<std::uint64_t>(
        window_count, first + static_cast<std::uint64_t>(std::floor(surge_length * static_cast<double>(window_count))));
    const auto spike = static_cast<std::uint64_t>(std::llround(static_cast<double>(base) * factor));
    for (std::uint64_t i = first; i < last; ++i) counts[i] = spike;
  }
  return counts;
}

void ExperimentConfig::validate() const {
  PartitionConfig{strategy, tracks, events_per_track}.validate();
  if (!(bandwidth_mbps > 0.0)) fail(ErrorCategory::Config, "bandwidth must be positive");
  if (!(burst_ms > 0.0)) fail(ErrorCategory::Config, "burst must be positive");
  if (!(latency_target_ms > 0.0)) fail(ErrorCategory::Config, "latency target must be positive");
  if (!(duration_s > 0.0) && !input) fail(ErrorCategory::Config, "duration must be positive");
  if (queue_capacity == 0) fail(ErrorCategory::Config, "queue capacity must be at least 1");
  if (window_length.count() <= 0) fail(ErrorCategory::Config, "window length must be positive");
  if (link_delay.count() < 0 || session_start.count() < 0) fail(ErrorCategory::Config, "negative delay");
  if (geometry.width == 0 || geometry.height == 0) fail(ErrorCategory::Config, "geometry must be at least 1x1");
}

std::uint64_t ExperimentConfig::burst_bits() const {
  const auto burst_time = Micros{static_cast<std::int64_t>(std::llround(burst_ms * 1000.0))};
  return std::max<std::uint64_t>(1, TokenBucket::default_burst_bits(Bandwidth::mbps(bandwidth_mbps), burst_time));
}

bool single_subscribe_in_flight(std::span<const AuditEntry> audit, SubscriberId subscriber) {
  int in_flight = 0;
  for (const AuditEntry& entry : audit) {
    if (entry.subscriber != subscriber) continue;
    if (entry.kind == AuditEntry::Kind::SubscribeSent) {
      if (++in_flight > 1) return false;
    } else if (entry.kind == AuditEntry::Kind::SubscribeOkReceived) {
      in_flight = std::max(0, in_flight - 1);
    }
  }
  return true;
}

std::uint64_t SourceStream::event_count() const noexcept {
  std::uint64_t total = 0;
  for (const auto& w : windows) total += w.events.size();
  return total;
}

SourceStream load_source(const ExperimentConfig& config) {
  SourceStream source;
  if (config.input) {
    const auto ext = config.input->extension().string();
    Recording recording;
    if (ext == ".txt" || ext == ".csv") {
      recording.geometry = config.geometry;
      recording.events = read_event_text(*config.input);
      for (const Event& e : recording.events) {
        if (!recording.geometry.contains(e)) fail(ErrorCategory::Data, "text event outside configured geometry");
      }
    } else {
      recording = read_evst(*config.input);
    }
    source.geometry = recording.geometry;
    source.windows = window_split(recording.events, config.window_length);
    return source;
  }
  const auto window_count = static_cast<std::uint64_t>(
      std::llround(config.duration_s * 1e6 / static_cast<double>(config.window_length.count())));
  const auto counts = config.profile.expand(window_count);
  source.geometry = config.geometry;
  const auto events = generate_synthetic(config.geometry, counts, config.seed, config.window_length);
  source.windows = window_split(events, config.window_length, window_count);
  return source;
}

ExperimentResult run_simulation(const ExperimentConfig& config, const SourceStream& source);
ExperimentResult run_sockets(const ExperimentConfig& config, const SourceStream& source);

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  return run_experiment(config, load_source(config));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const SourceStream& source) {
  config.validate();
  ExperimentResult result =
      config.mode == RunMode::Simulated ? run_simulation(config, source) : run_sockets(config, source);
  if (config.output_dir) write_artifacts(result, *config.output_dir);
  return result;
}

namespace {

nlohmann::json report_json(const ReceiverReport& report) {
  nlohmann::json j;
  j["adaptive"] = report.adaptive;
  j["finished"] = report.finished;
  j["windows"] = report.series.size();
  if (report.summary) {
    const RunSummary& s = *report.summary;
    j["latency_ms"] = {{"max", s.max_latency_ms}, {"median", s.median_latency_ms}, {"mean", s.mean_latency_ms}};
    j["mean_throughput_mbps"] = s.mean_throughput_mbps;
    j["received_events"] = s.received_events;
    if (s.mean_loss) j["mean_loss_pct"] = *s.mean_loss * 100.0;
    if (s.mean_window_loss) j["mean_window_loss_pct"] = *s.mean_window_loss * 100.0;
  }
  j["relay_dropped_events"] = report.relay.dropped_events;
  j["relay_flushed_events"] = report.relay.flushed_events;
  j["unsubscribed_events"] = report.relay.skipped_events;
  j["receiver_discarded_events"] = report.counters.discarded_events;
  j["lost_segments"] = report.counters.lost_segments;
  j["stalls"] = report.counters.stalls;
  return j;
}

}  // namespace

nlohmann::json summary_json(const ExperimentResult& result) {
  const ExperimentConfig& c = result.config;
  nlohmann::json j;
  j["mode"] = c.mode == RunMode::Simulated ? "simulated" : "sockets";
  j["strategy"] = to_string(c.strategy);
  j["bandwidth_mbps"] = c.bandwidth_mbps;
  j["tracks"] = c.tracks;
  j["events_per_track"] = c.events_per_track;
  j["latency_target_ms"] = c.latency_target_ms;
  j["burst_ms"] = c.burst_ms;
  j["seed"] = c.seed;
  j["source"] = c.input ? c.input->string() : c.profile.to_string();
  j["windows"] = result.windows;
  j["source_events"] = result.source_events;
  j["published_events"] = result.published_events;
  j["publisher_dropped_events"] = result.publisher_dropped;
  j["aborted"] = result.aborted;
  if (result.aborted) j["abort_reason"] = result.abort_reason;
  j["receiver"] = report_json(result.receiver);
  if (result.passive) j["passive_receiver"] = report_json(*result.passive);
  return j;
}

void write_artifacts(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_metrics_csv(dir / "metrics.csv", result.receiver.series);
  {
    std::ofstream out(dir / "summary.json");
    if (!out) fail(ErrorCategory::Io, "cannot write summary.json in " + dir.string());
    out << summary_json(result).dump(2) << '\n';
  }
  if (result.passive) write_metrics_csv(dir / "passive_metrics.csv", result.passive->series);
  if (result.config.keep_streams) {
    write_evst(dir / "reconstructed.evst", Recording{result.config.geometry, result.receiver.reconstructed});
    if (result.passive) {
      write_evst(dir / "passive_reconstructed.evst", Recording{result.config.geometry, result.passive->reconstructed});
    }
  }
}

std::vector<SweepRow> sweep(const std::vector<ExperimentConfig>& configs) {
  std::vector<SweepRow> rows;
  rows.reserve(configs.size());
  for (const ExperimentConfig& config : configs) {
    const ExperimentResult result = run_experiment(config);
    SweepRow row;
    row.bandwidth_mbps = config.bandwidth_mbps;
    row.tracks = config.tracks;
    row.events_per_track = config.events_per_track;
    row.latency_target_ms = config.latency_target_ms;
    row.aborted = result.aborted;
    if (result.receiver.summary) row.summary = *result.receiver.summary;
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.bandwidth_mbps != b.bandwidth_mbps ? a.bandwidth_mbps < b.bandwidth_mbps : a.tracks < b.tracks;
  });
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "bandwidth_mbps,tracks,events_per_track,latency_target_ms,max_latency_ms,median_latency_ms,"
         "mean_latency_ms,mean_throughput_mbps,mean_loss_pct,aborted\n";
  char line[512];
  for (const SweepRow& r : rows) {
    const double loss = r.summary.mean_loss ? *r.summary.mean_loss * 100.0 : std::nan("");
    std::snprintf(line, sizeof(line), "%g,%u,%u,%g,%.1f,%.1f,%.1f,%.2f,%.1f,%d\n", r.bandwidth_mbps,
                  static_cast<unsigned>(r.tracks), r.events_per_track, r.latency_target_ms, r.summary.max_latency_ms,
                  r.summary.median_latency_ms, r.summary.mean_latency_ms, r.summary.mean_throughput_mbps, loss,
                  r.aborted ? 1 : 0);
    out << line;
  }
}

}  // namespace evs
