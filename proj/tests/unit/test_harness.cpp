#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evstream/error.hpp"
#include "evstream/harness.hpp"

using namespace evs;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.profile = RateProfile::parse("constant:2000");
  c.duration_s = 3.0;
  return c;
}

std::string csv_of(const ExperimentResult& r) {
  std::ostringstream out;
  write_metrics_csv(out, r.receiver.series);
  return out.str();
}

}  // namespace

TEST_CASE("track_rate") {
  CHECK(track_rate(250) == 640'000.0);
  CHECK(track_rate(2500) == 6'400'000.0);
  CHECK(track_rate(1) == 2'560.0);
}

TEST_CASE("rate profiles") {
  const RateProfile c = RateProfile::parse("constant:120");
  CHECK(c.expand(4) == std::vector<std::uint64_t>{120, 120, 120, 120});
  CHECK(RateProfile::parse(c.to_string()).expand(3) == c.expand(3));

  const RateProfile s = RateProfile::parse("surge:100");
  CHECK(s.factor == 5.0);
  const auto counts = s.expand(8);
  CHECK(counts == std::vector<std::uint64_t>{100, 100, 100, 100, 500, 500, 100, 100});
  CHECK(RateProfile::parse("surge:10:3:0.25:0.5").expand(4) == std::vector<std::uint64_t>{10, 30, 30, 10});

  CHECK_THROWS_AS(RateProfile::parse("ramp:5"), Error);
  CHECK_THROWS_AS(RateProfile::parse("constant:"), Error);
  CHECK_THROWS_AS(RateProfile::parse("surge:10:0"), Error);
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_config();
  c.tracks = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.bandwidth_mbps = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.latency_target_ms = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(small_config().burst_bits() == 10'000'000);
}

TEST_CASE("simulated runs are deterministic") {
  const ExperimentResult a = run_experiment(small_config());
  const ExperimentResult b = run_experiment(small_config());
  CHECK(csv_of(a) == csv_of(b));
  CHECK(summary_json(a) == summary_json(b));

  ExperimentConfig other = small_config();
  other.seed = 2;
  other.bandwidth_mbps = 1.0;
  CHECK(csv_of(run_experiment(other)) != csv_of(a));
}

TEST_CASE("event accounting balances") {
  for (double mbps : {1.0, 5.0, 100.0}) {
    ExperimentConfig c = small_config();
    c.bandwidth_mbps = mbps;
    c.queue_capacity = 4;
    const ExperimentResult r = run_experiment(c);
    REQUIRE_FALSE(r.aborted);
    CHECK(r.source_events == r.published_events + r.publisher_dropped);
    const auto& relay = r.receiver.relay;
    const std::uint64_t delivered =
        r.published_events - relay.skipped_events - relay.dropped_events - relay.flushed_events;
    CHECK(delivered - r.receiver.counters.discarded_events == r.receiver.counters.received_events);
    CHECK(r.receiver.summary->received_events == r.receiver.counters.received_events);
  }
}

TEST_CASE("publisher never sends a window early") {
  ExperimentConfig c = small_config();
  c.bandwidth_mbps = 5.0;
  const ExperimentResult r = run_experiment(c);
  for (const WindowMetrics& m : r.receiver.series) {
    if (m.received_events == 0) continue;
    CHECK(m.first_send_time >= c.session_start + c.window_length * static_cast<std::int64_t>(m.window_index));
  }
}

TEST_CASE("passive receiver gets the full published stream") {
  ExperimentConfig c = small_config();
  c.bandwidth_mbps = 5.0;
  c.passive_receiver = true;
  c.keep_streams = true;
  const ExperimentResult r = run_experiment(c);
  REQUIRE(r.passive);
  CHECK(r.passive->reconstructed == r.published);
  CHECK(r.receiver.reconstructed.size() < r.published.size());
  CHECK(single_subscribe_in_flight(r.audit, r.receiver.subscriber));
}

TEST_CASE("artifacts") {
  ExperimentConfig c = small_config();
  c.keep_streams = true;
  const auto dir = std::filesystem::temp_directory_path() / "evstream_artifacts_test";
  std::filesystem::remove_all(dir);
  c.output_dir = dir;
  run_experiment(c);
  CHECK(std::filesystem::exists(dir / "metrics.csv"));
  CHECK(std::filesystem::exists(dir / "reconstructed.evst"));
  const auto j = nlohmann::json::parse(std::ifstream(dir / "summary.json"));
  CHECK(j["windows"] == 60);
  CHECK(read_metrics_csv(dir / "metrics.csv").size() == 60);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep rows are ordered and loss falls with bandwidth") {
  std::vector<ExperimentConfig> configs;
  for (double b : {100.0, 1.0, 25.0, 5.0, 50.0}) {
    ExperimentConfig c = small_config();
    c.bandwidth_mbps = b;
    configs.push_back(c);
  }
  ExperimentConfig ten = small_config();
  ten.tracks = 10;
  ten.bandwidth_mbps = 5.0;
  configs.push_back(ten);

  const auto rows = sweep(configs);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK((rows[i - 1].bandwidth_mbps < rows[i].bandwidth_mbps ||
           (rows[i - 1].bandwidth_mbps == rows[i].bandwidth_mbps && rows[i - 1].tracks < rows[i].tracks)));
  }
  double previous = 2.0;
  for (const SweepRow& row : rows) {
    if (row.tracks != 5) continue;
    CHECK(*row.summary.mean_loss <= previous + 1e-12);
    previous = *row.summary.mean_loss;
  }

  std::ostringstream out;
  write_sweep_csv(out, rows);
  const std::string csv = out.str();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("audit check flags overlapping subscribes") {
  std::vector<AuditEntry> log{{Micros{0}, 1, AuditEntry::Kind::SubscribeSent, 1},
                              {Micros{1}, 1, AuditEntry::Kind::SubscribeSent, 2}};
  CHECK_FALSE(single_subscribe_in_flight(log, 1));
  CHECK(single_subscribe_in_flight(log, 2));
  log.insert(log.begin() + 1, AuditEntry{Micros{0}, 1, AuditEntry::Kind::SubscribeOkReceived, 1});
  CHECK(single_subscribe_in_flight(log, 1));
}
