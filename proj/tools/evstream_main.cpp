// evstream: command-line front end for the multi-track event streaming toolkit.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "evstream/error.hpp"
#include "evstream/event_io.hpp"
#include "evstream/harness.hpp"
#include "evstream/net.hpp"
#include "evstream/reduction.hpp"
#include "evstream/sink.hpp"

namespace {

using namespace evs;

volatile std::sig_atomic_t g_interrupted = 0;

void on_signal(int) { g_interrupted = 1; }

const std::map<std::string, PartitionStrategy> kStrategies{{"bucket", PartitionStrategy::Bucket},
                                                          {"round_robin", PartitionStrategy::RoundRobin},
                                                          {"round-robin", PartitionStrategy::RoundRobin}};

struct SourceFlags {
  std::string input;
  std::string profile = "constant:2000";
  double duration_s = 30.0;
  std::uint16_t width = 1280;
  std::uint16_t height = 720;
  std::uint64_t seed = 1;

  void attach(CLI::App* app) {
    app->add_option("--in", input, "Input recording (.evst, or t,x,y,p text); synthetic when absent");
    app->add_option("--profile", profile, "Synthetic profile: constant:N or surge:base[:factor[:start[:len]]]");
    app->add_option("--duration", duration_s, "Synthetic stream length in seconds")->check(CLI::PositiveNumber);
    app->add_option("--width", width, "Sensor width")->check(CLI::Range(1, 65535));
    app->add_option("--height", height, "Sensor height")->check(CLI::Range(1, 65535));
    app->add_option("--seed", seed, "Synthetic generator seed");
  }

  void apply(ExperimentConfig& config) const {
    if (!input.empty()) config.input = input;
    config.profile = RateProfile::parse(profile);
    config.duration_s = duration_s;
    config.geometry = SensorGeometry{width, height};
    config.seed = seed;
  }
};

struct StreamFlags {
  PartitionStrategy strategy = PartitionStrategy::Bucket;
  std::uint16_t tracks = 5;
  std::uint32_t events_per_track = 250;

  void attach(CLI::App* app) {
    app->add_option("--strategy", strategy, "Partitioning: bucket or round_robin")
        ->transform(CLI::CheckedTransformer(kStrategies, CLI::ignore_case))
        ->option_text("bucket|round_robin");
    app->add_option("--tracks", tracks, "Track count N")->check(CLI::Range(1, 65535));
    app->add_option("--events-per-track", events_per_track, "Events per track per window E")
        ->check(CLI::PositiveNumber);
  }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_simulate(const SourceFlags& source, const StreamFlags& stream, double bandwidth, double burst,
                 double latency_target, std::size_t queue_cap, const std::string& mode, bool passive,
                 bool keep_streams, double link_delay_ms, const std::string& out_dir) {
  ExperimentConfig config;
  source.apply(config);
  config.strategy = stream.strategy;
  config.tracks = stream.tracks;
  config.events_per_track = stream.events_per_track;
  config.bandwidth_mbps = bandwidth;
  config.burst_ms = burst;
  config.latency_target_ms = latency_target;
  config.queue_capacity = queue_cap;
  config.mode = mode == "sockets" ? RunMode::Sockets : RunMode::Simulated;
  config.passive_receiver = passive;
  config.keep_streams = keep_streams;
  config.link_delay = Micros{static_cast<std::int64_t>(std::llround(link_delay_ms * 1000.0))};
  if (!out_dir.empty()) config.output_dir = out_dir;

  const ExperimentResult result = run_experiment(config);
  print_json(summary_json(result));
  if (result.aborted) fail(ErrorCategory::Protocol, "run aborted: " + result.abort_reason);
  return 0;
}

int cmd_relay(const std::string& listen, double bandwidth, double burst, std::size_t queue_cap, bool once) {
  net::RelayServerOptions options;
  options.listen = net::HostPort::parse(listen);
  options.bandwidth = Bandwidth::mbps(bandwidth);
  if (bandwidth <= 0.0) fail(ErrorCategory::Config, "bandwidth must be positive");
  options.burst_bits = static_cast<std::uint64_t>(static_cast<double>(options.bandwidth.bps()) * burst / 1000.0);
  options.queue_capacity = queue_cap;
  net::RelayServer server(options);
  spdlog::info("relay listening on {}:{}", options.listen.host, server.port());
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (once) {
    server.wait_session_end();
  } else {
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  server.stop();
  return 0;
}

int cmd_publish(const SourceFlags& source, const StreamFlags& stream, const std::string& relay,
                std::uint64_t session, double lead_ms) {
  ExperimentConfig config;
  source.apply(config);
  const SourceStream windows = load_source(config);

  net::PublishOptions options;
  options.relay = net::HostPort::parse(relay);
  options.partition = {stream.strategy, stream.tracks, stream.events_per_track};
  options.session_id = session;
  options.lead_time = Micros{static_cast<std::int64_t>(lead_ms * 1000.0)};
  const net::PublishReport report = net::publish_stream(options, windows.geometry, windows.windows);
  print_json({{"windows", report.windows},
              {"source_events", windows.event_count()},
              {"published_events", report.published_events},
              {"dropped_events", report.dropped_events}});
  return 0;
}

int cmd_subscribe(const std::string& relay, double latency_target, bool passive, std::uint64_t stall_windows,
                  const std::string& out, const std::string& metrics, const std::string& tensor_dir) {
  net::SubscribeOptions options;
  options.relay = net::HostPort::parse(relay);
  options.receiver.adaptive = !passive;
  options.receiver.target_latency = Micros{static_cast<std::int64_t>(latency_target * 1000.0)};
  options.receiver.stall_windows = stall_windows;

  Recording reconstructed;
  Micros window_length = kDefaultWindowLength;
  if (!tensor_dir.empty()) std::filesystem::create_directories(tensor_dir);
  options.on_announce = [&](const Announce& a) {
    reconstructed.geometry = a.geometry;
    window_length = a.window_length;
  };
  options.sink = [&](const EventWindow& window, const WindowMetrics& m) {
    if (!out.empty()) reconstructed.events.insert(reconstructed.events.end(), window.events.begin(), window.events.end());
    if (!tensor_dir.empty()) {
      const EventTensor tensor = build_tensor(window, reconstructed.geometry, window_length);
      write_tensor(tensor, std::filesystem::path(tensor_dir) / ("window_" + std::to_string(m.window_index)));
    }
  };
  const net::SubscribeReport report = net::run_subscriber(options);

  if (!out.empty()) write_evst(std::filesystem::path(out), reconstructed);
  if (!metrics.empty()) write_metrics_csv(std::filesystem::path(metrics), report.series);
  nlohmann::json j{{"windows", report.counters.windows},
                   {"received_events", report.counters.received_events},
                   {"lost_segments", report.counters.lost_segments},
                   {"finished", report.finished}};
  if (!report.series.empty()) {
    const RunSummary s = summarize(report.series, report.series.back().reconstruct_time - report.series.front().first_send_time);
    j["mean_latency_ms"] = s.mean_latency_ms;
    j["max_latency_ms"] = s.max_latency_ms;
    j["mean_throughput_mbps"] = s.mean_throughput_mbps;
  }
  print_json(j);
  if (!report.finished) fail(ErrorCategory::Protocol, "connection closed before SESSION_END");
  return 0;
}

int cmd_reduce(double bandwidth, const std::string& mode, const std::string& in, const std::string& out,
               const std::string& stats_path) {
  const std::filesystem::path input(in);
  Recording recording;
  const auto ext = input.extension().string();
  if (ext == ".txt" || ext == ".csv") {
    recording.events = read_event_text(input);
  } else {
    recording = read_evst(input);
  }
  if (bandwidth <= 0.0) fail(ErrorCategory::Parameter, "bandwidth must be positive");
  const auto windows = window_split(recording.events);
  std::vector<ReductionStats> stats;
  const auto reduced =
      reduce_stream(windows, Bandwidth::mbps(bandwidth), mode == "even" ? ReductionMode::Even : ReductionMode::Tail, &stats);
  Recording output{recording.geometry, concat_windows(reduced)};
  const std::filesystem::path out_path(out);
  const auto out_ext = out_path.extension().string();
  if (out_ext == ".txt" || out_ext == ".csv") {
    std::ofstream f(out_path);
    if (!f) fail(ErrorCategory::Io, "cannot open " + out);
    write_event_text(f, output.events);
  } else {
    write_evst(out_path, output);
  }

  std::uint64_t source_total = 0;
  std::uint64_t kept_total = 0;
  if (!stats_path.empty()) {
    std::ofstream f(stats_path);
    if (!f) fail(ErrorCategory::Io, "cannot open " + stats_path);
    f << "window_index,source_events,kept_events,loss\n";
    for (const ReductionStats& s : stats) {
      char loss[32];
      std::snprintf(loss, sizeof(loss), "%.6f", loss_rate(s.source_events, s.kept_events));
      f << s.window_index << ',' << s.source_events << ',' << s.kept_events << ',' << loss << '\n';
    }
  }
  for (const ReductionStats& s : stats) {
    source_total += s.source_events;
    kept_total += s.kept_events;
  }
  print_json({{"windows", stats.size()},
              {"budget_events", budget_events(bandwidth)},
              {"source_events", source_total},
              {"kept_events", kept_total},
              {"loss", loss_rate(source_total, kept_total)}});
  return 0;
}

int cmd_stats(const std::string& metrics, std::optional<std::uint64_t> source_events, double window_ms) {
  const auto series = read_metrics_csv(std::filesystem::path(metrics));
  const auto duration =
      Micros{static_cast<std::int64_t>(static_cast<double>(series.size()) * window_ms * 1000.0)};
  const RunSummary s = summarize(series, duration, source_events);
  nlohmann::json j{{"windows", s.windows},
                   {"max_latency_ms", s.max_latency_ms},
                   {"median_latency_ms", s.median_latency_ms},
                   {"mean_latency_ms", s.mean_latency_ms},
                   {"mean_throughput_mbps", s.mean_throughput_mbps},
                   {"received_events", s.received_events}};
  if (s.mean_loss) j["mean_loss"] = *s.mean_loss;
  print_json(j);
  return 0;
}

int cmd_generate(const SourceFlags& source, const std::string& out) {
  ExperimentConfig config;
  source.apply(config);
  config.input.reset();
  const SourceStream stream = load_source(config);
  write_evst(std::filesystem::path(out), Recording{stream.geometry, concat_windows(stream.windows)});
  print_json({{"windows", stream.windows.size()}, {"events", stream.event_count()}});
  return 0;
}

int cmd_sweep(const SourceFlags& source, PartitionStrategy strategy, const std::vector<double>& bandwidths,
              const std::vector<std::uint16_t>& track_counts, std::uint32_t events_per_track, double latency_target,
              const std::string& out) {
  std::vector<ExperimentConfig> configs;
  for (double b : bandwidths) {
    for (std::uint16_t n : track_counts) {
      ExperimentConfig config;
      source.apply(config);
      config.strategy = strategy;
      config.bandwidth_mbps = b;
      config.tracks = n;
      config.events_per_track = events_per_track;
      config.latency_target_ms = latency_target;
      configs.push_back(config);
    }
  }
  const auto rows = sweep(configs);
  if (out.empty()) {
    write_sweep_csv(std::cout, rows);
  } else {
    std::ofstream f(out);
    if (!f) fail(ErrorCategory::Io, "cannot open " + out);
    write_sweep_csv(f, rows);
  }
  return 0;
}

// Splices `key=value` lines from a --config file in as `--key value` flags. Flags given on the
// command line win; `[section]` headers and `#` comments are ignored.
std::vector<std::string> with_config_defaults(std::vector<std::string> args) {
  auto at = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("--config", 0) == 0; });
  if (at == args.end()) return args;
  std::string path;
  if (at->size() > 9 && (*at)[8] == '=') {
    path = at->substr(9);
  } else if (*at == "--config" && at + 1 != args.end()) {
    path = *(at + 1);
  } else {
    return args;
  }
  std::ifstream in(path);
  if (!in) return args;  // the option's ExistingFile check reports it

  auto given = [&](const std::string& flag) {
    return std::any_of(args.begin(), args.end(),
                       [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  auto trim = [](std::string v) {
    const auto b = v.find_first_not_of(" \t\r");
    const auto e = v.find_last_not_of(" \t\r");
    v = b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
    return v;
  };

  std::vector<std::string> extra;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    const auto eq = line.find('=');
    if (line.empty() || line.front() == '[' || eq == std::string::npos) continue;
    const std::string flag = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (given(flag) || value == "false") continue;
    extra.push_back(flag);
    if (value != "true") extra.push_back(value);
  }
  const auto pos = at - args.begin();
  args.insert(args.begin() + pos, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-track event camera streaming: partitioning, relay, adaptation and replay", "evstream"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

  auto add_config = [](CLI::App* sub) {
    sub->add_option("--config", "key=value file with defaults for this command's flags")->check(CLI::ExistingFile);
  };

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run publisher, relay and receiver end to end");
  add_config(simulate);
  SourceFlags sim_source;
  StreamFlags sim_stream;
  double sim_bandwidth = 100.0, sim_burst = 100.0, sim_latency = 5.0;
  std::size_t sim_queue = kDefaultQueueCapacity;
  std::string sim_mode = "simulated", sim_out;
  bool sim_passive = false, sim_keep = false;
  double sim_link_delay = 0.25;
  sim_source.attach(simulate);
  sim_stream.attach(simulate);
  simulate->add_option("--bandwidth", sim_bandwidth, "Shaped downlink in Mbps")->check(CLI::PositiveNumber);
  simulate->add_option("--burst", sim_burst, "Bucket depth in milliseconds of traffic")->check(CLI::PositiveNumber);
  simulate->add_option("--latency-target", sim_latency, "Adaptation target L in ms")->check(CLI::PositiveNumber);
  simulate->add_option("--queue-cap", sim_queue, "Relay queue capacity in segments")->check(CLI::PositiveNumber);
  simulate->add_option("--mode", sim_mode, "simulated or sockets")->check(CLI::IsMember({"simulated", "sockets"}));
  simulate->add_flag("--passive", sim_passive, "Add a full-subscription passive receiver");
  simulate->add_flag("--keep-streams", sim_keep, "Write reconstructed streams to the output directory");
  simulate->add_option("--link-delay", sim_link_delay, "One-way delay per hop in ms (simulated mode)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--out-dir", sim_out, "Directory for metrics.csv and summary.json");

  // relay
  auto* relay = app.add_subcommand("relay", "Run a shaping relay");
  add_config(relay);
  std::string relay_listen = "127.0.0.1:4433";
  double relay_bandwidth = 100.0, relay_burst = 100.0;
  std::size_t relay_queue = kDefaultQueueCapacity;
  bool relay_once = false;
  relay->add_option("--listen", relay_listen, "host:port to listen on");
  relay->add_option("--bandwidth", relay_bandwidth, "Per-subscriber downlink in Mbps")->check(CLI::PositiveNumber);
  relay->add_option("--burst", relay_burst, "Bucket depth in milliseconds of traffic")->check(CLI::PositiveNumber);
  relay->add_option("--queue-cap", relay_queue, "Per-track queue capacity in segments")->check(CLI::PositiveNumber);
  relay->add_flag("--once", relay_once, "Exit after one session has been delivered");

  // publish
  auto* publish = app.add_subcommand("publish", "Replay a recording to a relay at live pace");
  add_config(publish);
  SourceFlags pub_source;
  StreamFlags pub_stream;
  std::string pub_relay = "127.0.0.1:4433";
  std::uint64_t pub_session = 1;
  double pub_lead = 200.0;
  pub_source.attach(publish);
  pub_stream.attach(publish);
  publish->add_option("--relay", pub_relay, "Relay host:port");
  publish->add_option("--session", pub_session, "Session id");
  publish->add_option("--lead", pub_lead, "Milliseconds between ANNOUNCE and window 0");

  // subscribe
  auto* subscribe = app.add_subcommand("subscribe", "Receive, adapt and reconstruct a session");
  add_config(subscribe);
  std::string sub_relay = "127.0.0.1:4433", sub_out, sub_metrics, sub_tensors;
  double sub_latency = 5.0;
  bool sub_passive = false;
  std::uint64_t sub_stall = 20;
  subscribe->add_option("--relay", sub_relay, "Relay host:port");
  subscribe->add_option("--latency-target", sub_latency, "Adaptation target L in ms")->check(CLI::PositiveNumber);
  subscribe->add_flag("--passive", sub_passive, "Subscribe to every track and never adapt");
  subscribe->add_option("--stall-windows", sub_stall, "Windows a track may lag before it is dropped");
  subscribe->add_option("--out", sub_out, "Reconstructed stream (.evst)");
  subscribe->add_option("--metrics", sub_metrics, "Per-window metrics CSV");
  subscribe->add_option("--tensors", sub_tensors, "Directory for per-window event tensors");

  // reduce
  auto* reduce = app.add_subcommand("reduce", "Apply a per-window bandwidth budget to a recording");
  add_config(reduce);
  double red_bandwidth = 0.0;
  std::string red_mode = "tail", red_in, red_out, red_stats;
  reduce->add_option("--bandwidth", red_bandwidth, "Link rate in Mbps")->required()->check(CLI::PositiveNumber);
  reduce->add_option("--mode", red_mode, "tail or even")->check(CLI::IsMember({"tail", "even"}));
  reduce->add_option("--in", red_in, "Input recording")->required()->check(CLI::ExistingFile);
  reduce->add_option("--out", red_out, "Output recording")->required();
  reduce->add_option("--stats", red_stats, "Per-window loss CSV");

  // stats
  auto* stats = app.add_subcommand("stats", "Summarize a metrics CSV");
  add_config(stats);
  std::string stats_in;
  std::optional<std::uint64_t> stats_source;
  double stats_window = 50.0;
  stats->add_option("--in", stats_in, "metrics.csv")->required()->check(CLI::ExistingFile);
  stats->add_option("--source-events", stats_source, "Source event total, enables the loss figure");
  stats->add_option("--window-ms", stats_window, "Window length used for throughput");

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic recording");
  add_config(generate);
  SourceFlags gen_source;
  std::string gen_out;
  gen_source.attach(generate);
  generate->add_option("--out", gen_out, "Output .evst")->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Simulate a grid of bandwidths and track counts");
  add_config(sweep_cmd);
  SourceFlags sw_source;
  PartitionStrategy sw_strategy = PartitionStrategy::Bucket;
  std::vector<double> sw_bandwidths{1, 5, 25, 50, 100};
  std::vector<std::uint16_t> sw_tracks{5, 10, 25};
  std::uint32_t sw_events = 250;
  double sw_latency = 5.0;
  std::string sw_out;
  sw_source.attach(sweep_cmd);
  sweep_cmd->add_option("--strategy", sw_strategy, "bucket or round_robin")
      ->transform(CLI::CheckedTransformer(kStrategies, CLI::ignore_case))
        ->option_text("bucket|round_robin");
  sweep_cmd->add_option("--bandwidths", sw_bandwidths, "Mbps values")->delimiter(',');
  sweep_cmd->add_option("--tracks", sw_tracks, "Track counts")->delimiter(',');
  sweep_cmd->add_option("--events-per-track", sw_events, "E")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--latency-target", sw_latency, "L in ms")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sw_out, "CSV path; stdout when absent");

  try {
    auto args = with_config_defaults(std::vector<std::string>(argv + 1, argv + argc));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(exit_code(ErrorCategory::Config));
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*simulate) {
      return cmd_simulate(sim_source, sim_stream, sim_bandwidth, sim_burst, sim_latency, sim_queue, sim_mode,
                          sim_passive, sim_keep, sim_link_delay, sim_out);
    }
    if (*relay) return cmd_relay(relay_listen, relay_bandwidth, relay_burst, relay_queue, relay_once);
    if (*publish) return cmd_publish(pub_source, pub_stream, pub_relay, pub_session, pub_lead);
    if (*subscribe) {
      return cmd_subscribe(sub_relay, sub_latency, sub_passive, sub_stall, sub_out, sub_metrics, sub_tensors);
    }
    if (*reduce) return cmd_reduce(red_bandwidth, red_mode, red_in, red_out, red_stats);
    if (*stats) return cmd_stats(stats_in, stats_source, stats_window);
    if (*generate) return cmd_generate(gen_source, gen_out);
    if (*sweep_cmd) {
      return cmd_sweep(sw_source, sw_strategy, sw_bandwidths, sw_tracks, sw_events, sw_latency, sw_out);
    }
  } catch (const Error& e) {
    std::cerr << "evstream: " << to_string(e.category()) << " error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "evstream: io error: " << e.what() << '\n';
    return exit_code(ErrorCategory::Io);
  }
  return 0;
}
