// Discrete-event simulation of publisher -> relay -> shaped downlink -> receiver on a virtual
// microsecond clock. Single-threaded; ties are broken by scheduling order, so a run is fully
// determined by its config and source.

#include <functional>
#include <queue>

#include "evstream/error.hpp"
#include "evstream/harness.hpp"
#include "evstream/token_bucket.hpp"

namespace evs {

namespace {

inline constexpr std::size_t kEndFrameBytes = kFramePrefixSize + 16;

class EventLoop {
 public:
  void at(Micros when, std::function<void()> fn) { queue_.push({when, next_seq_++, std::move(fn)}); }

  void run() {
    while (!queue_.empty()) {
      Item item = std::move(const_cast<Item&>(queue_.top()));
      queue_.pop();
      now_ = item.when;
      item.fn();
    }
  }

  Micros now() const noexcept { return now_; }

 private:
  struct Item {
    Micros when;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Item& other) const {
      return when != other.when ? when > other.when : seq > other.seq;
    }
  };
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue_;
  std::uint64_t next_seq_ = 0;
  Micros now_{0};
};

class Simulation {
 public:
  Simulation(const ExperimentConfig& config, const SourceStream& source)
      : config_(config), source_(source), relay_(config.queue_capacity) {
    add_endpoint(true);
    if (config.passive_receiver) add_endpoint(false);
  }

  ExperimentResult run() {
    result_.config = config_;
    result_.windows = source_.windows.size();
    result_.source_events = source_.event_count();

    schedule_publisher();
    try {
      loop_.run();
    } catch (const Error& e) {
      result_.aborted = true;
      result_.abort_reason = std::string(to_string(e.category())) + ": " + e.what();
    }
    for (Endpoint& ep : endpoints_) {
      if (!result_.aborted && (!ep.receiver || !ep.receiver->finished())) {
        result_.aborted = true;
        result_.abort_reason = "receiver " + std::to_string(ep.id) + " stopped before the end of the session";
      }
    }
    finish_report(endpoints_[0], result_.receiver);
    if (endpoints_.size() > 1) finish_report(endpoints_[1], result_.passive.emplace());
    return std::move(result_);
  }

 private:
  struct Endpoint {
    SubscriberId id = 0;
    bool adaptive = true;
    std::optional<Receiver> receiver;
    TokenBucket bucket;
    bool busy = false;
    std::vector<Event> reconstructed;
    std::vector<LinkDelivery> link_log;
  };

  void add_endpoint(bool adaptive) {
    const SubscriberId id = relay_.add_subscriber();
    endpoints_.push_back(Endpoint{id, adaptive, std::nullopt,
                                  TokenBucket(Bandwidth::mbps(config_.bandwidth_mbps), config_.burst_bits()), false,
                                  {}, {}});
  }

  Micros delay() const { return config_.link_delay; }

  void schedule_publisher() {
    Announce announce;
    announce.session_id = config_.seed;
    announce.track_count = config_.tracks;
    announce.events_per_track = config_.events_per_track;
    announce.geometry = source_.geometry;
    announce.window_length = config_.window_length;
    announce.strategy = config_.strategy;

    loop_.at(delay(), [this, announce] {
      relay_.announce(announce);
      for (std::size_t i = 0; i < endpoints_.size(); ++i) {
        loop_.at(loop_.now() + delay(), [this, i, announce] {
          Endpoint& ep = endpoints_[i];
          ReceiverOptions options;
          options.adaptive = ep.adaptive;
          options.target_latency = Micros{static_cast<std::int64_t>(std::llround(config_.latency_target_ms * 1000.0))};
          options.stall_windows = config_.stall_windows;
          ep.receiver.emplace(announce, options);
          if (config_.keep_streams) {
            ep.receiver->set_sink([&ep](const EventWindow& w, const WindowMetrics&) {
              ep.reconstructed.insert(ep.reconstructed.end(), w.events.begin(), w.events.end());
            });
          }
          route(ep, ep.receiver->start());
        });
      }
    });

    const PartitionConfig partition{config_.strategy, config_.tracks, config_.events_per_track};
    for (const auto& slot : replay_schedule(source_.windows, config_.session_start, config_.window_length)) {
      loop_.at(slot.send_deadline, [this, window = slot.window, partition] { publish(*window, partition); });
    }
    const Micros end_time =
        replay_deadline(source_.windows.size(), config_.session_start, config_.window_length) - config_.window_length;
    loop_.at(std::max(end_time, config_.session_start), [this] {
      const SessionEnd end{config_.seed, source_.windows.size()};
      loop_.at(loop_.now() + delay(), [this, end] {
        relay_.end_session(end);
        for (Endpoint& ep : endpoints_) kick(ep);
      });
    });
  }

  void publish(const EventWindow& window, const PartitionConfig& partition) {
    Partitioned parts = evs::partition(window, partition);
    result_.publisher_dropped += parts.dropped;
    for (TrackSegment& segment : parts.segments) {
      segment.send_time = loop_.now();
      result_.published_events += segment.events.size();
      if (config_.keep_streams && partition.strategy == PartitionStrategy::Bucket) {
        result_.published.insert(result_.published.end(), segment.events.begin(), segment.events.end());
      }
      loop_.at(loop_.now() + delay(), [this, frame = make_relay_frame(std::move(segment))] {
        relay_.forward(frame);
        for (Endpoint& ep : endpoints_) kick(ep);
      });
    }
    if (config_.keep_streams && partition.strategy == PartitionStrategy::RoundRobin) {
      result_.published.insert(result_.published.end(), window.events.begin(), window.events.end());
    }
  }

  void kick(Endpoint& ep) {
    if (ep.busy || !relay_.has_pending(ep.id)) return;
    RelayItem item = *relay_.pop(ep.id);
    const std::size_t bytes = std::holds_alternative<RelayFrame>(item) ? std::get<RelayFrame>(item).wire_bytes
                                                                        : kEndFrameBytes;
    const Micros done = ep.bucket.admit(bytes * 8, loop_.now());
    ep.link_log.push_back({done, bytes});
    ep.busy = true;
    loop_.at(done, [this, &ep] {
      ep.busy = false;
      kick(ep);
    });
    loop_.at(done + delay(), [this, &ep, item = std::move(item)] { deliver(ep, item); });
  }

  void deliver(Endpoint& ep, const RelayItem& item) {
    if (!ep.receiver) fail(ErrorCategory::Protocol, "data before ANNOUNCE");
    if (const auto* frame = std::get_if<RelayFrame>(&item)) {
      route(ep, ep.receiver->handle_segment(*frame->segment, loop_.now()));
    } else {
      route(ep, ep.receiver->handle_end(std::get<SessionEnd>(item), loop_.now()));
    }
  }

  void route(Endpoint& ep, const std::vector<ControlMessage>& messages) {
    for (const ControlMessage& message : messages) {
      if (const auto* sub = std::get_if<Subscribe>(&message)) {
        audit(ep, AuditEntry::Kind::SubscribeSent, sub->track_id);
        loop_.at(loop_.now() + delay(), [this, &ep, track = sub->track_id] {
          const SubscribeResult res = relay_.subscribe(ep.id, track);
          loop_.at(loop_.now() + delay(), [this, &ep, ok = res.ok] {
            audit(ep, AuditEntry::Kind::SubscribeOkReceived, ok.track_id);
            route(ep, ep.receiver->handle_subscribe_ok(ok, loop_.now()));
          });
        });
      } else if (const auto* unsub = std::get_if<Unsubscribe>(&message)) {
        audit(ep, AuditEntry::Kind::UnsubscribeSent, unsub->track_id);
        loop_.at(loop_.now() + delay(), [this, &ep, track = unsub->track_id] { relay_.unsubscribe(ep.id, track); });
      }
    }
  }

  void audit(const Endpoint& ep, AuditEntry::Kind kind, TrackId track) {
    result_.audit.push_back({loop_.now(), ep.id, kind, track});
  }

  void finish_report(Endpoint& ep, ReceiverReport& report) {
    report.subscriber = ep.id;
    report.adaptive = ep.adaptive;
    report.relay = relay_.stats(ep.id);
    report.reconstructed = std::move(ep.reconstructed);
    report.link_log = std::move(ep.link_log);
    if (!ep.receiver) return;
    report.finished = ep.receiver->finished();
    report.counters = ep.receiver->counters();
    report.series = ep.receiver->metrics();
    for (WindowMetrics& m : report.series) {
      if (m.window_index < source_.windows.size()) m.source_events = source_.windows[m.window_index].events.size();
    }
    if (!report.series.empty()) {
      const Micros elapsed = report.series.back().reconstruct_time - config_.session_start;
      report.summary = summarize(report.series, elapsed, result_.source_events);
    }
  }

  const ExperimentConfig& config_;
  const SourceStream& source_;
  EventLoop loop_;
  RelayState relay_;
  std::vector<Endpoint> endpoints_;
  ExperimentResult result_;
};

}  // namespace

ExperimentResult run_simulation(const ExperimentConfig& config, const SourceStream& source) {
  Simulation simulation(config, source);
  return simulation.run();
}

}  // namespace evs
