#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "evstream/harness.hpp"
#include "evstream/receiver.hpp"
#include "evstream/relay.hpp"
#include "evstream/token_bucket.hpp"
#include "evstream/wire.hpp"

namespace evs::net {

struct HostPort {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port" or ":port".
  static HostPort parse(std::string_view text);
  std::string to_string() const;
};

// Host monotonic clock in microseconds; comparable across processes on one machine.
Micros monotonic_now();

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket();

  static Socket connect(const HostPort& peer);
  static Socket listen(const HostPort& local, int backlog = 16);

  // Returns an invalid socket if nothing arrived within the timeout.
  Socket accept(int timeout_ms) const;
  std::uint16_t local_port() const;

  void write_all(std::span<const std::uint8_t> bytes) const;
  // Zero means orderly shutdown by the peer.
  std::size_t read_some(std::span<std::uint8_t> buffer) const;
  void shutdown() const noexcept;

  bool valid() const noexcept { return fd_ >= 0; }
  int release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }

 private:
  int fd_ = -1;
};

// Reads whole frames off a socket.
class MessageStream {
 public:
  explicit MessageStream(const Socket& socket) : socket_(socket) {}
  // nullopt on clean end of stream; throws Framing if the stream ends mid-frame.
  std::optional<Message> next();

 private:
  const Socket& socket_;
  FrameReader reader_;
  std::vector<std::uint8_t> buffer_ = std::vector<std::uint8_t>(64 * 1024);
};

void send_message(const Socket& socket, const Message& message);

struct RelayServerOptions {
  HostPort listen;
  Bandwidth bandwidth = Bandwidth::mbps(100.0);
  std::uint64_t burst_bits = 0;  // 0 selects 100 ms at the configured rate
  std::size_t queue_capacity = kDefaultQueueCapacity;
};

// TCP relay. One connection per publisher or subscriber; each subscriber's downlink is paced
// by its own token bucket. Per-track order is the order frames arrived from the publisher.
class RelayServer {
 public:
  explicit RelayServer(RelayServerOptions options);
  ~RelayServer();
  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();
  // Blocks until a published session has ended and every subscriber has drained its queue.
  void wait_session_end();

 private:
  struct Connection;

  void accept_loop();
  void serve(std::shared_ptr<Connection> conn);
  void writer_loop(std::shared_ptr<Connection> conn);
  void handle(const std::shared_ptr<Connection>& conn, Message message);
  void enqueue_control(Connection& conn, const Message& message);
  void notify_all_subscribers();

  RelayServerOptions options_;
  Socket listener_;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};

  std::mutex mutex_;
  std::condition_variable session_cv_;
  RelayState relay_;
  std::map<SubscriberId, std::shared_ptr<Connection>> connections_;
  bool session_ended_ = false;
  std::vector<std::thread> threads_;
  std::thread acceptor_;
};

struct PublishOptions {
  HostPort relay;
  PartitionConfig partition;
  std::uint64_t session_id = 1;
  Micros window_length = kDefaultWindowLength;
  // Wait between ANNOUNCE and window 0 so subscribers can complete their first handshake.
  Micros lead_time{200'000};
};

struct PublishReport {
  std::uint64_t windows = 0;
  std::uint64_t published_events = 0;
  std::uint64_t dropped_events = 0;
  Micros session_start{0};
};

// Replays windows at live pace: window i leaves at session_start + i * window_length.
PublishReport publish_stream(const PublishOptions& options, SensorGeometry geometry,
                             std::span<const EventWindow> windows);

struct SubscribeOptions {
  HostPort relay;
  ReceiverOptions receiver;
  Receiver::WindowSink sink;
  std::function<void(const Announce&)> on_announce;
};

struct SubscribeReport {
  Announce announcement;
  std::vector<WindowMetrics> series;
  ReceiverCounters counters;
  std::vector<AuditEntry> audit;  // subscriber id 0 in every entry
  bool finished = false;
};

// Connects, waits for ANNOUNCE, then runs the receiver until SESSION_END has been processed.
SubscribeReport run_subscriber(const SubscribeOptions& options);

}  // namespace evs::net
