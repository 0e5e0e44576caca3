#include "evstream/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include <spdlog/spdlog.h>

#include "evstream/error.hpp"

namespace evs::net {

namespace {

[[noreturn]] void fail_errno(const std::string& what) {
  fail(ErrorCategory::Io, what + ": " + std::strerror(errno));
}

sockaddr_in resolve(const HostPort& where) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(where.port);
  const std::string host = where.host.empty() || where.host == "localhost" ? "127.0.0.1" : where.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &found) != 0 || !found) {
    fail(ErrorCategory::Config, "cannot resolve host '" + host + "'");
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(found->ai_addr)->sin_addr;
  ::freeaddrinfo(found);
  return addr;
}

}  // namespace

HostPort HostPort::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) fail(ErrorCategory::Config, "expected host:port, got '" + std::string(text) + "'");
  HostPort hp;
  hp.host = std::string(text.substr(0, colon));
  if (hp.host.empty()) hp.host = "127.0.0.1";
  const auto port = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), hp.port);
  if (ec != std::errc{} || ptr != port.data() + port.size()) {
    fail(ErrorCategory::Config, "bad port in '" + std::string(text) + "'");
  }
  return hp;
}

std::string HostPort::to_string() const { return host + ":" + std::to_string(port); }

Micros monotonic_now() {
  return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now().time_since_epoch());
}

namespace {

void sleep_until_us(Micros deadline) {
  std::this_thread::sleep_until(std::chrono::steady_clock::time_point(deadline));
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.release();
  }
  return *this;
}

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket Socket::connect(const HostPort& peer) {
  const sockaddr_in addr = resolve(peer);
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) fail_errno("socket");
  if (::connect(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail_errno("connect to " + peer.to_string());
  }
  int one = 1;
  ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

Socket Socket::listen(const HostPort& local, int backlog) {
  const sockaddr_in addr = resolve(local);
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) fail_errno("socket");
  int one = 1;
  ::setsockopt(s.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(s.fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail_errno("bind " + local.to_string());
  }
  if (::listen(s.fd_, backlog) != 0) fail_errno("listen");
  return s;
}

Socket Socket::accept(int timeout_ms) const {
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, timeout_ms);
  if (ready <= 0) return Socket{};
  Socket s(::accept(fd_, nullptr, nullptr));
  if (s.valid()) {
    int one = 1;
    ::setsockopt(s.fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  return s;
}

std::uint16_t Socket::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail_errno("getsockname");
  return ntohs(addr.sin_port);
}

void Socket::write_all(std::span<const std::uint8_t> bytes) const {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail_errno("send");
    }
    bytes = bytes.subspan(static_cast<std::size_t>(n));
  }
}

std::size_t Socket::read_some(std::span<std::uint8_t> buffer) const {
  while (true) {
    const ssize_t n = ::recv(fd_, buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno != EINTR) fail_errno("recv");
  }
}

void Socket::shutdown() const noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::optional<Message> MessageStream::next() {
  while (true) {
    if (auto message = reader_.next()) return message;
    const std::size_t n = socket_.read_some(buffer_);
    if (n == 0) {
      reader_.finish();
      return std::nullopt;
    }
    reader_.feed(std::span<const std::uint8_t>(buffer_.data(), n));
  }
}

void send_message(const Socket& socket, const Message& message) { socket.write_all(frame_encode(message)); }

// ---------------------------------------------------------------------------------------------
// Relay server

struct RelayServer::Connection {
  SubscriberId id = 0;
  Socket socket;
  std::deque<std::vector<std::uint8_t>> control;
  std::condition_variable cv;
  bool publisher = false;
  bool closed = false;
  bool end_sent = false;
};

RelayServer::RelayServer(RelayServerOptions options)
    : options_(std::move(options)), listener_(Socket::listen(options_.listen)), relay_(options_.queue_capacity) {
  if (options_.burst_bits == 0) options_.burst_bits = TokenBucket::default_burst_bits(options_.bandwidth);
  port_ = listener_.local_port();
  acceptor_ = std::thread([this] { accept_loop(); });
}

RelayServer::~RelayServer() { stop(); }

void RelayServer::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, conn] : connections_) {
      conn->socket.shutdown();
      conn->cv.notify_all();
    }
  }
  session_cv_.notify_all();
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
}

void RelayServer::wait_session_end() {
  std::unique_lock lock(mutex_);
  session_cv_.wait(lock, [this] {
    if (stopping_) return true;
    if (!session_ended_) return false;
    for (const auto& [id, conn] : connections_) {
      if (!conn->publisher && !conn->closed && !conn->end_sent) return false;
    }
    return true;
  });
}

void RelayServer::accept_loop() {
  while (!stopping_) {
    Socket socket = listener_.accept(100);
    if (!socket.valid()) continue;
    auto conn = std::make_shared<Connection>();
    conn->socket = std::move(socket);
    std::lock_guard lock(mutex_);
    conn->id = relay_.add_subscriber();
    connections_[conn->id] = conn;
    if (relay_.announcement()) enqueue_control(*conn, *relay_.announcement());
    spdlog::debug("relay: connection {} accepted", conn->id);
    threads_.emplace_back([this, conn] { serve(conn); });
    threads_.emplace_back([this, conn] { writer_loop(conn); });
  }
}

void RelayServer::enqueue_control(Connection& conn, const Message& message) {
  conn.control.push_back(frame_encode(message));
  conn.cv.notify_all();
}

void RelayServer::notify_all_subscribers() {
  for (auto& [id, conn] : connections_) conn->cv.notify_all();
}

void RelayServer::serve(std::shared_ptr<Connection> conn) {
  try {
    MessageStream stream(conn->socket);
    while (auto message = stream.next()) handle(conn, std::move(*message));
  } catch (const Error& e) {
    if (!stopping_) spdlog::warn("relay: connection {} closed: {} error: {}", conn->id, to_string(e.category()), e.what());
  }
  std::lock_guard lock(mutex_);
  conn->closed = true;
  conn->cv.notify_all();
  if (!conn->publisher) {
    try {
      relay_.remove_subscriber(conn->id);
    } catch (const Error&) {
    }
  }
  connections_.erase(conn->id);
  session_cv_.notify_all();
}

void RelayServer::handle(const std::shared_ptr<Connection>& conn, Message message) {
  if (auto* segment = std::get_if<SegmentFrame>(&message)) {
    RelayFrame frame = make_relay_frame(*segment);
    std::lock_guard lock(mutex_);
    if (!conn->publisher) fail(ErrorCategory::Protocol, "segment from a connection that did not announce");
    relay_.forward(frame);
    notify_all_subscribers();
    return;
  }

  std::lock_guard lock(mutex_);
  if (const auto* announce = std::get_if<Announce>(&message)) {
    if (!conn->publisher) {
      relay_.remove_subscriber(conn->id);
      conn->publisher = true;
    }
    relay_.announce(*announce);
    session_ended_ = false;
    for (auto& [id, other] : connections_) {
      if (!other->publisher) {
        other->end_sent = false;
        enqueue_control(*other, *announce);
      }
    }
    spdlog::info("relay: session {} announced with {} tracks", announce->session_id, announce->track_count);
  } else if (const auto* subscribe = std::get_if<Subscribe>(&message)) {
    const SubscribeResult result = relay_.subscribe(conn->id, subscribe->track_id);
    enqueue_control(*conn, result.ok);
  } else if (const auto* unsubscribe = std::get_if<Unsubscribe>(&message)) {
    relay_.unsubscribe(conn->id, unsubscribe->track_id);
  } else if (const auto* end = std::get_if<SessionEnd>(&message)) {
    if (!conn->publisher) fail(ErrorCategory::Protocol, "SESSION_END from a connection that did not announce");
    relay_.end_session(*end);
    session_ended_ = true;
    notify_all_subscribers();
    session_cv_.notify_all();
  } else {
    fail(ErrorCategory::Protocol, "unexpected SUBSCRIBE_OK from a client");
  }
}

void RelayServer::writer_loop(std::shared_ptr<Connection> conn) {
  TokenBucket bucket(options_.bandwidth, options_.burst_bits, monotonic_now());
  try {
    while (true) {
      std::unique_lock lock(mutex_);
      conn->cv.wait(lock, [&] {
        return stopping_ || conn->closed || !conn->control.empty() ||
               (!conn->publisher && relay_.has_pending(conn->id));
      });
      if (stopping_ || conn->closed) break;

      if (!conn->control.empty()) {
        std::vector<std::uint8_t> bytes = std::move(conn->control.front());
        conn->control.pop_front();
        lock.unlock();
        conn->socket.write_all(bytes);
        continue;
      }

      RelayItem item = *relay_.pop(conn->id);
      lock.unlock();
      const bool is_end = std::holds_alternative<SessionEnd>(item);
      const std::vector<std::uint8_t> bytes =
          is_end ? frame_encode(std::get<SessionEnd>(item)) : *std::get<RelayFrame>(item).encoded;
      sleep_until_us(bucket.admit(bytes.size() * 8, monotonic_now()));
      conn->socket.write_all(bytes);
      if (is_end) {
        std::lock_guard relock(mutex_);
        conn->end_sent = true;
        session_cv_.notify_all();
      }
    }
  } catch (const Error& e) {
    if (!stopping_) spdlog::warn("relay: writer for connection {} stopped: {}", conn->id, e.what());
    conn->socket.shutdown();
  }
}

// ---------------------------------------------------------------------------------------------
// Clients

PublishReport publish_stream(const PublishOptions& options, SensorGeometry geometry,
                             std::span<const EventWindow> windows) {
  options.partition.validate();
  Socket socket = Socket::connect(options.relay);

  Announce announce;
  announce.session_id = options.session_id;
  announce.track_count = options.partition.track_count;
  announce.events_per_track = options.partition.events_per_track;
  announce.geometry = geometry;
  announce.window_length = options.window_length;
  announce.strategy = options.partition.strategy;
  send_message(socket, announce);
  sleep_until_us(monotonic_now() + options.lead_time);

  PublishReport report;
  report.session_start = monotonic_now();
  std::vector<std::uint8_t> batch;
  for (const auto& slot : replay_schedule(windows, report.session_start, options.window_length)) {
    sleep_until_us(slot.send_deadline);
    Partitioned parts = partition(*slot.window, options.partition);
    report.dropped_events += parts.dropped;
    batch.clear();
    for (TrackSegment& segment : parts.segments) {
      segment.send_time = monotonic_now();
      report.published_events += segment.events.size();
      frame_encode(to_frame(segment), batch);
    }
    socket.write_all(batch);
    ++report.windows;
  }
  send_message(socket, SessionEnd{options.session_id, windows.size()});
  ::shutdown(socket.release(), SHUT_WR);
  return report;
}

SubscribeReport run_subscriber(const SubscribeOptions& options) {
  Socket socket = Socket::connect(options.relay);
  MessageStream stream(socket);
  std::optional<Receiver> receiver;
  SubscribeReport report;

  auto send_all = [&](const std::vector<ControlMessage>& messages) {
    for (const ControlMessage& message : messages) {
      std::visit(
          [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Subscribe>) {
              report.audit.push_back({monotonic_now(), 0, AuditEntry::Kind::SubscribeSent, m.track_id});
            } else if constexpr (std::is_same_v<T, Unsubscribe>) {
              report.audit.push_back({monotonic_now(), 0, AuditEntry::Kind::UnsubscribeSent, m.track_id});
            }
            send_message(socket, m);
          },
          message);
    }
  };

  while (auto message = stream.next()) {
    const Micros now = monotonic_now();
    if (const auto* announce = std::get_if<Announce>(&*message)) {
      if (receiver) fail(ErrorCategory::Protocol, "second ANNOUNCE within one subscription");
      report.announcement = *announce;
      if (options.on_announce) options.on_announce(*announce);
      receiver.emplace(*announce, options.receiver);
      if (options.sink) receiver->set_sink(options.sink);
      send_all(receiver->start());
      continue;
    }
    if (!receiver) fail(ErrorCategory::Protocol, "message before ANNOUNCE");
    if (const auto* ok = std::get_if<SubscribeOk>(&*message)) {
      report.audit.push_back({now, 0, AuditEntry::Kind::SubscribeOkReceived, ok->track_id});
      send_all(receiver->handle_subscribe_ok(*ok, now));
    } else if (const auto* frame = std::get_if<SegmentFrame>(&*message)) {
      send_all(receiver->handle_segment(to_segment(*frame), now));
    } else if (const auto* end = std::get_if<SessionEnd>(&*message)) {
      send_all(receiver->handle_end(*end, now));
    } else {
      fail(ErrorCategory::Protocol, "unexpected message from relay");
    }
    if (receiver->finished()) break;
  }
  socket.shutdown();
  if (receiver) {
    report.series = receiver->metrics();
    report.counters = receiver->counters();
    report.finished = receiver->finished();
  }
  return report;
}

}  // namespace evs::net

namespace evs {

ExperimentResult run_sockets(const ExperimentConfig& config, const SourceStream& source) {
  ExperimentResult result;
  result.config = config;
  result.windows = source.windows.size();
  result.source_events = source.event_count();

  net::RelayServerOptions relay_options;
  relay_options.listen = net::HostPort{"127.0.0.1", 0};
  relay_options.bandwidth = Bandwidth::mbps(config.bandwidth_mbps);
  relay_options.burst_bits = config.burst_bits();
  relay_options.queue_capacity = config.queue_capacity;
  net::RelayServer server(relay_options);
  const net::HostPort relay{"127.0.0.1", server.port()};

  struct Slot {
    bool adaptive;
    net::SubscribeReport report;
    std::vector<Event> events;
    std::string error;
  };
  std::vector<Slot> slots;
  slots.push_back({true, {}, {}, {}});
  if (config.passive_receiver) slots.push_back({false, {}, {}, {}});

  std::vector<std::thread> threads;
  for (Slot& slot : slots) {
    threads.emplace_back([&config, &slot, relay] {
      net::SubscribeOptions options;
      options.relay = relay;
      options.receiver.adaptive = slot.adaptive;
      options.receiver.target_latency =
          Micros{static_cast<std::int64_t>(std::llround(config.latency_target_ms * 1000.0))};
      options.receiver.stall_windows = config.stall_windows;
      if (config.keep_streams) {
        options.sink = [&slot](const EventWindow& w, const WindowMetrics&) {
          slot.events.insert(slot.events.end(), w.events.begin(), w.events.end());
        };
      }
      try {
        slot.report = net::run_subscriber(options);
      } catch (const Error& e) {
        slot.error = std::string(to_string(e.category())) + ": " + e.what();
      }
    });
  }

  net::PublishReport published;
  try {
    net::PublishOptions options;
    options.relay = relay;
    options.partition = {config.strategy, config.tracks, config.events_per_track};
    options.session_id = config.seed;
    options.window_length = config.window_length;
    published = net::publish_stream(options, source.geometry, source.windows);
  } catch (const Error& e) {
    result.aborted = true;
    result.abort_reason = std::string("publisher ") + to_string(e.category()) + ": " + e.what();
  }
  for (std::thread& t : threads) t.join();
  server.stop();

  result.published_events = published.published_events;
  result.publisher_dropped = published.dropped_events;
  if (config.keep_streams) {
    const PartitionConfig partition{config.strategy, config.tracks, config.events_per_track};
    for (const EventWindow& w : source.windows) {
      for (const TrackSegment& s : evs::partition(w, partition).segments) {
        if (config.strategy == PartitionStrategy::Bucket) {
          result.published.insert(result.published.end(), s.events.begin(), s.events.end());
        }
      }
      if (config.strategy == PartitionStrategy::RoundRobin) {
        result.published.insert(result.published.end(), w.events.begin(), w.events.end());
      }
    }
  }

  for (std::size_t i = 0; i < slots.size(); ++i) {
    Slot& slot = slots[i];
    ReceiverReport& report = i == 0 ? result.receiver : result.passive.emplace();
    report.subscriber = static_cast<SubscriberId>(i);
    report.adaptive = slot.adaptive;
    report.finished = slot.report.finished;
    report.counters = slot.report.counters;
    report.series = std::move(slot.report.series);
    report.reconstructed = std::move(slot.events);
    for (AuditEntry entry : slot.report.audit) {
      entry.subscriber = report.subscriber;
      result.audit.push_back(entry);
    }
    for (WindowMetrics& m : report.series) {
      if (m.window_index < source.windows.size()) m.source_events = source.windows[m.window_index].events.size();
    }
    if (!report.series.empty()) {
      report.summary = summarize(report.series, report.series.back().reconstruct_time - published.session_start,
                                 result.source_events);
    }
    if (!slot.error.empty() && !result.aborted) {
      result.aborted = true;
      result.abort_reason = "receiver " + slot.error;
    } else if (!report.finished && !result.aborted) {
      result.aborted = true;
      result.abort_reason = "receiver did not reach the end of the session";
    }
  }
  return result;
}

}  // namespace evs
