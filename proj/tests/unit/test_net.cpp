#include <doctest.h>

#include <thread>

#include "evstream/error.hpp"
#include "evstream/harness.hpp"
#include "evstream/net.hpp"

using namespace evs;

TEST_CASE("host:port parsing") {
  const auto hp = net::HostPort::parse("10.0.0.2:4433");
  CHECK(hp.host == "10.0.0.2");
  CHECK(hp.port == 4433);
  CHECK(net::HostPort::parse(":80").host == "127.0.0.1");
  CHECK_THROWS_AS(net::HostPort::parse("nohost"), Error);
  CHECK_THROWS_AS(net::HostPort::parse("h:99999"), Error);
}

TEST_CASE("frames survive a real socket") {
  net::Socket listener = net::Socket::listen({"127.0.0.1", 0});
  const std::uint16_t port = listener.local_port();
  std::vector<Message> got;
  std::thread server([&] {
    net::Socket peer = listener.accept(5'000);
    REQUIRE(peer.valid());
    net::MessageStream stream(peer);
    while (auto m = stream.next()) got.push_back(std::move(*m));
  });
  {
    net::Socket client = net::Socket::connect({"127.0.0.1", port});
    net::send_message(client, Subscribe{1, 2});
    net::send_message(client, to_frame(TrackSegment{1, 3, Micros{4}, std::vector<Event>(300)}));
    net::send_message(client, SessionEnd{1, 4});
  }
  server.join();
  REQUIRE(got.size() == 3);
  CHECK(std::get<SegmentFrame>(got[1]).event_count == 300);
}

TEST_CASE("publisher, relay and two receivers over TCP") {
  ExperimentConfig c;
  c.mode = RunMode::Sockets;
  c.profile = RateProfile::parse("constant:1000");
  c.duration_s = 1.5;
  c.bandwidth_mbps = 50.0;
  c.passive_receiver = true;
  c.keep_streams = true;
  const ExperimentResult r = run_experiment(c);
  INFO(r.abort_reason);
  REQUIRE_FALSE(r.aborted);
  CHECK(r.windows == 30);
  CHECK(r.receiver.finished);
  REQUIRE(r.passive);
  CHECK(r.passive->finished);
  CHECK(r.passive->reconstructed == r.published);
  CHECK(r.receiver.series.size() == 30);
  CHECK(single_subscribe_in_flight(r.audit, r.receiver.subscriber));
}

TEST_CASE("relay rejects a subscribe for an unknown track by closing the connection") {
  net::RelayServer server({{"127.0.0.1", 0}, Bandwidth::mbps(10), 0, 8});
  net::Socket pub = net::Socket::connect({"127.0.0.1", server.port()});
  net::send_message(pub, Announce{1, 2, 10, {}, kDefaultWindowLength, PartitionStrategy::Bucket});

  net::Socket sub = net::Socket::connect({"127.0.0.1", server.port()});
  net::MessageStream stream(sub);
  auto first = stream.next();
  REQUIRE(first);
  CHECK(std::holds_alternative<Announce>(*first));
  net::send_message(sub, Subscribe{1, 9});
  CHECK_FALSE(stream.next().has_value());
  server.stop();
}
