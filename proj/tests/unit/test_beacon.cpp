#include "samarl/beacon/control_plane.hpp"
#include "samarl/reward/reward.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <set>

using namespace samarl;
using namespace samarl::beacon;

namespace {

Beacon random_beacon(Rng& rng, int n) {
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<int> u16(0, 0xFFFF);
  std::uniform_int_distribution<int> u8(0, 0xFF);
  std::uniform_real_distribution<float> real(-1e4F, 1e4F);
  std::uniform_real_distribution<float> unit(0.0F, 1.0F);
  Beacon b;
  b.src = static_cast<std::uint16_t>(u16(rng));
  b.dst = static_cast<std::uint16_t>(u16(rng));
  b.tick = u32(rng);
  switch (kind(rng)) {
    case 0:
      b.payload = GloRequest{static_cast<std::uint8_t>(u8(rng)), static_cast<std::uint16_t>(u16(rng)), real(rng),
                             real(rng), u32(rng)};
      break;
    case 1: {
      GloReply p;
      for (int i = 0; i < n * (n - 1) / 2; ++i) p.cluster_topo.push_back(u8(rng) % 2 == 1);
      p.exe_progress = unit(rng);
      p.est_reward = real(rng);
      b.payload = p;
      break;
    }
    case 2: {
      LocRequest p;
      for (int i = 0; i < n; ++i) p.local_task.push_back(static_cast<std::uint8_t>(u8(rng)));
      p.control_cycle = static_cast<std::uint16_t>(u16(rng));
      b.payload = p;
      break;
    }
    default: {
      LocReply p;
      for (auto& x : p.auv_state) x = real(rng);
      p.instant_reward = real(rng);
      p.error_flag = static_cast<std::uint8_t>(u8(rng));
      b.payload = p;
    }
  }
  return b;
}

std::vector<Vec3> two_nodes(double distance) { return {Vec3::Zero(), Vec3(distance, 0, 0)}; }

Beacon loc_reply(std::uint32_t tick) {
  Beacon b;
  b.src = 0;
  b.dst = 1;
  b.tick = tick;
  b.payload = LocReply{};
  return b;
}

env::ScenarioConfig plane_scenario(int n, int episode_len) {
  env::ScenarioConfig s;
  s.n_auvs = n;
  s.n_targets = 1;
  s.bounds = Vec3(20, 20, 20);
  s.episode_len = episode_len;
  return s;
}

marl::Transition transition_at(int tick, int n, double reward) {
  marl::Transition t;
  t.tick = tick;
  t.r_scene.assign(static_cast<std::size_t>(n), reward);
  t.r_general.assign(static_cast<std::size_t>(n), 0.0);
  return t;
}

}  // namespace

TEST_CASE("codec: LocReply wire layout") {
  Beacon b;
  b.src = 5;
  b.dst = 1;
  b.tick = 100;
  b.payload = LocReply{};
  const auto bytes = encode_beacon(b);
  const std::vector<std::uint8_t> header{0x03, 0x05, 0x00, 0x01, 0x00, 0x64, 0x00, 0x00, 0x00};
  REQUIRE(bytes.size() == header.size() + 29);
  CHECK(std::equal(header.begin(), header.end(), bytes.begin()));
  CHECK(std::all_of(bytes.begin() + 9, bytes.end(), [](std::uint8_t x) { return x == 0; }));
  CHECK(encoded_size(BeaconKind::kLocReply, 4) == 38);
}

TEST_CASE("codec: little-endian fields and bitmap padding") {
  Beacon b;
  b.src = 0x0102;
  b.dst = 0x0304;
  b.tick = 0x05060708;
  b.payload = LocRequest{{1, 0, 2}, 0x0A0B};
  const auto bytes = encode_beacon(b);
  const std::vector<std::uint8_t> expect{0x02, 0x02, 0x01, 0x04, 0x03, 0x08, 0x07, 0x06, 0x05, 1, 0, 2, 0x0B, 0x0A};
  CHECK(bytes == expect);

  GloReply g;
  g.cluster_topo = {true, false, true};  // n = 3
  g.exe_progress = 0.5F;
  g.est_reward = -2.0F;
  b.payload = g;
  const auto gb = encode_beacon(b);
  REQUIRE(gb.size() == 9 + 1 + 4 + 4);
  CHECK(gb[9] == 0b101);
  float progress = 0.0F;
  std::memcpy(&progress, gb.data() + 10, 4);
  CHECK(progress == 0.5F);
  CHECK(decode_beacon(gb, 3) == b);
}

TEST_CASE("codec: round trip over random beacons of every kind") {
  Rng rng(1);
  std::uniform_int_distribution<int> nd(1, 12);
  std::array<int, 4> seen{};
  for (int i = 0; i < 10000; ++i) {
    const int n = nd(rng);
    const Beacon b = random_beacon(rng, n);
    const auto bytes = encode_beacon(b);
    REQUIRE(bytes.size() == encoded_size(b.kind(), n));
    REQUIRE(decode_beacon(bytes, n) == b);
    ++seen[static_cast<std::size_t>(b.kind())];
  }
  for (int s : seen) CHECK(s > 2000);
}

TEST_CASE("codec: malformed input") {
  const std::vector<std::uint8_t> one{0x03};
  CHECK_THROWS_AS(decode_beacon(one, 4), MalformedMessage);
  CHECK_THROWS_AS(decode_beacon(std::vector<std::uint8_t>{}, 4), MalformedMessage);

  Beacon b = loc_reply(7);
  auto bytes = encode_beacon(b);
  auto cut = bytes;
  cut.pop_back();
  CHECK_THROWS_AS(decode_beacon(cut, 4), MalformedMessage);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_beacon(extra, 4), MalformedMessage);
  auto unknown = bytes;
  unknown[0] = 9;
  CHECK_THROWS_AS(decode_beacon(unknown, 4), MalformedMessage);

  b.payload = GloReply{{true, true, true}, 0.0F, 0.0F};
  auto padded = encode_beacon(b);
  padded[9] |= 0x80;
  CHECK_THROWS_AS(decode_beacon(padded, 3), MalformedMessage);
}

TEST_CASE("codec: values the layout cannot carry") {
  Beacon b = loc_reply(0);
  b.payload = GloReply{{}, 1.5F, 0.0F};
  CHECK_THROWS_AS(encode_beacon(b), ContractViolation);
  LocReply r;
  r.instant_reward = std::nanf("");
  b.payload = r;
  CHECK_THROWS_AS(encode_beacon(b), ContractViolation);
}

TEST_CASE("transmission delay") {
  ChannelParams p;
  CHECK(transmission_delay(Vec3::Zero(), Vec3(1500, 0, 0), 0, p) == 1.0);
  CHECK(transmission_delay(Vec3::Zero(), Vec3::Zero(), 2000, p) == 1.0);
  CHECK(transmission_delay(Vec3::Zero(), Vec3(0, 750, 0), 1000, p) == 1.0);
  CHECK_THROWS_AS(transmission_delay(Vec3::Zero(), Vec3::Zero(), -1, p), ContractViolation);

  Rng rng(2);
  std::uniform_real_distribution<double> u(-500, 500);
  std::uniform_real_distribution<double> bits(0, 1e4);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 a(u(rng), u(rng), u(rng));
    const Vec3 b(u(rng), u(rng), u(rng));
    const double s = bits(rng);
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    const double expect = std::sqrt(dx * dx + dy * dy + dz * dz) / 1500.0 + s / 2000.0;
    const double d = transmission_delay(a, b, s, p);
    REQUIRE(std::abs(d - expect) <= 1e-9);
    REQUIRE(transmission_delay(a, b, s + 1.0, p) > d);
  }
}

TEST_CASE("channel: lossless delivery at the computed time, total loss, range") {
  ChannelParams p;
  AcousticChannel ch(p, 4, Rng(3));
  const auto pos = two_nodes(300);
  const auto ev = ch.send(loc_reply(1), pos, 2.0);
  CHECK_FALSE(ev.dropped);
  CHECK(ev.deliver_time == 2.0 + transmission_delay(pos[0], pos[1], 8.0 * 38, p));
  CHECK(ch.poll(ev.deliver_time - 1e-9).empty());
  const auto got = ch.poll(ev.deliver_time);
  REQUIRE(got.size() == 1);
  CHECK(got[0] == loc_reply(1));
  CHECK(ch.poll(100.0).empty());
  CHECK_THROWS_AS(ch.poll(99.0), ContractViolation);

  p.p_loss = 1.0;
  AcousticChannel lossy(p, 4, Rng(3));
  for (int i = 0; i < 100; ++i) CHECK(lossy.send(loc_reply(static_cast<std::uint32_t>(i)), pos, 0.0).dropped);
  CHECK(lossy.poll(1e9).empty());
  CHECK(lossy.dropped() == 100);

  p.p_loss = 0.0;
  p.comm_range = 100.0;
  AcousticChannel short_range(p, 4, Rng(3));
  const auto far = short_range.send(loc_reply(0), pos, 0.0);
  CHECK(far.dropped);
  CHECK(far.reason == DropReason::kOutOfRange);
  CHECK(short_range.poll(1e9).empty());
}

TEST_CASE("channel: two sends delivered in deliver-time order, ties by send order") {
  AcousticChannel ch(ChannelParams{}, 4, Rng(4));
  const std::vector<Vec3> pos{Vec3::Zero(), Vec3(600, 0, 0), Vec3(30, 0, 0)};
  Beacon far = loc_reply(1);
  Beacon near = loc_reply(2);
  near.dst = 2;
  ch.send(far, pos, 0.0);
  ch.send(near, pos, 0.0);
  Beacon tie = loc_reply(3);
  tie.dst = 2;
  ch.send(tie, pos, 0.0);
  const auto got = ch.poll(10.0);
  REQUIRE(got.size() == 3);
  CHECK(got[0].tick == 2);
  CHECK(got[1].tick == 3);
  CHECK(got[2].tick == 1);
}

TEST_CASE("channel: empirical drop rate within three binomial sigma") {
  ChannelParams p;
  p.p_loss = 0.1;
  AcousticChannel ch(p, 4, Rng(5));
  const auto pos = two_nodes(10);
  const int n = 10000;
  int dropped = 0;
  for (int i = 0; i < n; ++i) dropped += ch.send(loc_reply(static_cast<std::uint32_t>(i)), pos, 0.0).dropped ? 1 : 0;
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  CHECK(std::abs(dropped - n * 0.1) <= 3 * sigma);
  CHECK(ch.poll(1e9).size() == static_cast<std::size_t>(n - dropped));
}

TEST_CASE("channel: exhaustive small schedules conserve every beacon") {
  // Each schedule is a word over {send near, send far, poll +0.05 s}; every
  // send is delivered exactly once or dropped, never both, never neither,
  // and no beacon arrives before its deliver time.
  const std::vector<Vec3> pos{Vec3::Zero(), Vec3(300, 0, 0), Vec3(15, 0, 0)};
  std::size_t schedules = 0;
  for (double loss : {0.0, 0.5, 1.0}) {
    for (int len = 1; len <= 7; ++len) {
      int words = 1;
      for (int i = 0; i < len; ++i) words *= 3;
      for (int word = 0; word < words; ++word) {
        ChannelParams p;
        p.p_loss = loss;
        AcousticChannel ch(p, 4, Rng(static_cast<std::uint64_t>(word * 31 + len)));
        double t = 0.0;
        std::map<std::uint32_t, ChannelEvent> sent;
        std::map<std::uint32_t, int> delivered;
        auto collect = [&](const std::vector<Beacon>& got, double now) {
          double last = -1.0;
          for (const auto& b : got) {
            ++delivered[b.tick];
            const auto& ev = sent.at(b.tick);
            REQUIRE(ev.deliver_time <= now);
            REQUIRE(ev.deliver_time >= last);
            last = ev.deliver_time;
          }
        };
        int w = word;
        for (int step = 0; step < len; ++step) {
          const int op = w % 3;
          w /= 3;
          if (op == 2) {
            t += 0.05;
            collect(ch.poll(t), t);
            continue;
          }
          Beacon b = loc_reply(static_cast<std::uint32_t>(sent.size()));
          b.dst = op == 0 ? 2 : 1;
          sent.emplace(b.tick, ch.send(b, pos, t));
        }
        collect(ch.poll(1e9), 1e9);
        for (const auto& [id, ev] : sent) {
          const int d = delivered.count(id) != 0 ? delivered[id] : 0;
          REQUIRE((ev.dropped ? d == 0 : d == 1));
        }
        REQUIRE(ch.sent() == ch.delivered() + ch.dropped());
        ++schedules;
      }
    }
  }
  CHECK(schedules == 3 * (3 + 9 + 27 + 81 + 243 + 729 + 2187));
}

TEST_CASE("topology: examples and symmetry") {
  std::vector<Vec3> two{Vec3::Zero(), Vec3(1, 0, 0)};
  auto t = compute_topology(two, 10);
  CHECK(t.edge(0, 1));
  CHECK(t.edge(1, 0));
  CHECK_FALSE(t.edge(0, 0));
  two[1] = Vec3(11, 0, 0);
  CHECK_FALSE(compute_topology(two, 10).edge(0, 1));

  const std::vector<Vec3> chain{Vec3::Zero(), Vec3(8, 0, 0), Vec3(16, 0, 0)};
  t = compute_topology(chain, 10);
  CHECK(t.edge(0, 1));
  CHECK(t.edge(1, 2));
  CHECK_FALSE(t.edge(0, 2));
  CHECK(t.to_bitmap() == std::vector<bool>{true, false, true});

  Rng rng(6);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Vec3> pos(7);
    for (auto& p : pos) p = Vec3(u(rng), u(rng), u(rng));
    const auto topo = compute_topology(pos, 25);
    for (int i = 0; i < 7; ++i) {
      REQUIRE_FALSE(topo.edge(i, i));
      for (int j = 0; j < 7; ++j) {
        REQUIRE(topo.edge(i, j) == topo.edge(j, i));
        if (i != j) REQUIRE(topo.edge(i, j) == ((pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(j)]).norm() <= 25));
      }
    }
    const auto back = CommTopology::from_bitmap(7, topo.to_bitmap());
    REQUIRE(back.adjacency == topo.adjacency);
  }
}

TEST_CASE("control plane: cycle arithmetic and lossless replies") {
  const int n = 3;
  auto sc = plane_scenario(n, 20);
  ControlPlaneConfig cfg;
  cfg.control_cycle = 5;
  ControlPlane plane(sc, cfg, Rng(7));
  auto world = env::init_world(sc);
  const auto initial = reward::assign_targets(world, 1);
  std::vector<marl::Transition> committed;
  const CommitSink sink = [&](marl::Transition&& t) { committed.push_back(std::move(t)); };
  plane.start(world, initial);
  std::vector<env::Action> idle(n);
  for (int k = 0; k < 20; ++k) {
    const auto next = env::step_world(world, idle, sc);
    plane.submit(transition_at(k, n, 1.0), sink);
    world = next;
    plane.advance(world, sink);
  }
  plane.finish(world, sink);
  CHECK(plane.lc().requests_broadcast == 4);
  // One reply per follower per request plus the end-of-episode report.
  CHECK(plane.lc().replies_received == static_cast<std::uint64_t>(n * 4 + n));
  CHECK(plane.channel().dropped() == 0);
  CHECK(committed.size() == 20);
  for (int s : plane.lc().staleness) CHECK(s == 0);
  CHECK(plane.usv().requests_sent == 1);
  CHECK(plane.usv().replies_received == 1);
}

TEST_CASE("control plane: total loss freezes assignments and grows staleness") {
  const int n = 4;
  auto sc = plane_scenario(n, 60);
  sc.n_targets = 2;
  ControlPlaneConfig cfg;
  cfg.control_cycle = 3;
  cfg.channel.p_loss = 1.0;
  cfg.comms_gated = true;
  ControlPlane plane(sc, cfg, Rng(8));
  auto world = env::init_world(sc);
  const env::Assignment initial{1, 1, 0, 0};
  int committed = 0;
  const CommitSink sink = [&](marl::Transition&&) { ++committed; };
  plane.start(world, initial);
  std::vector<int> prev(n, 0);
  Rng rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 60; ++k) {
    std::vector<env::Action> acts(n);
    for (auto& a : acts) a.command = Vec3(u(rng), u(rng), u(rng));
    world = env::step_world(world, acts, sc);
    plane.submit(transition_at(k, n, 0.0), sink);
    plane.advance(world, sink);
    CHECK(plane.follower_assignment() == initial);
    for (int i = 0; i < n; ++i) {
      CHECK(plane.lc().staleness[static_cast<std::size_t>(i)] >= prev[static_cast<std::size_t>(i)]);
      prev[static_cast<std::size_t>(i)] = plane.lc().staleness[static_cast<std::size_t>(i)];
    }
  }
  CHECK(prev[0] == 19);
  plane.finish(world, sink);
  CHECK(committed == 0);
  CHECK(plane.dropped_incomplete() == 60);
  CHECK(plane.lc().replies_received == 0);
}

TEST_CASE("control plane: running mean reward and progress reports") {
  auto sc = plane_scenario(1, 12);
  ControlPlaneConfig cfg;
  cfg.control_cycle = 1;
  cfg.global_cycle_multiplier = 5;
  cfg.channel.sound_speed = 1e12;
  cfg.channel.bitrate = 1e12;
  ControlPlane plane(sc, cfg, Rng(9));
  auto world = env::init_world(sc);
  const CommitSink sink = [](marl::Transition&&) {};
  plane.start(world, env::Assignment{0});
  // Replies carry the latest reward; each lands one tick after it is sent.
  for (int k = 1; k <= 3; ++k) {
    world.tick = k;
    plane.submit(transition_at(k - 1, 1, k), sink);
    plane.advance(world, sink);
  }
  world.tick = 4;
  plane.advance(world, sink);
  CHECK(plane.lc().replies_received == 3);
  CHECK(plane.lc().est_reward() == 2.0);

  for (int k = 5; k <= 7; ++k) {
    world.tick = k;
    plane.advance(world, sink);
  }
  // The tick-5 request is answered at tick 6 of 12.
  CHECK(plane.usv().exe_progress == 0.5F);
  std::vector<Vec3> auv_pos{world.auvs[0].position};
  CHECK(plane.usv().cluster_topo == compute_topology(auv_pos, cfg.channel.comm_range).to_bitmap());
}

TEST_CASE("control plane: gated and direct wiring commit identical transitions when lossless") {
  const int n = 4;
  auto sc = plane_scenario(n, 50);
  sc.n_targets = 2;
  auto run = [&](bool gated) {
    ControlPlaneConfig cfg;
    cfg.comms_gated = gated;
    ControlPlane plane(sc, cfg, Rng(10));
    std::vector<marl::Transition> out;
    const CommitSink sink = [&](marl::Transition&& t) { out.push_back(std::move(t)); };
    for (int episode = 0; episode < 3; ++episode) {
      sc.seed = static_cast<std::uint64_t>(episode);
      auto world = env::init_world(sc);
      plane.start(world, reward::assign_targets(world, 2));
      Rng rng(static_cast<std::uint64_t>(episode));
      std::uniform_real_distribution<double> u(-1, 1);
      for (int k = 0; k < 50; ++k) {
        std::vector<env::Action> acts(n);
        for (auto& a : acts) a.command = Vec3(u(rng), u(rng), u(rng));
        auto t = transition_at(k, n, u(rng));
        t.episode = episode;
        t.assignment = plane.follower_assignment();
        world = env::step_world(world, acts, sc);
        plane.submit(std::move(t), sink);
        plane.advance(world, sink);
      }
      plane.finish(world, sink);
    }
    return out;
  };
  const auto direct = run(false);
  const auto gated = run(true);
  CHECK(direct.size() == 150);
  CHECK(gated == direct);
}
