#include <cmath>

#include "doctest.h"
#include "bayesg/exec_sim.hpp"
#include "oracles.hpp"

using namespace bayesg;
using exec::ChannelConfig;
using exec::Schedule;
using train::Trainer;

namespace {

env::EnvConfig grid_env(int r, int c, int T = 25) {
  env::EnvConfig e;
  e.graph = graph::make_grid(r, c);
  e.episode_length = T;
  e.initial_queue_max = 4;
  return e;
}

train::TrainConfig small_train(std::uint64_t seed = 1) {
  train::TrainConfig c;
  c.seed = seed;
  c.hidden = 8;
  c.embed = 6;
  c.critic_width = 8;
  c.batch = 10;
  c.episodes = 1;
  return c;
}

// A briefly trained trainer, so parameters are not at their initial values.
std::unique_ptr<Trainer> trained(const train::TrainConfig& c, int r = 3, int cols = 3) {
  auto tr = std::make_unique<Trainer>(grid_env(r, cols), c);
  tr->run();
  return tr;
}

}  // namespace

TEST_CASE("an ideal channel reproduces the trainer's evaluation exactly") {
  for (auto [method, mode] : {std::pair{nn::Method::bayesg, train::MaskMode::learned},
                              std::pair{nn::Method::bayesg, train::MaskMode::none},
                              std::pair{nn::Method::bayesg, train::MaskMode::random},
                              std::pair{nn::Method::ia2c, train::MaskMode::learned},
                              std::pair{nn::Method::commnet, train::MaskMode::learned},
                              std::pair{nn::Method::neurcomm, train::MaskMode::learned}}) {
    auto c = small_train(2);
    c.method = method;
    c.mask_mode = mode;
    auto tr = trained(c);
    for (std::uint64_t seed : {5u, 6u}) {
      const auto ev = tr->evaluate(seed, 2);
      const auto ex = exec::run_execution(*tr, {}, {}, seed, 2);
      INFO(nn::to_string(method) << " " << train::to_string(mode) << " seed " << seed);
      CHECK(ex.actions == ev.actions);
      CHECK(ex.returns == ev.returns);
      CHECK(ex.retained_fraction == ev.retained_fraction);
      CHECK(ex.stale_reads == 0);
      CHECK(ex.messages_delivered == ex.messages_sent);
    }
  }
}

TEST_CASE("latency inside the window changes nothing; past it, messages are lost") {
  auto tr = trained(small_train(3));
  const auto ev = tr->evaluate(7, 1);
  Schedule s;
  s.comm_ticks = 2;
  ChannelConfig in_window;
  in_window.delay = 2;
  CHECK(exec::run_execution(*tr, in_window, s, 7, 1).actions == ev.actions);

  ChannelConfig late;
  late.delay = 3;
  const auto r = exec::run_execution(*tr, late, s, 7, 1);
  CHECK(r.messages_delivered == 0);
  CHECK(r.messages_sent > 0);

  ChannelConfig jitter;
  jitter.jitter = 4;
  const auto j = exec::run_execution(*tr, jitter, s, 7, 1);
  CHECK(j.messages_delivered > 0);
  CHECK(j.messages_delivered < j.messages_sent);
}

TEST_CASE("with every message dropped, agents act on zero caches") {
  auto tr = trained(small_train(4));
  ChannelConfig drop_all;
  drop_all.drop = 1.0;
  const auto r = exec::run_execution(*tr, drop_all, {}, 8, 2);
  CHECK(r.messages_delivered == 0);
  const long long steps = 2 * 25;
  CHECK(r.messages_sent == steps * 2 * 12);
  CHECK(r.stale_reads == steps * 2 * 12);
  for (double x : r.returns) CHECK(std::isfinite(x));
  for (const auto& e : exec::message_accounting(r)) CHECK(e.delivered == 0);
}

TEST_CASE("a lone agent sends nothing") {
  auto tr = trained(small_train(5), 1, 1);
  const auto r = exec::run_execution(*tr, {}, {}, 1, 1);
  CHECK(r.messages_sent == 0);
  CHECK(r.edges.empty());
  CHECK(r.actions == tr->evaluate(1, 1).actions);
}

TEST_CASE("messages follow the environment graph only") {
  const auto g = graph::make_grid(3, 3);
  exec::MessageBus bus(g, {}, 1);
  CHECK_THROWS_AS(bus.send(0, 4, {}, 0, 10), exec::ExecError);
  CHECK_THROWS_AS(bus.send(0, 0, {}, 0, 10), exec::ExecError);
  CHECK_NOTHROW(bus.send(0, 1, {}, 0, 10));
}

TEST_CASE("bus delivers in (time, sender, receiver) order and counts per link") {
  const auto g = graph::make_grid(3, 3);
  ChannelConfig c;
  c.jitter = 3;
  exec::MessageBus bus(g, c, 9);
  for (auto [u, v] : g.edges()) {
    bus.send(v, u, {}, 0, 100);
    bus.send(u, v, {}, 0, 100);
  }
  const auto got = bus.deliver(100);
  CHECK(got.size() == 24);
  for (std::size_t k = 1; k < got.size(); ++k)
    CHECK(std::tie(got[k - 1].deliver_at, got[k - 1].sender, got[k - 1].receiver) <
          std::tie(got[k].deliver_at, got[k].sender, got[k].receiver));
  for (const auto& [link, count] : bus.links()) {
    CHECK(count.sent == 1);
    CHECK(count.delivered == 1);
  }
  CHECK(bus.in_flight() == 0);
}

TEST_CASE("schedule and channel validation") {
  Schedule s;
  s.comm_ticks = 11;
  s.control_ticks = 10;
  CHECK_THROWS_AS(s.validate(), exec::ExecError);
  auto tr = trained(small_train(6), 1, 2);
  CHECK_THROWS_AS(exec::run_execution(*tr, {}, s, 1, 1), exec::ExecError);
  ChannelConfig c;
  c.drop = 1.5;
  CHECK_THROWS_AS(c.validate(), exec::ExecError);
  c = {};
  c.delay = -1;
  CHECK_THROWS_AS(exec::run_execution(*tr, c, {}, 1, 1), exec::ExecError);
}

TEST_CASE("retained-edge fractions follow the mask logits") {
  auto run = [](double logit, train::MaskMode mode) {
    auto c = small_train(7);
    c.logit_mode = train::LogitMode::free;
    c.logit_init = logit;
    c.mask_mode = mode;
    Trainer tr(grid_env(3, 3, 100), c);  // untrained: logits stay at their initial value
    return exec::run_execution(tr, {}, {}, 3, 1);
  };
  CHECK(run(-50, train::MaskMode::learned).retained_fraction == 0.0);
  CHECK(run(0, train::MaskMode::none).retained_fraction == 1.0);
  const auto half = run(0, train::MaskMode::learned);
  // 100 decisions over 24 ego edges: a grid has no triangles, so ego edges = degree.
  const int slots = 100 * 24;
  CHECK(std::abs(half.retained_fraction - 0.5) <= oracle::binomial_halfwidth_99(0.5, slots));
  for (const auto& e : exec::message_accounting(half)) {
    CHECK(e.retained >= 0.0);
    CHECK(e.retained <= 1.0);
    CHECK(e.delivered <= e.sent);
  }
}
