#pragma once

// Finite-difference check of one agent's full loss on a two-agent line.

#include <algorithm>
#include <random>

#include "bayesg/trainer.hpp"
#include "oracles.hpp"

namespace lossfd {

using namespace bayesg;

inline env::EnvConfig two_agent_env() {
  env::EnvConfig e;
  e.graph = graph::make_grid(1, 2);
  e.episode_length = 8;
  e.arrival_rate = 0.8;
  e.initial_queue_max = 5;
  return e;
}

inline train::TrainConfig tiny_train(std::uint64_t seed, nn::Method method = nn::Method::bayesg) {
  train::TrainConfig c;
  c.method = method;
  c.seed = seed;
  c.hidden = 4;
  c.embed = 3;
  c.critic_width = 5;
  c.batch = 5;
  c.beta = 0.05;
  c.episodes = 4;
  return c;
}

// Randomizes every parameter of agent `i`, then compares the tape gradient of
// its total loss with central differences. The critic reads a detached
// recurrent state, so actor and mask parameters are differenced on the ELBO
// term and critic parameters on the total.
inline oracle::FdReport total_loss_fd(std::uint64_t seed, int i, int coords = 0,
                                      nn::Method method = nn::Method::bayesg) {
  std::mt19937_64 rng(seed * 7919 + static_cast<std::uint64_t>(i));
  train::Trainer tr(two_agent_env(), tiny_train(seed, method));
  tr.rollout(5);
  const train::RolloutBatch b = tr.rollout(5);  // crosses the episode end at step 8
  train::Agent& a = tr.agent(i);
  for (auto* p : a.parameters())
    p->value = oracle::uniform(p->value.rows(), p->value.cols(), -0.6, 0.6, rng);

  {
    ad::Tape t;
    const auto lv = tr.build_losses(t, a, b.agents[i], b.returns);
    for (auto* p : a.parameters()) p->zero_grad();
    t.backward(lv.total);
  }
  auto elbo = [&] {
    ad::Tape t;
    return tr.build_losses(t, a, b.agents[i], b.returns).elbo.scalar();
  };
  auto total = [&] {
    ad::Tape t;
    return tr.build_losses(t, a, b.agents[i], b.returns).total.scalar();
  };
  auto upstream = a.actor_parameters();
  for (auto* p : a.graph_parameters()) upstream.push_back(p);
  oracle::FdReport r = oracle::finite_difference(upstream, elbo, rng, coords);
  const oracle::FdReport c = oracle::finite_difference(a.critic_parameters(), total, rng, coords);
  r.checked += c.checked;
  if (c.worst > r.worst) {
    r.worst = c.worst;
    r.where = c.where;
  }
  return r;
}

}  // namespace lossfd
