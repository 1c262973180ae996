#include "bayesg/traffic_env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace bayesg::env {

void EnvConfig::validate() const {
  if (phases < 1) throw EnvError("phase count must be at least 1");
  if (saturation_flow <= 0) throw EnvError("saturation flow must be positive");
  if (clearance_steps < 0) throw EnvError("clearance steps must be non-negative");
  if (!(arrival_rate >= 0.0)) throw EnvError("arrival rate must be non-negative");
  if (episode_length <= 0) throw EnvError("episode length must be positive");
  if (!(reward_scale > 0.0)) throw EnvError("reward scale must be positive");
  if (capacity <= 0) throw EnvError("queue capacity must be positive");
  if (!(exit_weight >= 0.0)) throw EnvError("exit weight must be non-negative");
  if (initial_queue_max < 0 || initial_queue_max > capacity)
    throw EnvError("initial queue bound must lie in [0, capacity]");
  if (!(age_norm > 0.0)) throw EnvError("age normalizer must be positive");
  if (!(queue_norm > 0.0)) throw EnvError("queue normalizer must be positive");
}

int IntersectionState::total() const { return std::accumulate(queues.begin(), queues.end(), 0); }

TrafficEnv::TrafficEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& g = config_.graph;
  const int n = g.node_count();
  std::mt19937_64 rng(config_.routing_seed);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  routes_.resize(n);
  credit_offset_.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& nbrs = g.neighbors(i);
    const int approaches = static_cast<int>(nbrs.size()) + 1;
    int offset = 0;
    for (int a = 0; a < approaches; ++a) {
      std::vector<Destination> dests;
      for (int j : nbrs) {
        if (a < static_cast<int>(nbrs.size()) && nbrs[a] == j) continue;  // no U-turns
        const auto& nj = g.neighbors(j);
        const int at_j = static_cast<int>(std::lower_bound(nj.begin(), nj.end(), i) - nj.begin());
        dests.push_back({j, at_j, weight(rng)});
      }
      if (config_.exit_weight > 0.0 || dests.empty())
        dests.push_back({-1, -1, config_.exit_weight > 0.0 ? config_.exit_weight : 1.0});
      credit_offset_[i].push_back(offset);
      offset += static_cast<int>(dests.size());
      routes_[i].push_back(std::move(dests));
    }
  }
  reset(0);
}

std::vector<Row> TrafficEnv::reset(std::uint64_t seed) {
  const auto& g = config_.graph;
  const int n = g.node_count();
  nodes_.assign(n, {});
  noise_.clear();
  for (int i = 0; i < n; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), 0x7ea1u};
    noise_.emplace_back(seq);
    auto& s = nodes_[i];
    const int approaches = g.degree(i) + 1;
    s.queues.assign(approaches, 0);
    s.ages.assign(approaches, 0);
    int credit_count = 0;
    for (const auto& d : routes_[i]) credit_count += static_cast<int>(d.size());
    s.credits.assign(credit_count, 0.0);
    if (config_.initial_queue_max > 0) {
      std::uniform_int_distribution<int> q(0, config_.initial_queue_max);
      for (int& v : s.queues) v = q(noise_[i]);
    }
  }
  t_ = 0;
  std::vector<Row> obs;
  for (int i = 0; i < n; ++i) obs.push_back(observe(i));
  return obs;
}

int TrafficEnv::total_vehicles() const {
  int total = 0;
  for (const auto& s : nodes_) total += s.total();
  return total;
}

double TrafficEnv::rate_multiplier() const {
  if (!config_.peak_hour) return 1.0;
  const double x = std::numbers::pi * (static_cast<double>(t_) + 0.5) / config_.episode_length;
  return 1.0 + config_.peak_amplitude * std::sin(x);
}

int TrafficEnv::pick_destination(int node, int approach) {
  auto& credits = nodes_[node].credits;
  const auto& dests = routes_[node][approach];
  const int off = credit_offset_[node][approach];
  double total = 0.0;
  int best = 0;
  for (int d = 0; d < static_cast<int>(dests.size()); ++d) {
    credits[off + d] += dests[d].weight;
    total += dests[d].weight;
    if (credits[off + d] > credits[off + best]) best = d;
  }
  credits[off + best] -= total;
  return best;
}

StepOutcome TrafficEnv::step(std::span<const int> actions) {
  const auto& g = config_.graph;
  const int n = g.node_count();
  if (static_cast<int>(actions.size()) != n)
    throw EnvError("expected " + std::to_string(n) + " actions, got " + std::to_string(actions.size()));
  for (int i = 0; i < n; ++i)
    if (actions[i] < 0 || actions[i] >= config_.phases)
      throw EnvError("agent " + std::to_string(i) + ": invalid action " + std::to_string(actions[i]) +
                     " (phase count " + std::to_string(config_.phases) + ")");

  const std::vector<IntersectionState> prev = nodes_;
  std::vector<std::vector<int>> inflow(n);
  for (int i = 0; i < n; ++i) inflow[i].assign(prev[i].queues.size(), 0);

  StepOutcome out;
  for (int i = 0; i < n; ++i) {
    auto& s = nodes_[i];
    if (actions[i] != s.phase) s.clearance = config_.clearance_steps;
    s.phase = actions[i];
    if (s.clearance > 0) {
      --s.clearance;
      continue;
    }
    const auto& nbrs = g.neighbors(i);
    // Room downstream is judged on pre-step queues so that flows stay local.
    std::vector<int> room(nbrs.size());
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
      const auto& nj = g.neighbors(nbrs[k]);
      const auto at_j = std::lower_bound(nj.begin(), nj.end(), i) - nj.begin();
      room[k] = config_.capacity - prev[nbrs[k]].queues[at_j];
    }
    const int approaches = static_cast<int>(s.queues.size());
    for (int a = 0; a < approaches; ++a) {
      const bool green = a % config_.phases == actions[i];
      if (!green) continue;
      const int attempts = std::min(prev[i].queues[a], config_.saturation_flow);
      for (int v = 0; v < attempts; ++v) {
        const auto& dest = routes_[i][a][pick_destination(i, a)];
        if (dest.node < 0) {
          --s.queues[a];
          ++out.exits;
          continue;
        }
        const auto k = std::lower_bound(nbrs.begin(), nbrs.end(), dest.node) - nbrs.begin();
        if (room[k] <= 0) {
          ++out.blocked;
          continue;
        }
        --room[k];
        --s.queues[a];
        ++inflow[dest.node][dest.approach];
      }
    }
  }

  const double rate = config_.arrival_rate * rate_multiplier();
  for (int i = 0; i < n; ++i) {
    auto& s = nodes_[i];
    for (std::size_t a = 0; a < s.queues.size(); ++a) s.queues[a] += inflow[i][a];
    std::poisson_distribution<int> poisson(rate);
    s.generated = rate > 0.0 ? poisson(noise_[i]) : 0;
    const int ext = static_cast<int>(s.queues.size()) - 1;
    s.arrivals = std::min(s.generated, config_.capacity - prev[i].queues[ext]);
    s.queues[ext] += s.arrivals;
    out.arrivals += s.arrivals;
    for (std::size_t a = 0; a < s.queues.size(); ++a) {
      const bool green = static_cast<int>(a) % config_.phases == s.phase;
      s.ages[a] = (green || s.queues[a] == 0) ? 0 : s.ages[a] + 1;
    }
  }

  ++t_;
  out.done = t_ >= config_.episode_length;
  for (int i = 0; i < n; ++i) {
    out.rewards.push_back(-static_cast<double>(nodes_[i].total()) / config_.reward_scale);
    out.observations.push_back(observe(i));
  }
  return out;
}

Row TrafficEnv::observe(int i) const {
  const auto& s = nodes_.at(i);
  const int width = max_approaches();
  Row obs = Row::Zero(observation_width());
  for (std::size_t a = 0; a < s.queues.size(); ++a) {
    obs(static_cast<Eigen::Index>(a)) = static_cast<double>(s.queues[a]) / config_.queue_norm;
    obs(width + config_.phases + static_cast<Eigen::Index>(a)) =
        std::min(1.0, s.ages[a] / config_.age_norm);
  }
  obs(width + s.phase) = 1.0;
  return obs;
}

bool locality_probe(const TrafficEnv& env, std::span<const int> actions, int i, int k, int delta) {
  TrafficEnv base = env;
  TrafficEnv perturbed = env;
  for (int& q : perturbed.mutable_state(k).queues) q = std::clamp(q + delta, 0, env.config().capacity);
  base.step(actions);
  perturbed.step(actions);
  return base.state(i) == perturbed.state(i);
}

void write_trajectory_rows(std::ostream& out, int step, const TrafficEnv& env,
                           std::span<const int> actions, const StepOutcome& outcome) {
  for (int i = 0; i < env.agent_count(); ++i)
    out << step << "," << i << "," << env.state(i).total() << "," << actions[i] << ","
        << outcome.rewards[i] << "\n";
}

}  // namespace bayesg::env
